import { ApiClient } from "./api.js";
import { App } from "./app.js";
import { apiBase } from "./config.js";
import { UiState } from "./state.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app container");
}

const app = new App(root, {
  api: new ApiClient(apiBase()),
  state: new UiState(),
});

app.init().catch((error) => {
  root.textContent =
    `Could not reach the practice service: ${String(error)}. `
    + "Check that the server is running and refresh.";
});
