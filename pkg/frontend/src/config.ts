// Build/deploy-time API base. Set a global before loading the bundle
// (e.g. <script>globalThis.__API_BASE__ = "https://host:8080"</script>)
// or rely on the local default.

export function apiBase(): string {
  const override = (globalThis as { __API_BASE__?: unknown }).__API_BASE__;
  if (typeof override === "string" && override) {
    return override;
  }
  return "http://127.0.0.1:8080";
}
