// Microphone capture via the browser's native media APIs. The recorder is
// injected into the app so tests can substitute a fake without a real mic.

export interface RecorderHandle {
  /** Stop capturing and resolve with the recorded clip. */
  stop(): Promise<{ blob: Blob; filename: string }>;
}

export type RecorderFactory = () => Promise<RecorderHandle>;

const PREFERRED_TYPES = ["audio/webm", "audio/ogg", "audio/mp4"];

export const createMicrophoneRecorder: RecorderFactory = async () => {
  const stream = await navigator.mediaDevices.getUserMedia({ audio: true });
  const mimeType = PREFERRED_TYPES.find(
    (t) => typeof MediaRecorder.isTypeSupported !== "function"
      || MediaRecorder.isTypeSupported(t));
  const recorder = new MediaRecorder(
    stream, mimeType ? { mimeType } : undefined);
  const chunks: Blob[] = [];
  recorder.ondataavailable = (event) => {
    if (event.data.size > 0) chunks.push(event.data);
  };
  recorder.start();

  return {
    stop: () =>
      new Promise((resolve) => {
        recorder.onstop = () => {
          stream.getTracks().forEach((track) => track.stop());
          const type = recorder.mimeType || "audio/webm";
          resolve({
            blob: new Blob(chunks, { type }),
            filename: type.includes("ogg") ? "clip.ogg"
              : type.includes("mp4") ? "clip.m4a" : "clip.webm",
          });
        };
        recorder.stop();
      }),
  };
};

/** Play a one-shot reply clip; resolves when playback starts. */
export async function playClip(blob: Blob): Promise<HTMLAudioElement> {
  const url = URL.createObjectURL(blob);
  const player = new Audio(url);
  player.onended = () => URL.revokeObjectURL(url);
  await player.play().catch(() => {
    // Autoplay may be blocked; the clip is still attached to the element.
  });
  return player;
}
