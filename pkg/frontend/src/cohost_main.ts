import { CohostConsole } from "./console.js";

function must<T extends Element>(sel: string): T {
  const el = document.querySelector<T>(sel);
  if (!el) throw new Error(`missing element ${sel}`);
  return el;
}

const base = location.origin;
const app = new CohostConsole(base, {
  main: must<HTMLCanvasElement>("#main"),
  thumbs: {
    first_person: must<HTMLCanvasElement>("#thumb-first_person"),
    over_shoulder: must<HTMLCanvasElement>("#thumb-over_shoulder"),
    third_follow: must<HTMLCanvasElement>("#thumb-third_follow"),
    map_view: must<HTMLCanvasElement>("#thumb-map_view"),
  },
  status: must("#status"),
  toolbar: must("#toolbar"),
  chatPane: must("#chat"),
  armSlider: must<HTMLInputElement>("#arm"),
  armValue: must("#arm-value"),
  onAir: must<HTMLInputElement>("#on-air"),
  privateText: must<HTMLInputElement>("#private-text"),
  privateSend: must<HTMLButtonElement>("#private-send"),
  testAudio: must<HTMLButtonElement>("#test-audio"),
  cameraLabel: must("#camera-label"),
});
app.start();
window.addEventListener("beforeunload", () => app.shutdown());
