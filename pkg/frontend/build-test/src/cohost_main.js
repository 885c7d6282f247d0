import { CohostConsole } from "./console.js";
function must(sel) {
    const el = document.querySelector(sel);
    if (!el)
        throw new Error(`missing element ${sel}`);
    return el;
}
const base = location.origin;
const app = new CohostConsole(base, {
    main: must("#main"),
    thumbs: {
        first_person: must("#thumb-first_person"),
        over_shoulder: must("#thumb-over_shoulder"),
        third_follow: must("#thumb-third_follow"),
        map_view: must("#thumb-map_view"),
    },
    status: must("#status"),
    toolbar: must("#toolbar"),
    chatPane: must("#chat"),
    armSlider: must("#arm"),
    armValue: must("#arm-value"),
    onAir: must("#on-air"),
    privateText: must("#private-text"),
    privateSend: must("#private-send"),
    testAudio: must("#test-audio"),
    cameraLabel: must("#camera-label"),
});
app.start();
window.addEventListener("beforeunload", () => app.shutdown());
