import { rgbToRgba } from "./protocol.js";
import { SpectatorPlayer, sendChat } from "./spectator.js";
function must(sel) {
    const el = document.querySelector(sel);
    if (!el)
        throw new Error(`missing element ${sel}`);
    return el;
}
const canvas = must("#view");
const statusEl = must("#status");
const latencyEl = must("#latency");
const chatText = must("#chat-text");
const chatSend = must("#chat-send");
const clientId = "spec-" + Math.random().toString(36).slice(2, 10);
const player = new SpectatorPlayer(location.origin, {
    draw(frame) {
        if (canvas.width !== frame.width || canvas.height !== frame.height) {
            canvas.width = frame.width;
            canvas.height = frame.height;
        }
        const ctx = canvas.getContext("2d");
        ctx?.putImageData(new ImageData(rgbToRgba(frame.payload, frame.width, frame.height), frame.width, frame.height), 0, 0);
    },
    status(text) {
        statusEl.textContent = text;
    },
    latency(seconds) {
        latencyEl.textContent = `${seconds.toFixed(1)} s behind live`;
    },
});
player.run().catch((e) => {
    statusEl.textContent = `player stopped: ${e}`;
});
const submit = () => {
    const text = chatText.value.trim();
    if (!text)
        return;
    chatText.value = "";
    sendChat(location.origin, clientId, text).catch((e) => {
        statusEl.textContent = `chat rejected: ${e}`;
    });
};
chatSend.onclick = submit;
chatText.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter")
        submit();
});
