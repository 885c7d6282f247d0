/**
 * Co-host console: joins as the single co-host over the signaling socket,
 * renders the live media stream, and turns toolbar gestures into commands.
 * All session state shown here is server-echoed; the console never mutates
 * anything locally.
 */

import {
  CAMERA_NAMES,
  ChatMessage,
  FLAG_AUDIO,
  FLAG_THUMBNAIL,
  Gesture,
  ToolName,
  commandBody,
  commandForTool,
  decodeRecord,
  rgbToRgba,
} from "./protocol.js";

interface ConsoleElements {
  main: HTMLCanvasElement;
  thumbs: Record<string, HTMLCanvasElement>;
  status: HTMLElement;
  toolbar: HTMLElement;
  chatPane: HTMLElement;
  armSlider: HTMLInputElement;
  armValue: HTMLElement;
  onAir: HTMLInputElement;
  privateText: HTMLInputElement;
  privateSend: HTMLButtonElement;
  testAudio: HTMLButtonElement;
  cameraLabel: HTMLElement;
}

export class CohostConsole {
  private token: string | null = null;
  private signal: WebSocket | null = null;
  private media: WebSocket | null = null;
  private chat: WebSocket | null = null;
  private activeTool: ToolName = "place_target";
  private gesture: Gesture | null = null;
  private retryMs = 500;
  private armTimer: number | null = null;
  private keysDown = new Set<string>();
  private freeCamTimer: number | null = null;
  private closing = false;

  constructor(private base: string, private el: ConsoleElements) {}

  start(): void {
    this.buildToolbar();
    this.bindGestures();
    this.bindControls();
    this.connect();
  }

  private wsUrl(path: string): string {
    return this.base.replace(/^http/, "ws") + path;
  }

  private setStatus(text: string, cls = ""): void {
    this.el.status.textContent = text;
    this.el.status.className = "status " + cls;
  }

  // ------------------------------------------------------------ signaling

  private connect(): void {
    this.setStatus("connecting…");
    const ws = new WebSocket(this.wsUrl("/signal"));
    this.signal = ws;
    ws.onopen = () => {
      ws.send(JSON.stringify({ type: "join", role: "co_host", client_id: clientId() }));
    };
    ws.onmessage = (ev) => {
      const msg = JSON.parse(ev.data as string);
      if (msg.type === "role_assigned") {
        this.token = msg.session_token;
        this.retryMs = 500;
        this.setStatus("co-host connected", "ok");
        ws.send(JSON.stringify({ type: "offer", blob: "console-offer-" + clientId() }));
      } else if (msg.type === "answer") {
        this.openMedia();
        this.openChat();
      } else if (msg.type === "rejected") {
        if (msg.reason === "role_taken") {
          this.setStatus("co-host slot occupied — retrying", "warn");
        } else {
          this.setStatus(`rejected: ${msg.reason}`, "warn");
        }
      }
    };
    ws.onclose = () => {
      if (this.closing) return;
      this.token = null;
      this.setStatus(`reconnecting in ${this.retryMs} ms…`, "warn");
      window.setTimeout(() => this.connect(), this.retryMs);
      this.retryMs = Math.min(this.retryMs * 2, 8000);
    };
  }

  private openMedia(): void {
    if (!this.token) return;
    const ws = new WebSocket(this.wsUrl(`/media?token=${this.token}`));
    ws.binaryType = "arraybuffer";
    this.media = ws;
    ws.onmessage = async (ev) => {
      const data = new Uint8Array(ev.data as ArrayBuffer);
      try {
        const { record } = await decodeRecord(data);
        if (record.flags & FLAG_AUDIO) return;
        const name = CAMERA_NAMES[record.cameraId] ?? "free";
        if (record.flags & FLAG_THUMBNAIL) {
          const canvas = this.el.thumbs[name];
          if (canvas) drawRgb(canvas, record.width, record.height, record.payload);
        } else {
          drawRgb(this.el.main, record.width, record.height, record.payload);
          this.el.cameraLabel.textContent = name.replace("_", " ");
        }
      } catch (e) {
        console.warn("record decode failed", e);
      }
    };
    ws.onclose = () => {
      if (!this.closing && this.token) window.setTimeout(() => this.openMedia(), 1000);
    };
  }

  private openChat(): void {
    const ws = new WebSocket(this.wsUrl("/chat"));
    this.chat = ws;
    ws.onmessage = (ev) => {
      const event = JSON.parse(ev.data as string);
      if (event.event === "backlog") {
        this.el.chatPane.innerHTML = "";
        for (const m of event.messages as ChatMessage[]) this.appendChat(m);
      } else if (event.event === "message") {
        this.appendChat(event as unknown as ChatMessage);
      } else if (event.event === "relayed") {
        const row = this.el.chatPane.querySelector(`[data-msg="${event.msg_id}"]`);
        row?.classList.add("relayed");
        const btn = row?.querySelector("button");
        if (btn) btn.disabled = true;
      }
    };
    ws.onclose = () => {
      if (!this.closing && this.token) window.setTimeout(() => this.openChat(), 1000);
    };
  }

  private appendChat(m: ChatMessage): void {
    const row = document.createElement("div");
    row.className = "chat-row" + (m.relayed ? " relayed" : "");
    row.dataset.msg = String(m.msg_id);
    const text = document.createElement("span");
    text.textContent = `${m.sender}: ${m.text}`;
    const relay = document.createElement("button");
    relay.textContent = "Relay";
    relay.disabled = m.relayed;
    relay.onclick = () => void this.send("relay_chat", { msg_id: m.msg_id });
    row.append(text, relay);
    this.el.chatPane.append(row);
    this.el.chatPane.scrollTop = this.el.chatPane.scrollHeight;
  }

  // ------------------------------------------------------------- commands

  async send(cmd: string, params: Record<string, unknown>): Promise<void> {
    if (!this.token) return;
    await this.post(commandBody(this.token, cmd, params));
  }

  private async post(body: string): Promise<void> {
    const r = await fetch(`${this.base}/api/command`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body,
    });
    const res = await r.json();
    if (!res.ok) {
      this.toast(res.error ?? "command rejected");
    } else if (res.result?.rejected) {
      this.toast(`no effect: ${res.result.reason ?? "rejected"}`);
    }
  }

  private toast(text: string): void {
    this.setStatus(text, "warn");
    window.setTimeout(() => {
      if (this.token) this.setStatus("co-host connected", "ok");
    }, 2500);
  }

  // ---------------------------------------------------------------- tools

  private buildToolbar(): void {
    const labels: Record<ToolName, string> = {
      select_object: "Select object",
      annotate_vr: "Annotate (VR)",
      annotate_spec: "Annotate (Spec.)",
      annotate_windowed: "Annotate windowed",
      place_target: "Place target",
      remove_windowed: "Remove windowed",
      remove_all_annotations: "Remove all annotations",
      remove_targets: "Remove targets",
    };
    for (const tool of Object.keys(labels) as ToolName[]) {
      const btn = document.createElement("button");
      btn.textContent = labels[tool];
      btn.dataset.tool = tool;
      btn.onclick = () => {
        if (tool.startsWith("remove_")) {
          void this.send(tool, {});
          return;
        }
        this.activeTool = tool;
        this.el.toolbar.querySelectorAll("button").forEach((b) => b.classList.remove("active"));
        btn.classList.add("active");
      };
      if (tool === this.activeTool) btn.classList.add("active");
      this.el.toolbar.append(btn);
    }
  }

  private canvasPoint(ev: PointerEvent): [number, number] {
    const rect = this.el.main.getBoundingClientRect();
    const x = Math.round(((ev.clientX - rect.left) / rect.width) * this.el.main.width);
    const y = Math.round(((ev.clientY - rect.top) / rect.height) * this.el.main.height);
    return [
      Math.max(0, Math.min(this.el.main.width - 1, x)),
      Math.max(0, Math.min(this.el.main.height - 1, y)),
    ];
  }

  private bindGestures(): void {
    const canvas = this.el.main;
    canvas.addEventListener("pointerdown", (ev) => {
      this.gesture = { points: [this.canvasPoint(ev)] };
      canvas.setPointerCapture(ev.pointerId);
    });
    canvas.addEventListener("pointermove", (ev) => {
      if (!this.gesture) return;
      const p = this.canvasPoint(ev);
      const last = this.gesture.points[this.gesture.points.length - 1];
      if (p[0] !== last[0] || p[1] !== last[1]) this.gesture.points.push(p);
    });
    canvas.addEventListener("pointerup", () => {
      if (!this.gesture || !this.token) {
        this.gesture = null;
        return;
      }
      const gesture = this.gesture;
      this.gesture = null;
      const drag = gesture.points.length >= 2;
      const tool = this.activeTool;
      if ((tool === "annotate_vr" || tool === "annotate_spec" || tool === "annotate_windowed") && !drag) {
        return; // annotations need a drag
      }
      void this.post(commandForTool(this.token, tool, gesture));
    });
  }

  // ------------------------------------------------------------- controls

  private bindControls(): void {
    for (const [name, canvas] of Object.entries(this.el.thumbs)) {
      canvas.addEventListener("click", () => void this.send("switch_camera", { mode: name }));
    }
    this.el.armSlider.addEventListener("input", () => {
      this.el.armValue.textContent = this.el.armSlider.value;
      if (this.armTimer !== null) window.clearTimeout(this.armTimer);
      this.armTimer = window.setTimeout(() => {
        void this.send("set_arm", { value: Number(this.el.armSlider.value) });
      }, 100);
    });
    this.el.onAir.addEventListener("change", () => {
      void this.send("set_on_air", { value: this.el.onAir.checked });
    });
    const sendPrivate = () => {
      const text = this.el.privateText.value.trim();
      if (!text) return;
      void this.send("send_private_text", { text });
      this.el.privateText.value = "";
    };
    this.el.privateSend.onclick = sendPrivate;
    this.el.privateText.addEventListener("keydown", (ev) => {
      if (ev.key === "Enter") sendPrivate();
    });
    this.el.testAudio.onclick = async () => {
      if (!this.token) return;
      await fetch(`${this.base}/api/audio`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ token: this.token, payload_b64: "dGVzdC1hdWRpbw==" }),
      });
    };
    window.addEventListener("keydown", (ev) => {
      if (document.activeElement === this.el.privateText) return;
      this.keysDown.add(ev.key.toLowerCase());
      this.ensureFreeCamLoop();
    });
    window.addEventListener("keyup", (ev) => this.keysDown.delete(ev.key.toLowerCase()));
  }

  private ensureFreeCamLoop(): void {
    if (this.freeCamTimer !== null) return;
    const tick = () => {
      const k = this.keysDown;
      const forward = (k.has("w") ? 1 : 0) - (k.has("s") ? 1 : 0);
      const right = (k.has("d") ? 1 : 0) - (k.has("a") ? 1 : 0);
      const up = (k.has("e") ? 1 : 0) - (k.has("q") ? 1 : 0);
      if (forward || right || up) {
        void this.send("free_cam_input", { forward, right, up, dt: 0.05 });
      } else {
        if (this.freeCamTimer !== null) window.clearInterval(this.freeCamTimer);
        this.freeCamTimer = null;
      }
    };
    this.freeCamTimer = window.setInterval(tick, 50);
  }

  shutdown(): void {
    this.closing = true;
    this.signal?.close();
    this.media?.close();
    this.chat?.close();
  }
}

function drawRgb(canvas: HTMLCanvasElement, width: number, height: number, rgb: Uint8Array): void {
  if (canvas.width !== width || canvas.height !== height) {
    canvas.width = width;
    canvas.height = height;
  }
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.putImageData(new ImageData(rgbToRgba(rgb, width, height), width, height), 0, 0);
}

function clientId(): string {
  const key = "funnel-cohost-id";
  let id = sessionStorage.getItem(key);
  if (!id) {
    id = "co-" + Math.random().toString(36).slice(2, 10);
    sessionStorage.setItem(key, id);
  }
  return id;
}
