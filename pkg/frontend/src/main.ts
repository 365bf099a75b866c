// Page wiring: webcam (or manual buttons) -> gateway -> canvas dial.
// The page talks to a WebSocket endpoint that bridges lines to the
// gateway's TCP port (e.g. `websocat --binary ws-l:0.0.0.0:7680 tcp:127.0.0.1:7600`).

import { dialStyle, formatTod, ringAngles } from "./clockFace.js";
import { GatewayClient, LineTransport, UiState } from "./gatewayClient.js";
import { ManualFaceSource, webcamFaceSource } from "./faceSource.js";

function wsTransport(url: string): LineTransport {
  const ws = new WebSocket(url);
  let lineCb: (line: string) => void = () => {};
  let closeCb: () => void = () => {};
  let buf = "";
  ws.onmessage = async (ev) => {
    buf += typeof ev.data === "string" ? ev.data : await ev.data.text();
    let nl;
    while ((nl = buf.indexOf("\n")) >= 0) {
      const line = buf.slice(0, nl);
      buf = buf.slice(nl + 1);
      if (line.trim()) lineCb(line);
    }
  };
  ws.onclose = () => closeCb();
  ws.onerror = () => closeCb();
  return {
    send: (line) => {
      if (ws.readyState === WebSocket.OPEN) ws.send(line + "\n");
    },
    onLine: (cb) => {
      lineCb = cb;
    },
    onClose: (cb) => {
      closeCb = cb;
    },
  };
}

function drawHand(ctx: CanvasRenderingContext2D, cx: number, cy: number,
                  deg: number, len: number, width: number, color: string) {
  const rad = ((deg - 90) * Math.PI) / 180;
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.lineTo(cx + len * Math.cos(rad), cy + len * Math.sin(rad));
  ctx.lineWidth = width;
  ctx.lineCap = "round";
  ctx.strokeStyle = color;
  ctx.stroke();
}

function render(canvas: HTMLCanvasElement, state: UiState) {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width: w, height: h } = canvas;
  const cx = w / 2, cy = h / 2, r = Math.min(w, h) / 2 - 8;
  ctx.clearRect(0, 0, w, h);
  const style = state.display
    ? dialStyle(state.display.mode, state.connected, state.display.peer_tz_offset)
    : dialStyle("NORMAL", false);

  ctx.beginPath();
  ctx.arc(cx, cy, r, 0, 2 * Math.PI);
  ctx.fillStyle = style.dialTint ?? (style.greyed ? "#eee" : "#fff");
  ctx.fill();
  ctx.lineWidth = 3;
  ctx.strokeStyle = style.greyed ? "#aaa" : "#222";
  ctx.stroke();
  for (let i = 0; i < 12; i++) {
    const a = (i * 30 * Math.PI) / 180;
    ctx.beginPath();
    ctx.arc(cx + 0.88 * r * Math.sin(a), cy - 0.88 * r * Math.cos(a),
            3, 0, 2 * Math.PI);
    ctx.fillStyle = style.greyed ? "#aaa" : "#222";
    ctx.fill();
  }

  const angles = state.display ? ringAngles(state.display.tod_ms)
                               : { minuteDeg: 0, hourDeg: 0 };
  drawHand(ctx, cx, cy, angles.hourDeg, 0.5 * r, 6, style.handColor);
  drawHand(ctx, cx, cy, angles.minuteDeg, 0.78 * r, 4, style.handColor);

  const badge = document.getElementById("badge");
  if (badge) {
    badge.textContent = style.badge + (style.peerLabel ? ` · ${style.peerLabel}` : "");
    badge.className = style.badge.toLowerCase();
  }
  const tod = document.getElementById("tod");
  if (tod) tod.textContent = state.display ? formatTod(state.display.tod_ms) : "--:--:--";
  const warn = document.getElementById("warning");
  if (warn) warn.textContent = state.warning ?? "";
  const conv = document.getElementById("conversation");
  if (conv) conv.style.display = state.localFaceCount >= 2 ? "inline" : "none";
}

export function boot() {
  const params = new URLSearchParams(location.search);
  const url = params.get("gateway") ?? `ws://${location.hostname}:7680`;
  const canvas = document.getElementById("dial") as HTMLCanvasElement;
  const client = new GatewayClient(wsTransport(url));
  client.onChange((s) => render(canvas, s));
  render(canvas, client.state);

  const manual = new ManualFaceSource((c) => client.reportFaces(c));
  for (const n of [0, 1, 2] as const) {
    document.getElementById(`faces-${n}`)?.addEventListener("click", () => {
      manual.select(n);
      client.setWarning(null);
    });
  }
  manual.start();

  const video = document.getElementById("camera") as HTMLVideoElement | null;
  if (video && navigator.mediaDevices) {
    navigator.mediaDevices
      .getUserMedia({ video: { width: 320, height: 240 } })
      .then((stream) => {
        video.srcObject = stream;
        void video.play();
        const cam = webcamFaceSource(video, (c) => client.reportFaces(c),
          () => client.setWarning("face detector failed; reporting 0"));
        if (cam) {
          manual.stop(); // camera takes over from the manual cadence
          cam.start();
        } else {
          client.setWarning("no FaceDetector in this browser; use the buttons");
        }
      })
      .catch(() => client.setWarning("no camera; use the buttons"));
  }
}

if (typeof document !== "undefined" && document.getElementById("dial")) {
  boot();
}
