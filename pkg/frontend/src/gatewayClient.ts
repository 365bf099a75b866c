// Connection state and message plumbing between the page and the gateway.
// The transport is injected so the same client runs over a WebSocket bridge
// in the browser and over a fake in tests.

import { dialStyle, DialStyle, ringAngles, RingAngles } from "./clockFace.js";
import {
  DisplayMessage,
  encodeFaces,
  parseServerMessage,
  ServerMessage,
} from "./protocol.js";

export interface LineTransport {
  send(line: string): void;
  onLine(cb: (line: string) => void): void;
  onClose(cb: () => void): void;
}

export interface UiState {
  connected: boolean;
  display: DisplayMessage | null;
  angles: RingAngles;
  style: DialStyle;
  localFaceCount: number;
  peerPresent: boolean;
  lastError: string | null;
  warning: string | null;
}

export function initialState(): UiState {
  return {
    connected: false,
    display: null,
    angles: { minuteDeg: 0, hourDeg: 0 },
    style: dialStyle("NORMAL", false),
    localFaceCount: 0,
    peerPresent: false,
    lastError: null,
    warning: null,
  };
}

/** Pure state transition for one server message. */
export function reduce(state: UiState, msg: ServerMessage): UiState {
  switch (msg.type) {
    case "display":
      return {
        ...state,
        connected: true,
        display: msg,
        angles: ringAngles(msg.tod_ms),
        style: dialStyle(msg.mode, true, msg.peer_tz_offset),
      };
    case "presence":
      if (msg.event === "PEER_HELLO" || msg.event === "SHOWING_ENTER") {
        return { ...state, peerPresent: true };
      }
      return state;
    case "error":
      return { ...state, lastError: msg.error };
    case "step":
      return state; // steps are informational; angles follow display messages
  }
}

export function disconnected(state: UiState): UiState {
  // disconnect holds no time semantics: the dial greys out and the next
  // display message alone restores a consistent state
  return { ...state, connected: false, style: dialStyle("NORMAL", false) };
}

export const MAX_FACES_HZ = 30;

export class GatewayClient {
  state: UiState = initialState();
  private listeners: Array<(s: UiState) => void> = [];
  private lastFacesSent = -Infinity;
  private lastT = -Infinity;

  constructor(
    private transport: LineTransport,
    private now: () => number = () => Date.now(),
  ) {
    transport.onLine((line) => {
      const msg = parseServerMessage(line);
      if (msg) this.apply((s) => reduce(s, msg));
    });
    transport.onClose(() => this.apply(disconnected));
  }

  onChange(cb: (s: UiState) => void): void {
    this.listeners.push(cb);
  }

  private apply(fn: (s: UiState) => UiState): void {
    this.state = fn(this.state);
    for (const cb of this.listeners) cb(this.state);
  }

  /** Forward a face count; drops sends that would exceed 30 Hz and keeps
   * timestamps strictly monotone. Returns true if sent. */
  reportFaces(count: number): boolean {
    const now = this.now();
    if (now - this.lastFacesSent < 1000 / MAX_FACES_HZ) return false;
    const t = Math.max(now, this.lastT + 1);
    this.transport.send(encodeFaces(count, t));
    this.lastFacesSent = now;
    this.lastT = t;
    this.apply((s) => ({ ...s, localFaceCount: count }));
    return true;
  }

  setWarning(text: string | null): void {
    this.apply((s) => ({ ...s, warning: text }));
  }
}
