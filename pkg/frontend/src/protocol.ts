// Wire schema of the gateway: newline-delimited JSON, one object per line.
// The transport underneath (WebSocket bridge, TCP proxy, test fake) is an
// implementation choice; the schema here is the contract.

export type Mode = "NORMAL" | "FAST" | "FROZEN" | "REMOTE";

export interface DisplayMessage {
  type: "display";
  tod_ms: number;
  mode: Mode;
  peer_tz_offset?: number; // minutes east of UTC, present in REMOTE mode
}

export interface StepMessage {
  type: "step";
  ring: "MINUTE" | "HOUR";
  dir: "CW" | "CCW";
  steps: number;
}

export interface PresenceMessage {
  type: "presence";
  event: string;
  [key: string]: unknown;
}

export interface ErrorMessage {
  type: "error";
  error: string;
}

export type ServerMessage =
  | DisplayMessage
  | StepMessage
  | PresenceMessage
  | ErrorMessage;

export interface FacesMessage {
  type: "faces";
  count: number;
  t: number;
}

const MODES: readonly string[] = ["NORMAL", "FAST", "FROZEN", "REMOTE"];

/** Parse one line from the gateway. Returns null for anything that does not
 * match the schema; a flaky line must not take the page down. */
export function parseServerMessage(line: string): ServerMessage | null {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const m = obj as Record<string, unknown>;
  switch (m.type) {
    case "display":
      if (typeof m.tod_ms !== "number" || !MODES.includes(m.mode as string)) {
        return null;
      }
      return m as unknown as DisplayMessage;
    case "step":
      if (
        (m.ring !== "MINUTE" && m.ring !== "HOUR") ||
        (m.dir !== "CW" && m.dir !== "CCW") ||
        typeof m.steps !== "number"
      ) {
        return null;
      }
      return m as unknown as StepMessage;
    case "presence":
      if (typeof m.event !== "string") return null;
      return m as unknown as PresenceMessage;
    case "error":
      if (typeof m.error !== "string") return null;
      return m as unknown as ErrorMessage;
    default:
      return null;
  }
}

export function encodeFaces(count: number, t: number): string {
  if (!Number.isInteger(count) || count < 0) {
    throw new Error(`face count must be a non-negative integer, got ${count}`);
  }
  const msg: FacesMessage = { type: "faces", count, t };
  return JSON.stringify(msg);
}
