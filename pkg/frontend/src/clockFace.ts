// Dial geometry and styling. Angles are recomputed from the latest display
// message alone; no clock logic lives in the browser.

import type { Mode } from "./protocol.js";

export const HALF_DAY_MS = 12 * 3_600_000;
const HOUR_MS = 3_600_000;

export interface RingAngles {
  minuteDeg: number;
  hourDeg: number;
}

export function ringAngles(todMs: number): RingAngles {
  const tod = ((todMs % HALF_DAY_MS) + HALF_DAY_MS) % HALF_DAY_MS;
  return {
    minuteDeg: ((tod % HOUR_MS) / HOUR_MS) * 360,
    hourDeg: (tod / HALF_DAY_MS) * 360,
  };
}

export function formatTod(todMs: number): string {
  const tod = ((todMs % HALF_DAY_MS) + HALF_DAY_MS) % HALF_DAY_MS;
  const h = Math.floor(tod / HOUR_MS);
  const m = Math.floor((tod % HOUR_MS) / 60000);
  const s = Math.floor((tod % 60000) / 1000);
  const pad = (n: number) => String(n).padStart(2, "0");
  return `${h === 0 ? 12 : h}:${pad(m)}:${pad(s)}`;
}

export interface DialStyle {
  handColor: string;
  dialTint: string | null; // fill behind the dial, REMOTE only
  greyed: boolean;
  badge: Mode | "OFFLINE";
  peerLabel: string | null;
}

export function formatTzOffset(minutes: number): string {
  const sign = minutes < 0 ? "-" : "+";
  const abs = Math.abs(minutes);
  const mm = abs % 60;
  return `UTC${sign}${Math.floor(abs / 60)}${mm ? ":" + String(mm).padStart(2, "0") : ""}`;
}

export function dialStyle(
  mode: Mode,
  connected: boolean,
  peerTzOffset?: number,
): DialStyle {
  if (!connected) {
    return { handColor: "#888", dialTint: null, greyed: true, badge: "OFFLINE", peerLabel: null };
  }
  const remote = mode === "REMOTE";
  return {
    handColor: "#c1121f", // the hands are red
    dialTint: remote ? "rgba(30,100,200,0.18)" : null,
    greyed: false,
    badge: mode,
    peerLabel: remote
      ? `peer ${peerTzOffset === undefined ? "" : formatTzOffset(peerTzOffset)}`.trim()
      : null,
  };
}
