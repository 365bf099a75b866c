import { describe, expect, it } from "vitest";

import { encodeFaces, parseServerMessage } from "../src/protocol";

describe("parseServerMessage", () => {
  it("accepts display messages", () => {
    const msg = parseServerMessage(
      '{"mode":"REMOTE","peer_tz_offset":480,"tod_ms":10800000,"type":"display"}',
    );
    expect(msg).toEqual({
      type: "display",
      tod_ms: 10_800_000,
      mode: "REMOTE",
      peer_tz_offset: 480,
    });
  });

  it("accepts step, presence and error messages", () => {
    expect(
      parseServerMessage('{"type":"step","ring":"HOUR","dir":"CW","steps":4}'),
    ).toMatchObject({ ring: "HOUR", steps: 4 });
    expect(
      parseServerMessage('{"type":"presence","event":"SHOWING_ENTER","window_id":1}'),
    ).toMatchObject({ event: "SHOWING_ENTER" });
    expect(parseServerMessage('{"type":"error","error":"bad json"}'))
      .toMatchObject({ error: "bad json" });
  });

  it("rejects junk without throwing", () => {
    for (const line of [
      "",
      "not json",
      "42",
      "{}",
      '{"type":"display","tod_ms":"x","mode":"NORMAL"}',
      '{"type":"display","tod_ms":1,"mode":"WEIRD"}',
      '{"type":"step","ring":"SECOND","dir":"CW","steps":1}',
      '{"type":"mystery"}',
    ]) {
      expect(parseServerMessage(line)).toBeNull();
    }
  });
});

describe("encodeFaces", () => {
  it("produces the gateway's faces schema", () => {
    expect(JSON.parse(encodeFaces(2, 123))).toEqual({
      type: "faces",
      count: 2,
      t: 123,
    });
  });

  it("rejects invalid counts", () => {
    expect(() => encodeFaces(-1, 0)).toThrow();
    expect(() => encodeFaces(1.5, 0)).toThrow();
  });
});
