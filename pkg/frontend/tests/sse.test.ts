import { describe, expect, it } from "vitest";

import { parseFrames } from "../src/sse.js";
import type { SessionEvent } from "../src/types.js";

function frame(seq: number, kind = "ping"): string {
  return `id: ${seq}\ndata: {"seq": ${seq}, "kind": "${kind}", "payload": {}}\n\n`;
}

describe("parseFrames", () => {
  it("emits complete frames and keeps the remainder", () => {
    const got: SessionEvent[] = [];
    const rest = parseFrames(frame(1) + frame(2) + "id: 3\ndata: {\"seq\"", (e) => got.push(e));
    expect(got.map((e) => e.seq)).toEqual([1, 2]);
    expect(rest).toContain("id: 3");
  });

  it("handles frames split across chunk boundaries", () => {
    const full = frame(1) + frame(2);
    const got: SessionEvent[] = [];
    let buffer = "";
    for (const chunk of [full.slice(0, 17), full.slice(17, 40), full.slice(40)]) {
      buffer += chunk;
      buffer = parseFrames(buffer, (e) => got.push(e));
    }
    expect(got.map((e) => e.seq)).toEqual([1, 2]);
  });

  it("ignores non-data lines", () => {
    const got: SessionEvent[] = [];
    const rest = parseFrames(": keepalive\n\n" + frame(5), (e) => got.push(e));
    expect(got.map((e) => e.seq)).toEqual([5]);
    expect(rest).toBe("");
  });
});
