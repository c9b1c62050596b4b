import { describe, expect, it } from "vitest";

import { TargetCoalescer } from "../src/coalesce.js";
import type { ClientMessage } from "../src/protocol.js";

function collect(c: TargetCoalescer): ClientMessage[] {
  const out: ClientMessage[] = [];
  c.flush((m) => out.push(m));
  return out;
}

describe("TargetCoalescer", () => {
  it("sends nothing when idle", () => {
    const c = new TargetCoalescer();
    expect(c.dirty).toBe(false);
    expect(collect(c)).toEqual([]);
  });

  it("collapses a burst of pointer moves into one message with the last position", () => {
    const c = new TargetCoalescer();
    for (let i = 0; i <= 50; i++) c.set("left_hand", [0.4 + i * 0.01, 0.15, 0.8]);
    const sent = collect(c);
    expect(sent).toHaveLength(1);
    expect(sent[0]).toEqual({
      type: "set_target",
      task: "left_hand",
      pos: [0.9, 0.15, 0.8],
    });
  });

  it("keeps one pending message per control", () => {
    const c = new TargetCoalescer();
    c.set("left_hand", [0.5, 0.15, 0.8]);
    c.set("right_hand", [0.5, -0.15, 0.8]);
    c.set("left_hand", [0.6, 0.15, 0.8]);
    const sent = collect(c);
    expect(sent).toHaveLength(2);
    const byTask = new Map(
      sent.map((m) => [m.type === "set_target" ? m.task : "", m]),
    );
    expect(byTask.get("left_hand")).toMatchObject({ pos: [0.6, 0.15, 0.8] });
    expect(byTask.get("right_hand")).toMatchObject({ pos: [0.5, -0.15, 0.8] });
  });

  it("is empty after a flush, so each tick sends at most one per control", () => {
    const c = new TargetCoalescer();
    c.set("left_hand", [0.5, 0.15, 0.8]);
    expect(collect(c)).toHaveLength(1);
    expect(c.dirty).toBe(false);
    expect(collect(c)).toHaveLength(0);
  });

  it("clear() drops pending drags without sending", () => {
    const c = new TargetCoalescer();
    c.set("left_hand", [0.5, 0.15, 0.8]);
    c.clear();
    expect(collect(c)).toEqual([]);
  });
});
