import { describe, expect, it } from "vitest";

import { encodeMessage, parseFrame } from "../src/protocol.js";
import {
  errorRaw,
  hello,
  helloRaw,
  stateBalanced,
  stateBalancedRaw,
  stateTipped,
} from "./fixtures.js";

describe("parseFrame on captured frames", () => {
  it("parses the hello frame", () => {
    const f = parseFrame(helloRaw);
    expect(f).not.toBeNull();
    expect(f!.type).toBe("hello");
    expect(hello.protocol).toBe(1);
    expect(hello.scenario).toBe("giant_to_dwarf");
    expect(hello.steering).toBe(true);
    expect(hello.timestep).toBeCloseTo(0.005, 12);
    expect(hello.tasks).toEqual(["left_hand", "right_hand"]);
    expect(hello.guides).toEqual([]);
    expect(hello.segments).toHaveLength(13);
    expect(hello.segments[0]).toEqual({ name: "pelvis", parent: null });
    expect(hello.planes).toHaveLength(1);
    expect(hello.planes[0]!.normal).toEqual([0, 0, 1]);
  });

  it("reports the ellipse with the major axis first", () => {
    const ell = hello.ellipse;
    expect(ell).not.toBeNull();
    expect(ell!.axes[0]).toBeGreaterThanOrEqual(ell!.axes[1]);
    expect(ell!.axes[1]).toBeGreaterThan(0);
    expect(ell!.d).toBeCloseTo(ell!.axes[0], 6);
  });

  it("parses a balanced state frame", () => {
    expect(stateBalanced.type).toBe("state");
    expect(stateBalanced.joints).toHaveLength(13);
    expect(stateBalanced.contacts).toHaveLength(8);
    expect(stateBalanced.balance).toBe(true);
    expect(stateBalanced.delta).toBeGreaterThan(0);
    expect(Object.keys(stateBalanced.targets).sort()).toEqual([
      "left_hand",
      "right_hand",
    ]);
    expect(stateBalanced.targets["left_hand"]!.enabled).toBe(true);
  });

  it("parses a tipped state frame with a negative margin", () => {
    expect(stateTipped.type).toBe("state");
    expect(stateTipped.balance).toBe(false);
    expect(stateTipped.delta).toBeLessThan(0);
    expect(stateTipped.delta_norm).toBeLessThan(0);
  });

  it("parses an error frame", () => {
    const f = parseFrame(errorRaw);
    expect(f).toEqual({ type: "error", message: "frame is not valid JSON" });
  });
});

describe("parseFrame on malformed input", () => {
  const bad = [
    "not json at all",
    "[1, 2, 3]",
    "42",
    "{}",
    '{"type": "weird"}',
    '{"type": 7}',
    '{"type": "error"}',
    '{"type": "hello", "protocol": "one"}',
    stateBalancedRaw.slice(0, 100),
  ];
  for (const text of bad) {
    it(`rejects ${JSON.stringify(text.slice(0, 32))}`, () => {
      expect(parseFrame(text)).toBeNull();
    });
  }

  it("rejects a state frame with a mangled joint", () => {
    const doc = JSON.parse(stateBalancedRaw);
    doc.joints[0].quat = [1, 0, 0];
    expect(parseFrame(JSON.stringify(doc))).toBeNull();
  });

  it("rejects a state frame with a non-numeric com", () => {
    const doc = JSON.parse(stateBalancedRaw);
    doc.com = ["a", "b", "c"];
    expect(parseFrame(JSON.stringify(doc))).toBeNull();
  });
});

describe("forward compatibility", () => {
  it("ignores unknown fields on known frame types", () => {
    const doc = JSON.parse(stateBalancedRaw);
    doc.extra = { anything: [1, 2, 3] };
    doc.mood = "fine";
    const f = parseFrame(JSON.stringify(doc));
    expect(f).not.toBeNull();
    expect(f!.type).toBe("state");
    expect(f).not.toHaveProperty("extra");
  });

  it("accepts a null ellipse", () => {
    const doc = JSON.parse(stateBalancedRaw);
    doc.ellipse = null;
    const f = parseFrame(JSON.stringify(doc));
    expect(f).not.toBeNull();
    expect((f as { ellipse: unknown }).ellipse).toBeNull();
  });
});

describe("encodeMessage", () => {
  it("produces wire-shaped client messages", () => {
    expect(JSON.parse(encodeMessage({ type: "reset" }))).toEqual({
      type: "reset",
    });
    expect(
      JSON.parse(
        encodeMessage({ type: "set_target", task: "left_hand", pos: [1, 2, 3] }),
      ),
    ).toEqual({ type: "set_target", task: "left_hand", pos: [1, 2, 3] });
    expect(
      JSON.parse(encodeMessage({ type: "toggle", what: "balance", on: false })),
    ).toEqual({ type: "toggle", what: "balance", on: false });
  });
});
