import { describe, expect, it } from "vitest";

import { DeltaHistory } from "../src/ring.js";

describe("DeltaHistory", () => {
  it("starts empty", () => {
    const h = new DeltaHistory();
    expect(h.length).toBe(0);
    expect(h.newest).toBeUndefined();
    expect(h.oldest).toBeUndefined();
  });

  it("keeps only the trailing window", () => {
    const h = new DeltaHistory(10);
    for (let i = 0; i <= 600; i++) h.push(i * 0.05, Math.sin(i));
    expect(h.newest!.t).toBeCloseTo(30, 9);
    expect(h.oldest!.t).toBeGreaterThanOrEqual(h.newest!.t - 10);
    // 10 s at 20 Hz plus the boundary sample
    expect(h.length).toBeLessThanOrEqual(201);
    expect(h.length).toBeGreaterThan(190);
  });

  it("enforces the hard sample cap", () => {
    const h = new DeltaHistory(1e9, 50);
    for (let i = 0; i < 500; i++) h.push(i, i);
    expect(h.length).toBeLessThanOrEqual(50);
    expect(h.newest!.value).toBe(499);
  });

  it("clears itself when time runs backwards after a reset", () => {
    const h = new DeltaHistory(10);
    for (let i = 0; i < 100; i++) h.push(1 + i * 0.02, 0.5);
    expect(h.length).toBeGreaterThan(50);
    h.push(0.02, -0.1); // session reset: t dropped back near zero
    expect(h.length).toBe(1);
    expect(h.newest!.value).toBe(-0.1);
  });

  it("skips absent margins without breaking the trace", () => {
    const h = new DeltaHistory(10);
    h.push(0.1, 0.2);
    h.push(0.2, null);
    h.push(0.3, undefined);
    h.push(0.4, Number.NaN);
    h.push(0.5, 0.3);
    expect(h.length).toBe(2);
    expect(h.all.map((s) => s.value)).toEqual([0.2, 0.3]);
  });

  it("clear() empties the buffer", () => {
    const h = new DeltaHistory(10);
    h.push(1, 1);
    h.clear();
    expect(h.length).toBe(0);
  });
});
