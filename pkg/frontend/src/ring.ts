/**
 * Bounded history of the normalized balance margin for the strip chart.
 *
 * Keeps a sliding window of samples relative to the newest timestamp and a
 * hard cap on count, so memory stays constant no matter how long the
 * session runs.  Sim time jumping backwards means the session was reset;
 * the history clears rather than drawing a fold in the trace.
 */

export interface DeltaSample {
  t: number;
  value: number;
}

export class DeltaHistory {
  readonly windowSeconds: number;
  readonly maxSamples: number;
  private samples: DeltaSample[] = [];

  constructor(windowSeconds = 10, maxSamples = 4096) {
    this.windowSeconds = windowSeconds;
    this.maxSamples = maxSamples;
  }

  push(t: number, value: number | null | undefined): void {
    if (value === null || value === undefined || Number.isNaN(value)) return;
    const last = this.samples[this.samples.length - 1];
    if (last !== undefined && t < last.t) this.samples = [];
    this.samples.push({ t, value });
    this.evict();
  }

  private evict(): void {
    const newest = this.samples[this.samples.length - 1];
    if (newest === undefined) return;
    const cutoff = newest.t - this.windowSeconds;
    let drop = 0;
    while (
      drop < this.samples.length - 1 &&
      (this.samples[drop]!.t < cutoff ||
        this.samples.length - drop > this.maxSamples)
    )
      drop += 1;
    if (drop > 0) this.samples = this.samples.slice(drop);
  }

  clear(): void {
    this.samples = [];
  }

  get length(): number {
    return this.samples.length;
  }

  get all(): readonly DeltaSample[] {
    return this.samples;
  }

  get newest(): DeltaSample | undefined {
    return this.samples[this.samples.length - 1];
  }

  get oldest(): DeltaSample | undefined {
    return this.samples[0];
  }
}
