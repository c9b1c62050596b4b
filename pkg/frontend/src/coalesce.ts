/**
 * Per-control outbound rate limiting.
 *
 * Pointer-move events arrive far faster than frames render.  The coalescer
 * keeps only the latest dragged position per task and emits at most one
 * set_target per task per flush, and flush runs once per animation tick.
 */

import type { ClientMessage, Vec3 } from "./protocol.js";

export class TargetCoalescer {
  private pending = new Map<string, Vec3>();

  /** Record the latest dragged position for a task, replacing any earlier one. */
  set(task: string, pos: Vec3): void {
    this.pending.set(task, pos);
  }

  /** True when a flush would send something. */
  get dirty(): boolean {
    return this.pending.size > 0;
  }

  /**
   * Emit one set_target per pending task through `send`, newest position
   * only, then forget them.  Returns the number of messages sent.
   */
  flush(send: (msg: ClientMessage) => void): number {
    let n = 0;
    for (const [task, pos] of this.pending) {
      send({ type: "set_target", task, pos });
      n += 1;
    }
    this.pending.clear();
    return n;
  }

  clear(): void {
    this.pending.clear();
  }
}
