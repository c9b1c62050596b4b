/**
 * Orthographic view mapping between world and screen coordinates.
 *
 * World frame: x forward, y left, z up.  Screen frame: x right, y down.
 * The front view projects onto the x-z plane, the top view onto the x-y
 * plane, so a drag in either view moves the target only within that view's
 * plane; the out-of-plane coordinate is carried over unchanged.
 */

import type { StateFrame, Vec3 } from "./protocol.js";

export type ViewKind = "front" | "top";

export interface View {
  kind: ViewKind;
  /** Pixels per meter. */
  scale: number;
  /** Screen x of the world origin. */
  originX: number;
  /** Screen y of the world origin. */
  originY: number;
}

export interface ScreenPoint {
  x: number;
  y: number;
}

export function worldToScreen(view: View, p: Vec3): ScreenPoint {
  const up = view.kind === "front" ? p[2] : p[1];
  return {
    x: view.originX + view.scale * p[0],
    y: view.originY - view.scale * up,
  };
}

/**
 * Invert the projection at a screen point.  The view plane fixes two world
 * coordinates; the third is taken from `current` so dragging never moves a
 * target out of the plane being looked at.
 */
export function screenToWorld(
  view: View,
  sx: number,
  sy: number,
  current: Vec3,
): Vec3 {
  const a = (sx - view.originX) / view.scale;
  const b = (view.originY - sy) / view.scale;
  if (view.kind === "front") return [a, current[1], b];
  return [a, b, current[2]];
}

export const COLOR_BALANCED = "#2e9e4f";
export const COLOR_UNBALANCED = "#d83a31";
export const COLOR_UNKNOWN = "#8a8f98";

/** Green when the margin is non-negative, red otherwise, gray when absent. */
export function deltaColor(delta: number | null | undefined): string {
  if (delta === null || delta === undefined || Number.isNaN(delta))
    return COLOR_UNKNOWN;
  return delta >= 0 ? COLOR_BALANCED : COLOR_UNBALANCED;
}

/**
 * Nearest enabled target handle within `radiusPx` of a screen point, or
 * null when nothing is close enough to grab.
 */
export function pickHandle(
  view: View,
  frame: StateFrame,
  sx: number,
  sy: number,
  radiusPx: number,
): string | null {
  let best: string | null = null;
  let bestD2 = radiusPx * radiusPx;
  for (const [task, doc] of Object.entries(frame.targets)) {
    if (!doc.enabled) continue;
    const s = worldToScreen(view, doc.pos);
    const d2 = (s.x - sx) ** 2 + (s.y - sy) ** 2;
    if (d2 <= bestD2) {
      bestD2 = d2;
      best = task;
    }
  }
  return best;
}

/**
 * Fit a fixed world window into a canvas.  The window is sized for a
 * human-scale avatar standing near the origin; both views share the x
 * extent so the two panes scroll together horizontally.
 */
export function fitView(
  kind: ViewKind,
  widthPx: number,
  heightPx: number,
): View {
  const xHalf = 1.1;
  const upMin = kind === "front" ? -0.15 : -1.1;
  const upMax = kind === "front" ? 2.0 : 1.1;
  const scale = Math.min(widthPx / (2 * xHalf), heightPx / (upMax - upMin));
  return {
    kind,
    scale,
    originX: widthPx / 2,
    // center the window vertically; up axis grows toward the canvas top
    originY: heightPx / 2 + scale * ((upMin + upMax) / 2),
  };
}
