/**
 * Strip chart of the normalized balance margin over the last few seconds.
 * Positive is safe, negative means the ground reaction demand left the
 * support ellipse, so the zero line is the anchor of the plot.
 */

import type { DeltaHistory } from "./ring.js";
import { COLOR_BALANCED, COLOR_UNBALANCED } from "./view.js";

const MARGIN = { left: 44, right: 8, top: 8, bottom: 18 };

export function drawDeltaChart(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  history: DeltaHistory,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#14161a";
  ctx.fillRect(0, 0, width, height);

  const x0 = MARGIN.left;
  const x1 = width - MARGIN.right;
  const y0 = MARGIN.top;
  const y1 = height - MARGIN.bottom;

  // symmetric y range around zero, never collapsing to a zero span
  let span = 0.02;
  for (const s of history.all) span = Math.max(span, Math.abs(s.value));
  span *= 1.1;

  const yOf = (v: number) => y1 - ((v + span) / (2 * span)) * (y1 - y0);

  ctx.strokeStyle = "#3a3f47";
  ctx.lineWidth = 1;
  ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);

  // zero line
  ctx.strokeStyle = "#6a717c";
  ctx.beginPath();
  ctx.moveTo(x0, yOf(0));
  ctx.lineTo(x1, yOf(0));
  ctx.stroke();

  ctx.fillStyle = "#9aa1ab";
  ctx.font = "11px system-ui, sans-serif";
  ctx.textAlign = "right";
  ctx.textBaseline = "middle";
  ctx.fillText("0", x0 - 4, yOf(0));
  ctx.fillText(span.toPrecision(2), x0 - 4, y0 + 4);
  ctx.fillText((-span).toPrecision(2), x0 - 4, y1 - 4);

  const newest = history.newest;
  if (newest === undefined) {
    ctx.textAlign = "center";
    ctx.fillText("no data", (x0 + x1) / 2, (y0 + y1) / 2);
    return;
  }

  const tMax = newest.t;
  const tMin = tMax - history.windowSeconds;
  const xOf = (t: number) => x0 + ((t - tMin) / history.windowSeconds) * (x1 - x0);

  ctx.textAlign = "center";
  ctx.textBaseline = "top";
  ctx.fillText(`${tMax.toFixed(1)} s`, x1 - 16, y1 + 4);

  ctx.lineWidth = 1.5;
  ctx.strokeStyle = newest.value >= 0 ? COLOR_BALANCED : COLOR_UNBALANCED;
  ctx.beginPath();
  let first = true;
  for (const s of history.all) {
    const px = xOf(s.t);
    const py = yOf(s.value);
    if (first) {
      ctx.moveTo(px, py);
      first = false;
    } else {
      ctx.lineTo(px, py);
    }
  }
  ctx.stroke();
}
