/**
 * Canvas renderer for one orthographic pane: ground, support ellipse,
 * skeleton, contact points, center of mass, and draggable target handles.
 */

import type { EllipseDoc, HelloFrame, StateFrame, Vec3 } from "./protocol.js";
import { deltaColor, worldToScreen, type View } from "./view.js";

export const HANDLE_RADIUS_PX = 10;

const BG = "#1b1e24";
const BONE = "#c8cdd6";
const JOINT = "#8f96a3";
const GROUND = "#4a5160";
const CONTACT = "#e4b34a";
const HANDLE = "#5aa7e8";
const HANDLE_DISABLED = "#566070";

function drawEllipse(
  ctx: CanvasRenderingContext2D,
  view: View,
  ell: EllipseDoc,
): void {
  const c = worldToScreen(view, ell.center);
  ctx.save();
  ctx.strokeStyle = GROUND;
  ctx.fillStyle = "rgba(90, 110, 140, 0.18)";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  // screen y runs opposite to world y, so the plane angle flips sign
  ctx.ellipse(
    c.x,
    c.y,
    ell.axes[0] * view.scale,
    ell.axes[1] * view.scale,
    -ell.angle,
    0,
    2 * Math.PI,
  );
  ctx.fill();
  ctx.stroke();
  ctx.restore();
}

function drawGround(ctx: CanvasRenderingContext2D, view: View, width: number): void {
  const g = worldToScreen(view, [0, 0, 0]);
  ctx.strokeStyle = GROUND;
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(0, g.y);
  ctx.lineTo(width, g.y);
  ctx.stroke();
}

function drawSkeleton(
  ctx: CanvasRenderingContext2D,
  view: View,
  hello: HelloFrame,
  frame: StateFrame,
): void {
  const at = new Map<string, Vec3>();
  for (const j of frame.joints) at.set(j.name, j.pos);

  ctx.strokeStyle = BONE;
  ctx.lineWidth = 2.5;
  ctx.lineCap = "round";
  for (const seg of hello.segments) {
    if (seg.parent === null) continue;
    const a = at.get(seg.parent);
    const b = at.get(seg.name);
    if (a === undefined || b === undefined) continue;
    const sa = worldToScreen(view, a);
    const sb = worldToScreen(view, b);
    ctx.beginPath();
    ctx.moveTo(sa.x, sa.y);
    ctx.lineTo(sb.x, sb.y);
    ctx.stroke();
  }

  ctx.fillStyle = JOINT;
  for (const j of frame.joints) {
    const s = worldToScreen(view, j.pos);
    ctx.beginPath();
    ctx.arc(s.x, s.y, 3, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawContacts(
  ctx: CanvasRenderingContext2D,
  view: View,
  frame: StateFrame,
): void {
  ctx.strokeStyle = CONTACT;
  ctx.lineWidth = 1.5;
  for (const c of frame.contacts) {
    const s = worldToScreen(view, c);
    ctx.beginPath();
    ctx.moveTo(s.x - 4, s.y - 4);
    ctx.lineTo(s.x + 4, s.y + 4);
    ctx.moveTo(s.x - 4, s.y + 4);
    ctx.lineTo(s.x + 4, s.y - 4);
    ctx.stroke();
  }
}

function drawCom(
  ctx: CanvasRenderingContext2D,
  view: View,
  frame: StateFrame,
): void {
  const s = worldToScreen(view, frame.com);
  if (view.kind === "front") {
    const g = worldToScreen(view, [frame.com[0], frame.com[1], 0]);
    ctx.strokeStyle = "rgba(200, 205, 214, 0.35)";
    ctx.lineWidth = 1;
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(s.x, s.y);
    ctx.lineTo(g.x, g.y);
    ctx.stroke();
    ctx.setLineDash([]);
  }
  ctx.fillStyle = deltaColor(frame.delta);
  ctx.beginPath();
  ctx.arc(s.x, s.y, 6, 0, 2 * Math.PI);
  ctx.fill();
  ctx.strokeStyle = "#0d0f12";
  ctx.lineWidth = 1.5;
  ctx.stroke();
}

function drawHandles(
  ctx: CanvasRenderingContext2D,
  view: View,
  frame: StateFrame,
  dragging: string | null,
): void {
  for (const [task, doc] of Object.entries(frame.targets)) {
    const s = worldToScreen(view, doc.pos);
    const r = task === dragging ? HANDLE_RADIUS_PX : HANDLE_RADIUS_PX - 3;
    ctx.strokeStyle = doc.enabled ? HANDLE : HANDLE_DISABLED;
    ctx.lineWidth = task === dragging ? 3 : 2;
    ctx.strokeRect(s.x - r, s.y - r, 2 * r, 2 * r);
    if (doc.enabled) {
      ctx.fillStyle = "rgba(90, 167, 232, 0.25)";
      ctx.fillRect(s.x - r, s.y - r, 2 * r, 2 * r);
    }
    ctx.fillStyle = "#b9c2cf";
    ctx.font = "10px system-ui, sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "top";
    ctx.fillText(task, s.x, s.y + r + 3);
  }
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  view: View,
  hello: HelloFrame,
  frame: StateFrame,
  dragging: string | null,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = BG;
  ctx.fillRect(0, 0, width, height);

  ctx.fillStyle = "#70778355";
  ctx.font = "11px system-ui, sans-serif";
  ctx.textAlign = "left";
  ctx.textBaseline = "top";
  ctx.fillText(view.kind, 8, 8);

  const ell = frame.ellipse ?? hello.ellipse;
  if (view.kind === "top") {
    if (ell !== null) drawEllipse(ctx, view, ell);
  } else {
    drawGround(ctx, view, width);
  }

  drawSkeleton(ctx, view, hello, frame);
  drawContacts(ctx, view, frame);
  drawCom(ctx, view, frame);
  drawHandles(ctx, view, frame, dragging);
}
