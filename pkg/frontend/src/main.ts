/**
 * Application wiring: one WebSocket client, two orthographic panes, a
 * margin strip chart, and pointer-drag steering.  Everything runs on the
 * browser event loop; the only background activity is the socket itself.
 *
 * The sole configuration knob is the server URL (input box, or ?url=...).
 */

import { SteerClient, type ClientStatus } from "./client.js";
import { TargetCoalescer } from "./coalesce.js";
import { drawDeltaChart } from "./chart.js";
import type { HelloFrame, StateFrame } from "./protocol.js";
import { DeltaHistory } from "./ring.js";
import { drawScene, HANDLE_RADIUS_PX } from "./render.js";
import {
  fitView,
  pickHandle,
  screenToWorld,
  type View,
  type ViewKind,
} from "./view.js";

const DEFAULT_URL = "ws://127.0.0.1:8765";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const urlInput = el<HTMLInputElement>("url");
const connectBtn = el<HTMLButtonElement>("connect");
const banner = el<HTMLDivElement>("banner");
const togglesDiv = el<HTMLDivElement>("toggles");
const frontCanvas = el<HTMLCanvasElement>("front");
const topCanvas = el<HTMLCanvasElement>("top");
const chartCanvas = el<HTMLCanvasElement>("chart");

let client: SteerClient | null = null;
let hello: HelloFrame | null = null;
let frame: StateFrame | null = null;
let status: ClientStatus = "closed";
let dragging: { task: string; view: View } | null = null;
let bannerNote = "";
let bannerUntil = 0;

const history = new DeltaHistory(10);
const coalescer = new TargetCoalescer();
const guideOn = new Map<string, boolean>();

function note(text: string, seconds = 3): void {
  bannerNote = text;
  bannerUntil = performance.now() + seconds * 1000;
}

function statusText(): string {
  if (performance.now() < bannerUntil && bannerNote !== "") return bannerNote;
  switch (status) {
    case "connecting":
      return "connecting...";
    case "closed":
      return "disconnected: steering disabled";
    case "open":
      return hello === null
        ? "connected, waiting for hello"
        : `${hello.scenario} @ ${(1 / hello.timestep).toFixed(0)} Hz` +
            (hello.steering ? "" : " (read-only: another client steers)");
  }
}

function canSteer(): boolean {
  return status === "open" && hello !== null && hello.steering;
}

function rebuildToggles(): void {
  togglesDiv.textContent = "";
  if (hello === null) return;

  const balanceBtn = document.createElement("button");
  balanceBtn.id = "toggle-balance";
  balanceBtn.onclick = () => {
    if (frame === null || client === null) return;
    client.send({ type: "toggle", what: "balance", on: !frame.balance });
  };
  togglesDiv.appendChild(balanceBtn);

  for (const g of hello.guides) {
    if (!guideOn.has(g)) guideOn.set(g, true);
    const btn = document.createElement("button");
    btn.dataset.guide = g;
    btn.onclick = () => {
      if (client === null) return;
      const on = !(guideOn.get(g) ?? true);
      if (client.send({ type: "toggle", what: `guide:${g}`, on }))
        guideOn.set(g, on);
    };
    togglesDiv.appendChild(btn);
  }

  const resetBtn = document.createElement("button");
  resetBtn.textContent = "reset";
  resetBtn.onclick = () => {
    client?.send({ type: "reset" });
    history.clear();
  };
  togglesDiv.appendChild(resetBtn);
}

function refreshToggleLabels(): void {
  const balanceBtn = document.getElementById("toggle-balance");
  if (balanceBtn !== null && frame !== null)
    balanceBtn.textContent = `balance: ${frame.balance ? "on" : "off"}`;
  for (const btn of togglesDiv.querySelectorAll<HTMLButtonElement>("[data-guide]")) {
    const g = btn.dataset.guide ?? "";
    btn.textContent = `guide ${g}: ${guideOn.get(g) !== false ? "on" : "off"}`;
  }
}

function connect(): void {
  client?.close();
  hello = null;
  frame = null;
  dragging = null;
  history.clear();
  coalescer.clear();
  status = "connecting";

  client = new SteerClient(urlInput.value.trim() || DEFAULT_URL, {
    onFrame: (f) => {
      if (f.type === "hello") {
        hello = f;
        rebuildToggles();
      } else if (f.type === "state") {
        frame = f; // last write wins; render loop reads the newest only
        history.push(f.t, f.delta_norm);
      } else {
        note(`server: ${f.message}`);
      }
    },
    onMalformed: () => note("malformed frame ignored"),
    onStatus: (s) => {
      status = s;
      if (s === "closed") dragging = null;
    },
  });
}

interface Pane {
  canvas: HTMLCanvasElement;
  kind: ViewKind;
  view: View;
}

const panes: Pane[] = [
  { canvas: frontCanvas, kind: "front", view: fitView("front", 1, 1) },
  { canvas: topCanvas, kind: "top", view: fitView("top", 1, 1) },
];

function fitCanvas(canvas: HTMLCanvasElement): { w: number; h: number } {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth;
  const h = canvas.clientHeight;
  if (canvas.width !== w * dpr || canvas.height !== h * dpr) {
    canvas.width = w * dpr;
    canvas.height = h * dpr;
  }
  return { w, h };
}

function pointerPos(canvas: HTMLCanvasElement, ev: PointerEvent): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
}

for (const pane of panes) {
  pane.canvas.addEventListener("pointerdown", (ev) => {
    if (frame === null) return;
    if (!canSteer()) {
      note(status === "open" ? "read-only session" : "disconnected: steering disabled");
      return;
    }
    const { x, y } = pointerPos(pane.canvas, ev);
    const task = pickHandle(pane.view, frame, x, y, HANDLE_RADIUS_PX + 4);
    if (task === null) return;
    dragging = { task, view: pane.view };
    pane.canvas.setPointerCapture(ev.pointerId);
  });

  pane.canvas.addEventListener("pointermove", (ev) => {
    if (dragging === null || frame === null || dragging.view !== pane.view) return;
    const doc = frame.targets[dragging.task];
    if (doc === undefined) return;
    const { x, y } = pointerPos(pane.canvas, ev);
    coalescer.set(dragging.task, screenToWorld(pane.view, x, y, doc.pos));
  });

  const release = (ev: PointerEvent) => {
    if (dragging !== null && dragging.view === pane.view) dragging = null;
    if (pane.canvas.hasPointerCapture(ev.pointerId))
      pane.canvas.releasePointerCapture(ev.pointerId);
  };
  pane.canvas.addEventListener("pointerup", release);
  pane.canvas.addEventListener("pointercancel", release);
}

function tick(): void {
  // at most one outbound set_target per task per animation tick
  if (client !== null && canSteer()) coalescer.flush((m) => client!.send(m));

  banner.textContent = statusText();
  banner.dataset.state = status;

  for (const pane of panes) {
    const { w, h } = fitCanvas(pane.canvas);
    const ctx = pane.canvas.getContext("2d");
    if (ctx === null) continue;
    const dpr = window.devicePixelRatio || 1;
    ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
    pane.view = fitView(pane.kind, w, h);
    if (hello !== null && frame !== null) {
      drawScene(ctx, w, h, pane.view, hello, frame, dragging?.task ?? null);
    } else {
      ctx.fillStyle = "#1b1e24";
      ctx.fillRect(0, 0, w, h);
    }
    pane.canvas.style.cursor = canSteer() ? "crosshair" : "not-allowed";
  }

  {
    const { w, h } = fitCanvas(chartCanvas);
    const ctx = chartCanvas.getContext("2d");
    if (ctx !== null) {
      const dpr = window.devicePixelRatio || 1;
      ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
      drawDeltaChart(ctx, w, h, history);
    }
  }

  refreshToggleLabels();
  requestAnimationFrame(tick);
}

connectBtn.onclick = connect;
urlInput.value = new URLSearchParams(window.location.search).get("url") ?? DEFAULT_URL;
connect();
requestAnimationFrame(tick);
