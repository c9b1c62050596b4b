/**
 * Wire protocol types and the defensive frame parser.
 *
 * Every inbound string goes through parseFrame, which returns a typed frame
 * or null.  Null means "malformed": the caller shows a banner and keeps the
 * last good frame, it never throws mid-render.  Extra fields the server may
 * add in later revisions are ignored, matching the server's own policy for
 * client messages.
 */

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

export interface EllipseDoc {
  center: Vec3;
  /** Semi-axis lengths in meters, major first. */
  axes: [number, number];
  /** Major-axis angle in the support plane basis, radians. */
  angle: number;
  /** Balance distance scale: delta is normalized by d squared. */
  d: number;
}

export interface SegmentDoc {
  name: string;
  parent: string | null;
}

export interface PlaneDoc {
  point: Vec3;
  normal: Vec3;
}

export interface HelloFrame {
  type: "hello";
  protocol: number;
  scenario: string;
  steering: boolean;
  timestep: number;
  tasks: string[];
  guides: string[];
  segments: SegmentDoc[];
  planes: PlaneDoc[];
  ellipse: EllipseDoc | null;
}

export interface JointPose {
  name: string;
  pos: Vec3;
  quat: Quat;
}

export interface TargetDoc {
  pos: Vec3;
  enabled: boolean;
}

export interface StateFrame {
  type: "state";
  t: number;
  joints: JointPose[];
  com: Vec3;
  delta: number | null;
  delta_norm: number | null;
  balance: boolean;
  ellipse: EllipseDoc | null;
  contacts: Vec3[];
  targets: Record<string, TargetDoc>;
}

export interface ErrorFrame {
  type: "error";
  message: string;
}

export type ServerFrame = HelloFrame | StateFrame | ErrorFrame;

export interface SetTargetMsg {
  type: "set_target";
  task: string;
  pos: Vec3;
}

export interface ToggleMsg {
  type: "toggle";
  what: string;
  on: boolean;
}

export interface ResetMsg {
  type: "reset";
}

export type ClientMessage = SetTargetMsg | ToggleMsg | ResetMsg;

export function encodeMessage(msg: ClientMessage): string {
  return JSON.stringify(msg);
}

function isNum(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

function isVec(x: unknown, n: number): x is number[] {
  return Array.isArray(x) && x.length === n && x.every(isNum);
}

function isRecord(x: unknown): x is Record<string, unknown> {
  return typeof x === "object" && x !== null && !Array.isArray(x);
}

function readEllipse(x: unknown): EllipseDoc | null | undefined {
  if (x === null || x === undefined) return null;
  if (!isRecord(x)) return undefined;
  if (!isVec(x.center, 3) || !isVec(x.axes, 2)) return undefined;
  if (!isNum(x.angle) || !isNum(x.d)) return undefined;
  return {
    center: x.center as Vec3,
    axes: x.axes as [number, number],
    angle: x.angle,
    d: x.d,
  };
}

function readHello(x: Record<string, unknown>): HelloFrame | null {
  if (!isNum(x.protocol) || typeof x.scenario !== "string") return null;
  if (typeof x.steering !== "boolean" || !isNum(x.timestep)) return null;
  const strs = (v: unknown): v is string[] =>
    Array.isArray(v) && v.every((s) => typeof s === "string");
  if (!strs(x.tasks) || !strs(x.guides)) return null;
  if (!Array.isArray(x.segments) || !Array.isArray(x.planes)) return null;

  const segments: SegmentDoc[] = [];
  for (const seg of x.segments) {
    if (!isRecord(seg) || typeof seg.name !== "string") return null;
    if (seg.parent !== null && typeof seg.parent !== "string") return null;
    segments.push({ name: seg.name, parent: seg.parent });
  }
  const planes: PlaneDoc[] = [];
  for (const pl of x.planes) {
    if (!isRecord(pl) || !isVec(pl.point, 3) || !isVec(pl.normal, 3)) return null;
    planes.push({ point: pl.point as Vec3, normal: pl.normal as Vec3 });
  }
  const ellipse = readEllipse(x.ellipse);
  if (ellipse === undefined) return null;

  return {
    type: "hello",
    protocol: x.protocol,
    scenario: x.scenario,
    steering: x.steering,
    timestep: x.timestep,
    tasks: x.tasks,
    guides: x.guides,
    segments,
    planes,
    ellipse,
  };
}

function readState(x: Record<string, unknown>): StateFrame | null {
  if (!isNum(x.t) || !isVec(x.com, 3)) return null;
  if (typeof x.balance !== "boolean") return null;
  if (x.delta !== null && !isNum(x.delta)) return null;
  if (x.delta_norm !== null && !isNum(x.delta_norm)) return null;
  if (!Array.isArray(x.joints) || !Array.isArray(x.contacts)) return null;
  if (!isRecord(x.targets)) return null;

  const joints: JointPose[] = [];
  for (const j of x.joints) {
    if (!isRecord(j) || typeof j.name !== "string") return null;
    if (!isVec(j.pos, 3) || !isVec(j.quat, 4)) return null;
    joints.push({ name: j.name, pos: j.pos as Vec3, quat: j.quat as Quat });
  }
  const contacts: Vec3[] = [];
  for (const c of x.contacts) {
    if (!isVec(c, 3)) return null;
    contacts.push(c as Vec3);
  }
  const targets: Record<string, TargetDoc> = {};
  for (const [task, doc] of Object.entries(x.targets)) {
    if (!isRecord(doc) || !isVec(doc.pos, 3) || typeof doc.enabled !== "boolean")
      return null;
    targets[task] = { pos: doc.pos as Vec3, enabled: doc.enabled };
  }
  const ellipse = readEllipse(x.ellipse);
  if (ellipse === undefined) return null;

  return {
    type: "state",
    t: x.t,
    joints,
    com: x.com as Vec3,
    delta: x.delta as number | null,
    delta_norm: x.delta_norm as number | null,
    balance: x.balance,
    ellipse,
    contacts,
    targets,
  };
}

/** Parse one inbound frame; null when the text is not a valid frame. */
export function parseFrame(text: string): ServerFrame | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return null;
  }
  if (!isRecord(raw) || typeof raw.type !== "string") return null;
  switch (raw.type) {
    case "hello":
      return readHello(raw);
    case "state":
      return readState(raw);
    case "error":
      return typeof raw.message === "string"
        ? { type: "error", message: raw.message }
        : null;
    default:
      return null;
  }
}
