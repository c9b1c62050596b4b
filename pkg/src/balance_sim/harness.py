"""Scenario files, target recordings, batch runs, and metrics output.

A scenario JSON bundles an avatar with its environment, controller setup,
and run length.  ``run`` integrates it deterministically and writes one
metrics row per step; the CSV body is reproducible byte for byte, only the
``#`` comment line at the top carries a wall-clock stamp.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .balance import BalanceError, SupportEllipse, balance_distance, fit_support_ellipse
from .com import com_position
from .control import (
    ControlContext,
    ControlError,
    ControlGains,
    Morphology,
    TaskTarget,
    VirtualGuide,
    _guide_metrics,
    control_step,
    retarget_targets,
)
from .dynamics import EnvironmentPlane, StepConfig, StepError, detect_contacts, mass_matrix, step
from .model import AvatarModel, Kinematics, ModelError, SimState, coordinate_difference, load_avatar
from .transforms import quat_normalize, quat_slerp

log = logging.getLogger(__name__)

ASSET_ROOT = resources.files("balance_sim") / "assets"


class HarnessError(ValueError):
    """Scenario or recording file rejected, or a run failed."""


# ------------------------------------------------------------------ streams

@dataclass
class _Track:
    times: np.ndarray            # (k,) non-decreasing
    positions: np.ndarray        # (k, 3)
    quats: np.ndarray | None     # (k, 4) unit, or None when the file has none

    def sample(self, t: float) -> tuple[np.ndarray, np.ndarray | None]:
        times = self.times
        if t <= times[0]:
            i0 = i1 = 0
            u = 0.0
        elif t >= times[-1]:
            i0 = i1 = len(times) - 1
            u = 0.0
        else:
            i1 = int(np.searchsorted(times, t, side="right"))
            i0 = i1 - 1
            span = times[i1] - times[i0]
            u = (t - times[i0]) / span if span > 0 else 1.0
        pos = (1.0 - u) * self.positions[i0] + u * self.positions[i1]
        if self.quats is None:
            return pos, None
        return pos, quat_slerp(self.quats[i0], self.quats[i1], u)


class TargetStream:
    """Recorded target trajectory: piecewise-linear positions, slerped
    orientations, held constant outside the recorded time range."""

    def __init__(self, tracks: dict[str, _Track]):
        self.tracks = tracks

    @property
    def tasks(self) -> list[str]:
        return sorted(self.tracks)

    def sample(self, t: float) -> dict[str, tuple[np.ndarray, np.ndarray | None]]:
        return {name: tr.sample(t) for name, tr in self.tracks.items()}


def load_target_stream(path: str | Path) -> TargetStream:
    """Parse a target recording: CSV ``t,task,x,y,z[,qw,qx,qy,qz]``."""
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise HarnessError(f"{path}: empty recording")
    header = [c.strip() for c in lines[0].split(",")]
    if header[:5] != ["t", "task", "x", "y", "z"]:
        raise HarnessError(f"{path}: header must start with t,task,x,y,z")
    has_quat = header[5:9] == ["qw", "qx", "qy", "qz"]
    if header[5:] and not has_quat:
        raise HarnessError(f"{path}: trailing columns must be qw,qx,qy,qz")

    rows: dict[str, list[tuple[float, np.ndarray, np.ndarray | None]]] = {}
    last_t = -np.inf
    for lineno, ln in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in ln.split(",")]
        if len(cells) not in (5, 9):
            raise HarnessError(f"{path}:{lineno}: expected 5 or 9 columns, got {len(cells)}")
        try:
            t = float(cells[0])
            pos = np.array([float(c) for c in cells[2:5]])
            quat = None
            if len(cells) == 9 and any(cells[5:]):
                quat = quat_normalize([float(c) for c in cells[5:9]])
        except ValueError as e:
            raise HarnessError(f"{path}:{lineno}: {e}") from e
        if t < last_t:
            raise HarnessError(f"{path}:{lineno}: time {t} decreases (previous {last_t})")
        last_t = t
        rows.setdefault(cells[1], []).append((t, pos, quat))

    tracks: dict[str, _Track] = {}
    for task, samples in rows.items():
        times = np.array([s[0] for s in samples])
        positions = np.vstack([s[1] for s in samples])
        quats_raw = [s[2] for s in samples]
        if any(q is not None for q in quats_raw):
            if any(q is None for q in quats_raw):
                raise HarnessError(
                    f"{path}: task {task!r} mixes rows with and without orientation")
            quats = np.vstack(quats_raw)
        else:
            quats = None
        tracks[task] = _Track(times, positions, quats)
    return TargetStream(tracks)


# ---------------------------------------------------------------- scenarios

@dataclass
class RetargetConfig:
    actor: Morphology
    avatar: Morphology
    limb_map: dict[str, str]     # task frame name -> limb key


@dataclass
class Scenario:
    name: str
    avatar: AvatarModel
    initial_q: np.ndarray
    planes: list[EnvironmentPlane]
    targets: dict[str, TaskTarget]
    guides: dict[str, VirtualGuide]
    gains: ControlGains
    duration: float
    timestep: float
    seed: int = 0
    balance_enabled: bool = True
    balance_safety: float = 0.9
    ellipse: SupportEllipse | None = None    # explicit; None means fit at t=0
    retarget: RetargetConfig | None = None
    stream: TargetStream | None = None
    physics: StepConfig = field(default_factory=StepConfig)

    def __post_init__(self):
        if not 0.0 < self.timestep <= 0.02:
            raise HarnessError(f"timestep must lie in (0, 0.02], got {self.timestep}")
        if self.duration <= 0.0:
            raise HarnessError(f"duration must be positive, got {self.duration}")


_KNOWN_KEYS = {
    "name", "description", "avatar", "initial", "planes", "targets", "guides",
    "gains", "duration", "timestep", "seed", "balance", "retarget",
    "target_stream", "physics",
}


def _resolve_ref(ref: str, base: Path):
    """A file reference, relative to the scenario first, bundled assets second."""
    cand = base / ref
    if cand.exists():
        return cand
    bundled = ASSET_ROOT / ref
    if bundled.is_file():
        return bundled
    raise HarnessError(f"file reference {ref!r} not found next to the scenario or in assets")


def _require(doc: dict, key: str, path: Path):
    if key not in doc:
        raise HarnessError(f"{path}: missing required field {key!r}")
    return doc[key]


def _gain_value(model: AvatarModel, raw, path: Path, field_name: str):
    """Scalar gain, or a per-dof vector from {"default": g, "<segment>": g}."""
    if not isinstance(raw, dict):
        return float(raw)
    vec = np.full(model.n_dof, float(raw.get("default", 0.0)))
    for seg_name, val in raw.items():
        if seg_name == "default":
            continue
        if seg_name not in model.index_of:
            raise HarnessError(
                f"{path}: gains.{field_name} names unknown segment {seg_name!r}")
        i = model.index_of[seg_name]
        o = model.v_offset[i]
        vec[o:o + model.segments[i].joint.nv] = float(val)
    return vec


def _initial_state(model: AvatarModel, raw: dict, path: Path) -> np.ndarray:
    q = model.neutral_q()
    root = model.segments[0]
    if "root_pos" in raw:
        if root.joint.kind != "free6":
            raise HarnessError(f"{path}: initial.root_pos set but the root joint is fixed")
        q[0:3] = np.asarray(raw["root_pos"], dtype=float)
    if "root_quat" in raw:
        q[3:7] = quat_normalize(raw["root_quat"])
    for name, val in (raw.get("joints") or {}).items():
        if name not in model.index_of:
            raise HarnessError(f"{path}: initial.joints names unknown segment {name!r}")
        i = model.index_of[name]
        kind = model.segments[i].joint.kind
        o = model.q_offset[i]
        if kind == "revolute":
            q[o] = float(val)
        elif kind == "spherical":
            q[o:o + 4] = quat_normalize(val)
        else:
            raise HarnessError(f"{path}: initial.joints {name!r} is not an articulated joint")
    return q


def load_scenario(path: str | Path) -> Scenario:
    """Load and fully validate a scenario file; errors name the bad field."""
    path = Path(path)
    if not path.exists():
        raise HarnessError(f"scenario file {path} does not exist")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise HarnessError(f"{path}: not valid JSON (line {e.lineno}: {e.msg})") from e
    if not isinstance(doc, dict):
        raise HarnessError(f"{path}: top level must be an object")
    unknown = set(doc) - _KNOWN_KEYS
    if unknown:
        raise HarnessError(f"{path}: unknown field {sorted(unknown)[0]!r}")

    try:
        avatar = load_avatar(_resolve_ref(_require(doc, "avatar", path), path.parent))
    except ModelError as e:
        raise HarnessError(f"{path}: avatar: {e}") from e

    duration = float(_require(doc, "duration", path))
    timestep = float(_require(doc, "timestep", path))

    planes = []
    for i, raw in enumerate(doc.get("planes", [])):
        try:
            planes.append(EnvironmentPlane(
                name=raw.get("name", f"plane{i}"),
                point=raw.get("point", [0.0, 0.0, 0.0]),
                normal=raw.get("normal", [0.0, 0.0, 1.0]),
                half_u=raw.get("half_u"),
                half_v=raw.get("half_v"),
                u_axis=raw.get("u_axis"),
            ))
        except ValueError as e:
            raise HarnessError(f"{path}: planes[{i}]: {e}") from e

    targets: dict[str, TaskTarget] = {}
    for i, raw in enumerate(doc.get("targets", [])):
        task = raw.get("task")
        if task not in avatar.task_frames:
            raise HarnessError(f"{path}: targets[{i}]: unknown task frame {task!r}")
        try:
            targets[task] = TaskTarget(
                task=task,
                position=raw.get("position", [0.0, 0.0, 0.0]),
                orientation=raw.get("orientation"),
                kp=float(raw.get("kp", 500.0)),
                kd=float(raw.get("kd", 50.0)),
                wrench_cap=float(raw.get("wrench_cap", 400.0)),
                enabled=bool(raw.get("enabled", True)),
            )
        except (ControlError, ValueError) as e:
            raise HarnessError(f"{path}: targets[{i}]: {e}") from e

    guides: dict[str, VirtualGuide] = {}
    for i, raw in enumerate(doc.get("guides", [])):
        name = raw.get("name", f"guide{i}")
        task = raw.get("task")
        if task not in avatar.task_frames:
            raise HarnessError(f"{path}: guides[{i}]: unknown task frame {task!r}")
        kwargs = {k: raw[k] for k in (
            "point", "direction", "orientation", "stiffness", "ang_stiffness",
            "damping", "ang_damping", "force_cap", "torque_cap",
            "enabled") if k in raw}
        try:
            guides[name] = VirtualGuide(name=name, kind=raw.get("kind", "axis"),
                                        task=task, **kwargs)
        except ControlError as e:
            raise HarnessError(f"{path}: guides[{i}]: {e}") from e

    graw = doc.get("gains", {})
    gains = ControlGains(
        posture_kp=_gain_value(avatar, graw.get("posture_kp", 20.0), path, "posture_kp"),
        posture_kd=_gain_value(avatar, graw.get("posture_kd", 2.0), path, "posture_kd"),
        joint_damping=float(graw.get("joint_damping", 1.0)),
    )

    braw = doc.get("balance", {})
    ellipse = None
    if "ellipse" in braw:
        eraw = braw["ellipse"]
        try:
            ellipse = SupportEllipse(
                center=eraw["center"], Q_metric=eraw["Q"], d=float(eraw["d"]),
                up_axis=eraw.get("up", [0.0, 0.0, 1.0]))
        except (BalanceError, KeyError) as e:
            raise HarnessError(f"{path}: balance.ellipse: {e}") from e

    retarget = None
    if "retarget" in doc:
        rraw = doc["retarget"]
        try:
            actor = Morphology(dict(rraw["actor"]["limbs"]), float(rraw["actor"]["root_height"]))
            av = Morphology(dict(rraw["avatar"]["limbs"]), float(rraw["avatar"]["root_height"]))
            limb_map = dict(rraw["map"])
        except (KeyError, ControlError) as e:
            raise HarnessError(f"{path}: retarget: {e}") from e
        for task, limb in limb_map.items():
            if task not in avatar.task_frames:
                raise HarnessError(f"{path}: retarget.map: unknown task frame {task!r}")
            if limb not in actor.limb_lengths or limb not in av.limb_lengths:
                raise HarnessError(f"{path}: retarget.map: limb {limb!r} missing from a morphology")
        retarget = RetargetConfig(actor, av, limb_map)

    stream = None
    if "target_stream" in doc:
        stream = load_target_stream(_resolve_ref(doc["target_stream"], path.parent))
        for task in stream.tasks:
            if task not in avatar.task_frames:
                raise HarnessError(f"{path}: target_stream: unknown task frame {task!r}")
            if retarget is not None and task not in retarget.limb_map:
                raise HarnessError(f"{path}: target_stream: task {task!r} has no retarget mapping")

    praw = doc.get("physics", {})
    physics = StepConfig()
    for key in ("contact_margin", "limit_margin", "baumgarte", "balance_stabilization",
                "balance_margin_frac", "grip_margin", "velocity_cap", "constraint_reg",
                "joint_friction"):
        if key in praw:
            setattr(physics, key, float(praw[key]))
    if "grip" in praw:
        physics.grip = bool(praw["grip"])
    if "gravity" in praw:
        physics.gravity = np.asarray(praw["gravity"], dtype=float)

    scenario = Scenario(
        name=doc.get("name", path.stem),
        avatar=avatar,
        initial_q=_initial_state(avatar, doc.get("initial", {}), path),
        planes=planes,
        targets=targets,
        guides=guides,
        gains=gains,
        duration=duration,
        timestep=timestep,
        seed=int(doc.get("seed", 0)),
        balance_enabled=bool(braw.get("enabled", True)),
        balance_safety=float(braw.get("safety", 0.9)),
        ellipse=ellipse,
        retarget=retarget,
        stream=stream,
        physics=physics,
    )
    return scenario


# --------------------------------------------------------------------- runs

@dataclass
class RunResult:
    header: list[str]
    rows: list[list[float]]
    summary: dict
    csv_path: Path | None = None

    def column(self, name: str) -> np.ndarray:
        i = self.header.index(name)
        return np.array([row[i] for row in self.rows])


def _fit_scenario_ellipse(scenario: Scenario) -> SupportEllipse | None:
    """Support ellipse from the collision points touching the ground at t=0."""
    if scenario.ellipse is not None:
        return scenario.ellipse
    contacts = detect_contacts(scenario.avatar, scenario.initial_q, scenario.planes,
                               margin=0.01)
    pts = [c.world_point for c in contacts]
    if len(pts) < 3:
        return None
    return fit_support_ellipse(pts, safety=scenario.balance_safety)


def _apply_stream(ctx: ControlContext, scenario: Scenario, t: float) -> None:
    samples = scenario.stream.sample(t)
    if scenario.retarget is not None:
        actor_targets = {task: TaskTarget(task, pos, orientation=quat)
                         for task, (pos, quat) in samples.items()}
        cfg = scenario.retarget
        mapped = retarget_targets(actor_targets, cfg.actor, cfg.avatar, cfg.limb_map)
        samples = {task: (tt.position, tt.orientation) for task, tt in mapped.items()}
    for task, (pos, quat) in samples.items():
        base = ctx.targets.get(task) or scenario.targets.get(task)
        if base is not None:
            ctx.targets[task] = replace(base, position=pos,
                                        orientation=quat if quat is not None else base.orientation)
        else:
            ctx.targets[task] = TaskTarget(task, pos, orientation=quat)


def _metric_header(scenario: Scenario, task_names: list[str]) -> list[str]:
    cols = ["t", "delta", "delta_norm", "delta_scaled", "com_x", "com_y",
            "com_z", "energy", "n_contacts", "impulse_z_sum",
            "max_penetration", "max_limit_violation", "limits_active",
            "lcp_residual", "balance_impulse"]
    for task in task_names:
        cols += [f"err_{task}", f"z_{task}"]
    for guide in sorted(scenario.guides):
        cols += [f"angle_{guide}", f"lateral_{guide}"]
    for plane in sorted(p.name for p in scenario.planes):
        cols.append(f"z_plane_{plane}")
    return cols


def _limit_violation(model: AvatarModel, q: np.ndarray) -> float:
    worst = 0.0
    for i, seg in enumerate(model.segments):
        if seg.joint.kind == "revolute" and seg.joint.limits is not None:
            lo, hi = seg.joint.limits
            qi = q[model.q_offset[i]]
            worst = max(worst, lo - qi, qi - hi)
    return max(worst, 0.0)


def build_context(scenario: Scenario, balance_on: bool) -> ControlContext:
    """Fresh mutable control context for one simulation session."""
    ellipse = _fit_scenario_ellipse(scenario)
    if balance_on and ellipse is None:
        raise HarnessError("balance enabled but no support ellipse: none configured "
                           "and fewer than 3 ground contacts at t=0")
    return ControlContext(
        targets={k: replace(v) for k, v in scenario.targets.items()},
        guides={k: replace(v) for k, v in scenario.guides.items()},
        gains=scenario.gains,
        posture_ref=scenario.initial_q.copy(),
        ellipse=ellipse,
        balance_enabled=balance_on,
    )


def run(scenario: Scenario, *, balance: bool | None = None,
        duration: float | None = None, out: str | Path | None = None) -> RunResult:
    """Batch-simulate a scenario; identical inputs give identical rows."""
    model = scenario.avatar
    h = scenario.timestep
    total = scenario.duration if duration is None else float(duration)
    if total <= 0:
        raise HarnessError(f"duration must be positive, got {total}")
    n_steps = max(1, int(round(total / h)))
    balance_on = scenario.balance_enabled if balance is None else bool(balance)

    ctx = build_context(scenario, balance_on)
    ellipse = ctx.ellipse

    task_names = sorted(set(scenario.targets)
                        | (set(scenario.stream.tasks) if scenario.stream else set()))
    header = _metric_header(scenario, task_names)
    plane_heights = [float(p.point[2]) for p in sorted(scenario.planes, key=lambda p: p.name)]

    state = SimState(scenario.initial_q.copy(), np.zeros(model.n_dof), 0.0)
    kin = Kinematics(model, state.q)
    rows: list[list[float]] = []
    g = scenario.physics.gravity
    t_wall = time.perf_counter()

    M = mass_matrix(model, state.q, kin=kin)
    for k in range(n_steps):
        if scenario.stream is not None:
            _apply_stream(ctx, scenario, state.t)
        cout = control_step(model, state, ctx, M_mass=M, kin=kin)
        try:
            new_state, report = step(model, state, cout.torques, scenario.planes, h,
                                     config=scenario.physics,
                                     balance_row=cout.balance_row, kin=kin, M_mass=M,
                                     damping=cout.damping)
        except StepError as e:
            raise HarnessError(f"step {k} (t={state.t:.4f}): {e}") from e

        kin = Kinematics(model, new_state.q)
        com = com_position(model, new_state.q, kin=kin)
        delta = balance_distance(ellipse, com) if ellipse is not None else np.nan
        delta_norm = delta / ellipse.d ** 2 if ellipse is not None else np.nan
        # alternate normalization, linear in CoM offset instead of quadratic
        delta_scaled = (np.sign(delta) * np.sqrt(abs(delta)) / ellipse.d
                        if ellipse is not None else np.nan)
        M_new = mass_matrix(model, new_state.q, kin=kin)
        # stored energy: kinetic + gravitational + posture-spring potential,
        # the storage function the damped controller may only drain (task and
        # guide springs are excluded; their anchors move with the operator)
        energy = 0.5 * float(new_state.qdot @ M_new @ new_state.qdot) \
            - model.total_mass * float(g @ com)
        if ctx.posture_ref is not None:
            e_post = coordinate_difference(model, ctx.posture_ref, new_state.q)
            if model.segments[0].joint.kind == "free6":
                e_post[0:6] = 0.0
            energy += 0.5 * float(e_post @ (np.asarray(ctx.gains.posture_kp) * e_post))

        impulse_z = 0.0
        limits_active = 0
        for r, z in zip(report.rows, report.impulses):
            if r.kind == "contact":
                impulse_z += float(z) * float(r.contact.normal[2])
            elif r.kind.startswith("joint_limit") and z > 1e-12:
                limits_active += 1
        pen = max((-c.gap for c in report.contacts), default=0.0)

        row = [new_state.t, delta, delta_norm, delta_scaled, com[0], com[1],
               com[2], energy, float(len(report.contacts)), impulse_z,
               max(pen, 0.0), _limit_violation(model, new_state.q),
               float(limits_active), report.residual, report.balance_impulse]
        for task in task_names:
            tf = model.task_frames[task]
            pose = kin.transforms[tf.segment].compose(tf.local)
            tgt = ctx.targets.get(task)
            err = float(np.linalg.norm(tgt.position - pose.p)) if tgt is not None else np.nan
            row += [err, float(pose.p[2])]
        for gname in sorted(scenario.guides):
            angle, lateral = _guide_metrics(model, kin, scenario.guides[gname])
            row += [angle, lateral]
        row += plane_heights
        rows.append(row)
        state = new_state
        M = M_new

    wall = time.perf_counter() - t_wall
    guide_angle_cols = [header.index(c) for c in header if c.startswith("angle_")]
    summary = {
        "steps": n_steps,
        "sim_seconds": round(n_steps * h, 9),
        "wall_seconds": wall,
        "min_delta": float(np.nanmin([r[1] for r in rows])) if ellipse is not None else None,
        "max_penetration": float(max(r[header.index("max_penetration")] for r in rows)),
        "max_guide_angle": float(max((r[i] for r in rows for i in guide_angle_cols),
                                     default=0.0)),
        "final_com": [float(r) for r in rows[-1][header.index("com_x"):header.index("com_x") + 3]],
    }

    result = RunResult(header, rows, summary)
    if out is not None:
        result.csv_path = Path(out)
        write_metrics(result, result.csv_path, scenario)
    return result


def write_metrics(result: RunResult, path: Path, scenario: Scenario) -> None:
    """CSV with a stamped comment line; everything after it is deterministic."""
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
    lines = [f"# {scenario.name} run {stamp}Z seed={scenario.seed}"]
    lines.append(",".join(result.header))
    for row in result.rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def _fmt(x: float) -> str:
    if isinstance(x, float) and x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return format(x, ".12g")


def read_metrics(path: str | Path) -> RunResult:
    """Read back a metrics CSV produced by write_metrics."""
    lines = Path(path).read_text().splitlines()
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    header = body[0].split(",")
    rows = [[float(c) for c in ln.split(",")] for ln in body[1:]]
    return RunResult(header, rows, {}, csv_path=Path(path))
