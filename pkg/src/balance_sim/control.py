"""Task-space control: PD trackers, virtual guides, posture, retargeting.

Wrenches are 6-vectors ordered (torque; force) to match the (angular;
linear) Jacobian rows.  Applied torques never actuate the root free6
coordinates; the floating base only feels constraint impulses.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .balance import BalanceConstraintRow, SupportEllipse, build_balance_row
from .model import (
    AvatarModel,
    Kinematics,
    SimState,
    coordinate_difference,
)
from .transforms import Transform, mat_to_quat, quat_conj, quat_log, quat_mul, quat_to_mat

__all__ = [
    "TaskTarget",
    "VirtualGuide",
    "Morphology",
    "ControlGains",
    "ControlContext",
    "ControlOutput",
    "ControlError",
    "retarget_targets",
    "apply_guide",
    "task_torques",
    "damping_operator",
    "posture_torques",
    "control_step",
]

log = logging.getLogger("balance_sim.control")

DEFAULT_TASK_KP = 500.0
DEFAULT_TASK_KD = 50.0
DEFAULT_POSTURE_KP = 20.0
DEFAULT_POSTURE_KD = 2.0


class ControlError(ValueError):
    pass


@dataclass
class TaskTarget:
    task: str                                  # task frame name
    position: np.ndarray
    orientation: np.ndarray | None = None      # unit quaternion (w, x, y, z)
    kp: float = DEFAULT_TASK_KP                # N/m and N*m/rad
    kd: float = DEFAULT_TASK_KD
    wrench_cap: float = 400.0                  # norm bound on the 6D wrench
    enabled: bool = True

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if self.orientation is not None:
            o = np.asarray(self.orientation, dtype=float)
            self.orientation = o / np.linalg.norm(o)


@dataclass
class VirtualGuide:
    """Spring-damper that removes error components along constrained directions.

    ``axis`` guides free only translation along ``direction`` (all rotations
    and lateral translations constrained); ``plane`` guides free translation
    in the plane normal to ``direction`` and leave rotations alone; ``point``
    guides constrain all translation.  ``orientation``, when given, is the
    pose the guide pins rotations to; otherwise rotations are left free.
    """

    name: str
    kind: str                                  # axis | plane | point
    task: str                                  # task frame the guide acts on
    point: np.ndarray = field(default_factory=lambda: np.zeros(3))
    direction: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    orientation: np.ndarray | None = None
    stiffness: float = 2e4                     # N/m
    ang_stiffness: float = 500.0               # N*m/rad
    damping: float = 200.0
    ang_damping: float = 10.0
    # saturation of the guide spring; a stiff spring engaged far from the
    # manifold must tug, not yank the arm off the body
    force_cap: float = np.inf                  # N
    torque_cap: float = np.inf                 # N*m
    enabled: bool = True

    def __post_init__(self):
        if self.kind not in ("axis", "plane", "point"):
            raise ControlError(f"guide {self.name!r}: unknown kind {self.kind!r}")
        self.point = np.asarray(self.point, dtype=float)
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if n < 1e-9:
            raise ControlError(f"guide {self.name!r}: direction must be non-zero")
        self.direction = d / n
        if self.orientation is not None:
            o = np.asarray(self.orientation, dtype=float)
            self.orientation = o / np.linalg.norm(o)

    def linear_constrained_projector(self) -> np.ndarray:
        """3x3 projector onto constrained translation directions."""
        u = self.direction.reshape(3, 1)
        if self.kind == "axis":
            return np.eye(3) - u @ u.T
        if self.kind == "plane":
            return u @ u.T
        return np.eye(3)

    def closest_point(self, p: np.ndarray) -> np.ndarray:
        """Projection of p onto the guide manifold."""
        if self.kind == "axis":
            return self.point + np.dot(p - self.point, self.direction) * self.direction
        if self.kind == "plane":
            return p - np.dot(p - self.point, self.direction) * self.direction
        return self.point.copy()


@dataclass
class Morphology:
    limb_lengths: dict[str, float]
    root_height: float

    def __post_init__(self):
        if self.root_height <= 0:
            raise ControlError("morphology root_height must be positive")
        for limb, length in self.limb_lengths.items():
            if length <= 0:
                raise ControlError(f"morphology limb {limb!r} must have positive length")


@dataclass
class ControlGains:
    # scalars broadcast; per-dof vectors let the legs hold body weight while
    # the arms stay compliant
    posture_kp: float | np.ndarray = DEFAULT_POSTURE_KP
    posture_kd: float | np.ndarray = DEFAULT_POSTURE_KD
    joint_damping: float = 1.0
    # watts the null-space posture filter may feed the loop before it blends
    # back to the raw spring; see posture_torques
    filter_power: float = 0.5


@dataclass
class ControlContext:
    """Everything control_step needs besides the instantaneous state."""
    targets: dict[str, TaskTarget] = field(default_factory=dict)
    guides: dict[str, VirtualGuide] = field(default_factory=dict)
    gains: ControlGains = field(default_factory=ControlGains)
    posture_ref: np.ndarray | None = None      # reference q, model layout
    ellipse: SupportEllipse | None = None
    balance_enabled: bool = True


@dataclass
class ControlOutput:
    torques: np.ndarray
    balance_row: BalanceConstraintRow | None
    task_errors: dict[str, float]              # position error norm per task
    guide_metrics: dict[str, tuple[float, float]]  # name -> (angle rad, lateral m)
    damping: np.ndarray | None = None          # PSD velocity-feedback operator


def retarget_targets(actor_targets: dict[str, TaskTarget], actor: Morphology,
                     avatar: Morphology, limb_map: dict[str, str]) -> dict[str, TaskTarget]:
    """Scale actor-space targets onto the avatar morphology.

    Positions are re-expressed relative to the actor root reference point,
    scaled per limb by avatar_length / actor_length, and re-anchored at the
    avatar root.  Orientations pass through unchanged; conflicting targets
    are not resolved here (the balance constraint absorbs them at runtime).
    """
    out: dict[str, TaskTarget] = {}
    actor_ref = np.array([0.0, 0.0, actor.root_height])
    avatar_ref = np.array([0.0, 0.0, avatar.root_height])
    for name, target in actor_targets.items():
        limb = limb_map.get(name)
        if limb is None:
            raise ControlError(f"no limb mapping for task {name!r}")
        if limb not in actor.limb_lengths or limb not in avatar.limb_lengths:
            raise ControlError(f"limb {limb!r} missing from a morphology")
        scale = avatar.limb_lengths[limb] / actor.limb_lengths[limb]
        pos = avatar_ref + (target.position - actor_ref) * scale
        out[name] = TaskTarget(task=target.task, position=pos,
                               orientation=None if target.orientation is None
                               else target.orientation.copy(),
                               kp=target.kp, kd=target.kd,
                               wrench_cap=target.wrench_cap, enabled=target.enabled)
    return out


def apply_guide(guide: VirtualGuide, pose_error: np.ndarray,
                frame_velocity: np.ndarray) -> np.ndarray:
    """Guide wrench from a 6D pose error (angular; linear) toward the guide
    manifold and the frame's 6D velocity.

    Components along the guide's free directions are zeroed; constrained
    components get stiffness * error - damping * velocity.
    """
    pose_error = np.asarray(pose_error, dtype=float)
    frame_velocity = np.asarray(frame_velocity, dtype=float)
    if pose_error.shape != (6,) or frame_velocity.shape != (6,):
        raise ControlError("guide expects 6-vectors (angular; linear)")
    Pl = guide.linear_constrained_projector()
    w = np.zeros(6)
    w[3:] = guide.stiffness * (Pl @ pose_error[3:]) - guide.damping * (Pl @ frame_velocity[3:])
    if guide.orientation is not None:
        w[:3] = guide.ang_stiffness * pose_error[:3] - guide.ang_damping * frame_velocity[:3]
    for sl, cap in ((slice(3, 6), guide.force_cap), (slice(0, 3), guide.torque_cap)):
        norm = np.linalg.norm(w[sl])
        if norm > cap:
            w[sl] *= cap / norm
    return w


def _frame_pose(model: AvatarModel, kin: Kinematics, task: str) -> tuple[Transform, int]:
    tf = model.task_frames.get(task)
    if tf is None:
        raise ControlError(f"unknown task frame {task!r}")
    return kin.transforms[tf.segment].compose(tf.local), tf.segment


def _orientation_error(desired_quat: np.ndarray, current: Transform) -> np.ndarray:
    """World-frame rotation vector taking the current frame to the target."""
    q_cur = mat_to_quat(current.R)
    return quat_log(quat_mul(desired_quat, quat_conj(q_cur)))


def task_torques(model: AvatarModel, state: SimState, context: ControlContext,
                 kin: Kinematics | None = None,
                 output: ControlOutput | None = None) -> np.ndarray:
    """Sum of J^T w over enabled targets, with guides folded in.

    Without a guide the wrench is the capped spring law on the full 6D error.
    With one, the operator error is first projected onto the guide's free
    directions and the guide's own spring handles the rest.  Velocity
    feedback is not applied here; see damping_operator.
    """
    kin = kin or Kinematics(model, state.q)
    tau = np.zeros(model.n_dof)
    guides_by_task = {g.task: g for g in context.guides.values() if g.enabled}
    for name, target in context.targets.items():
        if not target.enabled:
            continue
        pose, _ = _frame_pose(model, kin, target.task)
        tf = model.task_frames[target.task]
        J = kin.point_jacobian(tf.segment, pose.p)

        err = np.zeros(6)
        err[3:] = target.position - pose.p
        if target.orientation is not None:
            err[:3] = _orientation_error(target.orientation, pose)
        if output is not None:
            output.task_errors[name] = float(np.linalg.norm(err[3:]))

        guide = guides_by_task.get(target.task)
        if guide is not None:
            # operator error only along free directions; guide takes the rest
            Pl = guide.linear_constrained_projector()
            err[3:] -= Pl @ err[3:]
            if guide.orientation is not None:
                err[:3] = 0.0

        wrench = target.kp * err
        norm = np.linalg.norm(wrench)
        if norm > target.wrench_cap:
            wrench *= target.wrench_cap / norm
        tau += J.T @ wrench

        if guide is not None:
            g_err = np.zeros(6)
            g_err[3:] = guide.closest_point(pose.p) - pose.p
            if guide.orientation is not None:
                g_err[:3] = _orientation_error(guide.orientation, pose)
            tau += J.T @ apply_guide(guide, g_err, np.zeros(6))
    return tau


def damping_operator(model: AvatarModel, context: ControlContext,
                     kin: Kinematics) -> np.ndarray | None:
    """Velocity-feedback gains as one PSD operator for the stepper.

    Damping applied through the torque vector flips sign step to step once
    h * gain exceeds the effective inertia it acts on, and hand frames see
    effective masses down to a few grams along some directions.  Folding
    every velocity gain into the integrator's velocity solve instead is
    unconditionally stable and strictly dissipative.  Included: task kd on
    each frame's damped directions, guide damping on constrained directions,
    posture kd and joint damping on the articulated dofs.
    """
    n = model.n_dof
    diag = np.zeros(n)
    diag += np.asarray(context.gains.posture_kd, dtype=float)
    diag += context.gains.joint_damping
    _zero_root(model, diag)
    D = np.diag(diag)

    guides_by_task = {g.task: g for g in context.guides.values() if g.enabled}
    for target in context.targets.values():
        if not target.enabled:
            continue
        tf = model.task_frames.get(target.task)
        if tf is None:
            raise ControlError(f"unknown task frame {target.task!r}")
        pose = kin.transforms[tf.segment].compose(tf.local)
        J = kin.point_jacobian(tf.segment, pose.p)
        W = np.zeros((6, 6))
        W[:3, :3] = target.kd * np.eye(3)
        W[3:, 3:] = target.kd * np.eye(3)
        guide = guides_by_task.get(target.task)
        if guide is not None:
            Pl = guide.linear_constrained_projector()
            W[3:, 3:] = target.kd * (np.eye(3) - Pl) + guide.damping * Pl
            if guide.orientation is not None:
                W[:3, :3] = guide.ang_damping * np.eye(3)
        D += J.T @ W @ J
    return D if np.any(D) else None


def _guide_metrics(model: AvatarModel, kin: Kinematics, guide: VirtualGuide) -> tuple[float, float]:
    """(axis angle, lateral distance) of the guided frame w.r.t. the guide.

    The angle compares the tool axis the pin prescribes with where the frame
    actually points it; twist about the axis does not count.
    """
    pose, _ = _frame_pose(model, kin, guide.task)
    lateral = float(np.linalg.norm(pose.p - guide.closest_point(pose.p)))
    if guide.orientation is not None:
        ideal = guide.direction / np.linalg.norm(guide.direction)
        axis_local = quat_to_mat(guide.orientation).T @ ideal
        actual = pose.R @ axis_local
        angle = float(np.arccos(np.clip(actual @ ideal, -1.0, 1.0)))
    else:
        angle = 0.0
    return angle, lateral


def posture_torques(model: AvatarModel, state: SimState, context: ControlContext,
                    M_mass: np.ndarray, kin: Kinematics | None = None) -> np.ndarray:
    """Joint-space posture spring filtered by the dynamically consistent
    null-space projector of the stacked enabled task Jacobians.

    Only the position term passes through the filter; posture damping lives
    in damping_operator with the other velocity gains.
    """
    kin = kin or Kinematics(model, state.q)
    gains = context.gains
    tau0 = np.zeros(model.n_dof)
    if context.posture_ref is not None:
        tau0 = gains.posture_kp * coordinate_difference(model, context.posture_ref, state.q)
    _zero_root(model, tau0)

    blocks = []
    for target in context.targets.values():
        if not target.enabled:
            continue
        tf = model.task_frames[target.task]
        pose = kin.transforms[tf.segment].compose(tf.local)
        blocks.append(kin.point_jacobian(tf.segment, pose.p))
    if not blocks:
        return tau0

    J = np.vstack(blocks)
    Minv_JT = np.linalg.solve(M_mass, J.T)
    A = J @ Minv_JT
    # exact inverse away from singularity, Tikhonov-filtered near it
    U, s, Vt = np.linalg.svd(0.5 * (A + A.T))
    lam = 1e-6
    cutoff = 1e-8 * s[0] if s.size else 0.0
    inv_s = np.where(s > cutoff, 1.0 / s, s / (s * s + lam))
    A_pinv = (Vt.T * inv_s) @ U.T
    # root entries of the correction stay: clamping them here would break the
    # projector identity, control_step removes root actuation from the sum
    corr = J.T @ (A_pinv @ (Minv_JT.T @ tau0))

    # Passivity guard. The projector depends on q, so the filtered spring is
    # not a gradient field: once a task frame is held (by contact or by a
    # saturated spring) while the body sways, it measurably feeds energy into
    # the loop. The raw spring is the gradient of the posture potential, which
    # bounds what the filter may legitimately release, so the correction term
    # blends out as its injected power grows: extra power stays under
    # filter_power, which the velocity-feedback operator dominates at any
    # meaningful amplitude. At rest the filter is exact.
    pump = max(0.0, -float(corr @ state.qdot))
    w = context.gains.filter_power
    if w > 0.0:
        beta = w / (w + pump)
    else:
        beta = 0.0 if pump > 0.0 else 1.0
    return tau0 - beta * corr


def _zero_root(model: AvatarModel, tau: np.ndarray) -> None:
    root = model.segments[0]
    if root.joint.kind == "free6":
        tau[model.v_offset[0]:model.v_offset[0] + 6] = 0.0


def control_step(model: AvatarModel, state: SimState, context: ControlContext,
                 M_mass: np.ndarray | None = None,
                 kin: Kinematics | None = None) -> ControlOutput:
    """Applied torques plus the balance constraint row for the stepper.

    Root coordinates are zeroed: the base is unactuated and only constraint
    impulses may act on it.  Position feedback goes out as torques; every
    velocity gain is returned as the ``damping`` operator for the stepper
    to integrate implicitly.
    """
    kin = kin or Kinematics(model, state.q)
    from .dynamics import mass_matrix  # local import to avoid a cycle
    if M_mass is None:
        M_mass = mass_matrix(model, state.q, kin=kin)

    output = ControlOutput(torques=np.zeros(model.n_dof), balance_row=None,
                           task_errors={}, guide_metrics={})
    tau = task_torques(model, state, context, kin=kin, output=output)
    tau += posture_torques(model, state, context, M_mass, kin=kin)
    _zero_root(model, tau)
    output.torques = tau
    output.damping = damping_operator(model, context, kin)

    for name, guide in context.guides.items():
        if guide.enabled:
            output.guide_metrics[name] = _guide_metrics(model, kin, guide)

    if context.balance_enabled and context.ellipse is not None:
        output.balance_row = build_balance_row(model, state.q, context.ellipse, kin=kin)
    return output
