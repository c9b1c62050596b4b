"""Kinematic tree model: segments, joints, forward kinematics, body Jacobians.

Conventions used throughout the package:

* one joint per segment, segment 0 is the root and parents precede children;
* the root joint is ``free6`` (floating) or ``fixed``; ``free6`` stores its
  orientation as a unit quaternion, so ``q`` holds 7 numbers for the root
  while only 6 velocity coordinates exist.  Spherical joints likewise store
  a quaternion (4 numbers, 3 velocity coordinates);
* root linear velocity coordinates are the world-frame velocity of the root
  origin; root and spherical angular velocity coordinates are body-frame
  angular velocity;
* Jacobians are 6 x n_dof with rows ordered (angular; linear), world frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .transforms import (
    Transform,
    plane_basis,
    quat_exp,
    quat_log,
    quat_mul,
    quat_conj,
    quat_normalize,
    quat_to_mat,
)

__all__ = [
    "Joint",
    "Segment",
    "TaskFrame",
    "AvatarModel",
    "SimState",
    "ModelError",
    "Kinematics",
    "build_kinematics",
    "forward_kinematics",
    "body_jacobian",
    "reduce_jacobian",
    "integrate_coords",
    "coordinate_difference",
    "load_avatar",
]

JOINT_KINDS = ("free6", "fixed", "revolute", "spherical")


class ModelError(ValueError):
    """Raised for malformed avatar descriptions or invalid coordinates."""


@dataclass
class Joint:
    kind: str
    axis: np.ndarray | None = None          # revolute only, unit, joint frame
    limits: tuple[float, float] | None = None  # revolute only, radians

    @property
    def nq(self) -> int:
        return {"free6": 7, "fixed": 0, "revolute": 1, "spherical": 4}[self.kind]

    @property
    def nv(self) -> int:
        return {"free6": 6, "fixed": 0, "revolute": 1, "spherical": 3}[self.kind]


@dataclass
class Segment:
    name: str
    parent: int | None
    mass: float
    local_com: np.ndarray
    inertia: np.ndarray                     # 3x3 about the CoM, segment frame
    joint_origin: Transform                 # parent frame -> joint frame
    joint: Joint
    collision_points: list[np.ndarray] = field(default_factory=list)


@dataclass
class TaskFrame:
    segment: int
    local: Transform


class AvatarModel:
    """Validated kinematic tree with precomputed coordinate bookkeeping."""

    def __init__(self, segments: list[Segment], task_frames: dict[str, TaskFrame] | None = None,
                 name: str = "avatar"):
        self.name = name
        self.segments = segments
        self.task_frames = dict(task_frames or {})
        self._validate_tree()

        self.n_seg = len(segments)
        self.q_offset = np.zeros(self.n_seg, dtype=int)
        self.v_offset = np.zeros(self.n_seg, dtype=int)
        nq = nv = 0
        for i, seg in enumerate(segments):
            self.q_offset[i] = nq
            self.v_offset[i] = nv
            nq += seg.joint.nq
            nv += seg.joint.nv
        self.n_q = nq
        self.n_dof = nv

        self.index_of = {s.name: i for i, s in enumerate(segments)}

        # dof -> owning segment, and whether the dof is a root translation
        self.dof_segment = np.zeros(self.n_dof, dtype=int)
        self.dof_is_linear = np.zeros(self.n_dof, dtype=bool)
        for i, seg in enumerate(segments):
            o = self.v_offset[i]
            self.dof_segment[o:o + seg.joint.nv] = i
            if seg.joint.kind == "free6":
                self.dof_is_linear[o:o + 3] = True

        # dof_mask[i, j] is True when dof j moves segment i
        self.dof_mask = np.zeros((self.n_seg, self.n_dof), dtype=bool)
        for i, seg in enumerate(segments):
            o = self.v_offset[i]
            self.dof_mask[i, o:o + seg.joint.nv] = True
            if seg.parent is not None:
                self.dof_mask[i] |= self.dof_mask[seg.parent]

        self.total_mass = float(sum(s.mass for s in segments))
        if self.total_mass <= 0:
            raise ModelError("total mass must be positive")

        self.coord_labels = self._coordinate_labels()

    def _validate_tree(self) -> None:
        if not self.segments:
            raise ModelError("model has no segments")
        for i, seg in enumerate(self.segments):
            if seg.joint.kind not in JOINT_KINDS:
                raise ModelError(f"segment {seg.name!r}: unknown joint kind {seg.joint.kind!r}")
            if i == 0:
                if seg.parent is not None:
                    raise ModelError("segment 0 must be the root (parent null)")
                if seg.joint.kind not in ("free6", "fixed"):
                    raise ModelError("root joint must be free6 or fixed")
            else:
                if seg.parent is None:
                    raise ModelError(f"segment {seg.name!r}: only segment 0 may be the root")
                if not 0 <= seg.parent < i:
                    raise ModelError(f"segment {seg.name!r}: parent must precede it in the list")
                if seg.joint.kind in ("free6", "fixed"):
                    raise ModelError(f"segment {seg.name!r}: {seg.joint.kind} is root-only")
            if seg.mass < 0:
                raise ModelError(f"segment {seg.name!r}: mass must be non-negative")
            inertia = np.asarray(seg.inertia, dtype=float)
            if inertia.shape != (3, 3) or not np.allclose(inertia, inertia.T, atol=1e-9):
                raise ModelError(f"segment {seg.name!r}: inertia must be a symmetric 3x3 matrix")
            if seg.joint.kind == "revolute":
                if seg.joint.axis is None or np.linalg.norm(seg.joint.axis) < 1e-9:
                    raise ModelError(f"segment {seg.name!r}: revolute joint needs a non-zero axis")
                seg.joint.axis = np.asarray(seg.joint.axis, float) / np.linalg.norm(seg.joint.axis)
                if seg.joint.limits is not None:
                    lo, hi = seg.joint.limits
                    if not lo < hi:
                        raise ModelError(f"segment {seg.name!r}: joint limits must satisfy lower < upper")
        names = [s.name for s in self.segments]
        if len(set(names)) != len(names):
            raise ModelError("segment names must be unique")
        for fname, tf in self.task_frames.items():
            if not 0 <= tf.segment < len(self.segments):
                raise ModelError(f"task frame {fname!r}: segment index out of range")

    def _coordinate_labels(self) -> list[str]:
        labels: list[str] = []
        for seg in self.segments:
            k = seg.joint.kind
            if k == "free6":
                labels += [f"{seg.name}_t{a}" for a in "xyz"] + [f"{seg.name}_r{a}" for a in "xyz"]
            elif k == "revolute":
                labels.append(seg.name)
            elif k == "spherical":
                labels += [f"{seg.name}_r{a}" for a in "xyz"]
        return labels

    def neutral_q(self) -> np.ndarray:
        """Coordinate vector with zero joint angles and identity root pose."""
        q = np.zeros(self.n_q)
        for i, seg in enumerate(self.segments):
            k = seg.joint.kind
            o = self.q_offset[i]
            if k == "free6":
                q[o + 3] = 1.0
            elif k == "spherical":
                q[o] = 1.0
        return q

    def joint_q(self, q: np.ndarray, i: int) -> np.ndarray:
        o = self.q_offset[i]
        return q[o:o + self.segments[i].joint.nq]


@dataclass
class SimState:
    q: np.ndarray
    qdot: np.ndarray
    t: float = 0.0

    def copy(self) -> "SimState":
        return SimState(self.q.copy(), self.qdot.copy(), self.t)


def _check_coords(model: AvatarModel, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (model.n_q,):
        raise ModelError(f"q must have length {model.n_q}, got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ModelError("q contains non-finite entries")
    for i, seg in enumerate(model.segments):
        if seg.joint.kind in ("free6", "spherical"):
            o = model.q_offset[i] + (3 if seg.joint.kind == "free6" else 0)
            n = np.linalg.norm(q[o:o + 4])
            if abs(n - 1.0) > 1e-6:
                raise ModelError(f"segment {seg.name!r}: quaternion norm {n:.2e} is not 1")
    return q


def _joint_motion(joint: Joint, qj: np.ndarray) -> Transform:
    if joint.kind == "fixed":
        return Transform.identity()
    if joint.kind == "revolute":
        return Transform(quat_to_mat(quat_exp(joint.axis * qj[0])), np.zeros(3))
    if joint.kind == "spherical":
        return Transform(quat_to_mat(quat_normalize(qj)), np.zeros(3))
    if joint.kind == "free6":
        return Transform(quat_to_mat(quat_normalize(qj[3:7])), np.asarray(qj[0:3], float))
    raise ModelError(f"unknown joint kind {joint.kind!r}")


class Kinematics:
    """Per-configuration cache: world segment poses and per-dof axis data.

    For dof j with world rotation axis a_j through point o_j, the velocity a
    world point p attached below j picks up is qdot_j * (a_j x p + m_j) with
    m_j = o_j x a_j; root translations use a_j = 0, m_j = world direction.
    """

    def __init__(self, model: AvatarModel, q: np.ndarray):
        q = _check_coords(model, q)
        self.model = model
        self.q = q
        self.transforms: list[Transform] = []
        for i, seg in enumerate(model.segments):
            local = seg.joint_origin.compose(_joint_motion(seg.joint, model.joint_q(q, i)))
            if seg.parent is None:
                self.transforms.append(local)
            else:
                self.transforms.append(self.transforms[seg.parent].compose(local))

        n = model.n_dof
        self.axis = np.zeros((3, n))
        self.moment = np.zeros((3, n))
        for i, seg in enumerate(model.segments):
            o = model.v_offset[i]
            T = self.transforms[i]
            k = seg.joint.kind
            if k == "revolute":
                a = T.R @ seg.joint.axis
                self.axis[:, o] = a
                self.moment[:, o] = np.cross(T.p, a)
            elif k == "spherical":
                self.axis[:, o:o + 3] = T.R
                self.moment[:, o:o + 3] = np.cross(T.p, T.R.T).T
            elif k == "free6":
                self.moment[:, o:o + 3] = np.eye(3)
                self.axis[:, o + 3:o + 6] = T.R
                self.moment[:, o + 3:o + 6] = np.cross(T.p, T.R.T).T

    def world_point(self, segment: int, local_point) -> np.ndarray:
        return self.transforms[segment].apply(local_point)

    def point_jacobian(self, segment: int, world_point: np.ndarray) -> np.ndarray:
        """6 x n_dof Jacobian (angular; linear) of a world point on a segment."""
        mask = self.model.dof_mask[segment]
        J = np.zeros((6, self.model.n_dof))
        J[0:3, mask] = self.axis[:, mask]
        lin = np.cross(self.axis[:, mask].T, world_point).T + self.moment[:, mask]
        J[3:6, mask] = lin
        return J

    def point_velocity(self, segment: int, world_point: np.ndarray, qdot: np.ndarray) -> np.ndarray:
        return self.point_jacobian(segment, world_point)[3:6] @ qdot


def build_kinematics(model: AvatarModel, q: np.ndarray) -> Kinematics:
    return Kinematics(model, q)


def forward_kinematics(model: AvatarModel, q: np.ndarray) -> list[Transform]:
    """World transform of every segment frame, root first."""
    return Kinematics(model, q).transforms


def body_jacobian(model: AvatarModel, q: np.ndarray, segment: int, local_point,
                  kin: Kinematics | None = None) -> np.ndarray:
    """6 x n_dof world-frame Jacobian of a point attached to a segment.

    Rows are ordered (angular; linear).  Columns of dofs that do not lie on
    the root-to-segment path are zero.
    """
    if not 0 <= segment < model.n_seg:
        raise ModelError(f"segment index {segment} out of range")
    kin = kin or Kinematics(model, q)
    p = kin.world_point(segment, local_point)
    return kin.point_jacobian(segment, p)


def reduce_jacobian(J6: np.ndarray) -> np.ndarray:
    """Select the linear rows: S J with S = (0_3x3 I_3)."""
    J6 = np.asarray(J6, dtype=float)
    if J6.ndim != 2 or J6.shape[0] != 6:
        raise ModelError(f"expected a 6 x n Jacobian, got shape {J6.shape}")
    return J6[3:6]


def integrate_coords(model: AvatarModel, q: np.ndarray, dq: np.ndarray, dt: float = 1.0) -> np.ndarray:
    """q "+" dt*dq: linear update on scalar coordinates, exponential on quaternions."""
    q = _check_coords(model, q)
    dq = np.asarray(dq, dtype=float)
    if dq.shape != (model.n_dof,):
        raise ModelError(f"dq must have length {model.n_dof}, got {dq.shape}")
    out = q.copy()
    for i, seg in enumerate(model.segments):
        k = seg.joint.kind
        qo, vo = model.q_offset[i], model.v_offset[i]
        if k == "revolute":
            out[qo] += dt * dq[vo]
        elif k == "spherical":
            out[qo:qo + 4] = quat_mul(q[qo:qo + 4], quat_exp(dt * dq[vo:vo + 3]))
        elif k == "free6":
            out[qo:qo + 3] += dt * dq[vo:vo + 3]
            out[qo + 3:qo + 7] = quat_mul(q[qo + 3:qo + 7], quat_exp(dt * dq[vo + 3:vo + 6]))
    for i, seg in enumerate(model.segments):
        if seg.joint.kind in ("free6", "spherical"):
            o = model.q_offset[i] + (3 if seg.joint.kind == "free6" else 0)
            out[o:o + 4] = quat_normalize(out[o:o + 4])
    return out


def coordinate_difference(model: AvatarModel, qa: np.ndarray, qb: np.ndarray) -> np.ndarray:
    """Tangent-space difference d with qb "+" d = qa (log map on quaternions)."""
    qa = _check_coords(model, qa)
    qb = _check_coords(model, qb)
    d = np.zeros(model.n_dof)
    for i, seg in enumerate(model.segments):
        k = seg.joint.kind
        qo, vo = model.q_offset[i], model.v_offset[i]
        if k == "revolute":
            d[vo] = qa[qo] - qb[qo]
        elif k == "spherical":
            d[vo:vo + 3] = quat_log(quat_mul(quat_conj(qb[qo:qo + 4]), qa[qo:qo + 4]))
        elif k == "free6":
            d[vo:vo + 3] = qa[qo:qo + 3] - qb[qo:qo + 3]
            d[vo + 3:vo + 6] = quat_log(quat_mul(quat_conj(qb[qo + 3:qo + 7]), qa[qo + 3:qo + 7]))
    return d


def _parse_transform(obj: dict | None, where: str) -> Transform:
    obj = obj or {}
    pos = obj.get("translation", [0.0, 0.0, 0.0])
    quat = obj.get("rotation", [1.0, 0.0, 0.0, 0.0])
    try:
        return Transform.from_quat_pos(quat, pos)
    except ValueError as e:
        raise ModelError(f"{where}: {e}") from e


def _parse_inertia(val, where: str) -> np.ndarray:
    arr = np.asarray(val, dtype=float)
    if arr.shape == (3,):
        return np.diag(arr)
    if arr.shape == (3, 3):
        return arr
    raise ModelError(f"{where}: inertia must be a 3-vector of diagonal terms or a 3x3 matrix")


def load_avatar(path: str | Path) -> AvatarModel:
    """Build an AvatarModel from a JSON description.

    The document holds ``segments`` (ordered, each naming its parent) and
    ``task_frames`` mapping frame names to a segment plus local transform.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ModelError(f"{path}: not valid JSON ({e})") from e

    raw_segments = doc.get("segments")
    if not isinstance(raw_segments, list) or not raw_segments:
        raise ModelError(f"{path}: 'segments' must be a non-empty list")

    name_to_index: dict[str, int] = {}
    segments: list[Segment] = []
    for i, raw in enumerate(raw_segments):
        sname = raw.get("name")
        if not sname:
            raise ModelError(f"{path}: segment {i} has no name")
        where = f"{path}: segment {sname!r}"
        parent_name = raw.get("parent")
        if parent_name is None:
            parent = None
        else:
            if parent_name not in name_to_index:
                raise ModelError(f"{where}: parent {parent_name!r} must be defined earlier")
            parent = name_to_index[parent_name]
        jraw = raw.get("joint", {})
        kind = jraw.get("kind")
        if kind not in JOINT_KINDS:
            raise ModelError(f"{where}: joint kind must be one of {JOINT_KINDS}, got {kind!r}")
        limits = jraw.get("limits")
        joint = Joint(
            kind=kind,
            axis=np.asarray(jraw["axis"], float) if "axis" in jraw else None,
            limits=tuple(float(x) for x in limits) if limits is not None else None,
        )
        segments.append(Segment(
            name=sname,
            parent=parent,
            mass=float(raw.get("mass", 0.0)),
            local_com=np.asarray(raw.get("com", [0.0, 0.0, 0.0]), float),
            inertia=_parse_inertia(raw.get("inertia", [1e-3, 1e-3, 1e-3]), where),
            joint_origin=_parse_transform(raw.get("origin"), where),
            joint=joint,
            collision_points=[np.asarray(p, float) for p in raw.get("collision_points", [])],
        ))
        name_to_index[sname] = i

    task_frames: dict[str, TaskFrame] = {}
    for fname, raw in (doc.get("task_frames") or {}).items():
        seg_name = raw.get("segment")
        if seg_name not in name_to_index:
            raise ModelError(f"{path}: task frame {fname!r} references unknown segment {seg_name!r}")
        task_frames[fname] = TaskFrame(
            segment=name_to_index[seg_name],
            local=_parse_transform(raw, f"{path}: task frame {fname!r}"),
        )

    return AvatarModel(segments, task_frames, name=doc.get("name", path.stem))
