"""Articulated rigid-body dynamics and the velocity-level time stepper.

The equations of motion are M(q) qddot + bias(q, qdot) = tau + J_u^T lambda
with unilateral rows J_u collecting ground contacts, joint limits and the
balance constraint.  A step solves, at the velocity-impulse level,

    v_free = qdot + h M^-1 (tau - bias)
    0 <= z  perp  J_u M^-1 J_u^T z + J_u v_free + stabilization terms >= 0
    qdot'  = v_free + M^-1 J_u^T z
    q'     = q (+) h qdot'

i.e. semi-implicit Euler with impulses from one LCP over all active rows.
Contacts are frictionless in the normal direction; touching contacts also
pin the tangential point velocity (no-slip grip) through paired rows, which
keeps the feet planted so internal torques can move the center of mass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .balance import BalanceConstraintRow
from .lcp import LcpOptions, LcpProblem, solve_lcp
from .model import AvatarModel, Kinematics, SimState, integrate_coords
from .transforms import plane_basis

__all__ = [
    "EnvironmentPlane",
    "Contact",
    "UnilateralRow",
    "UnilateralSystem",
    "StepConfig",
    "StepReport",
    "StepError",
    "mass_matrix",
    "bias_forces",
    "detect_contacts",
    "joint_limit_rows",
    "assemble_lcp",
    "step",
]

log = logging.getLogger("balance_sim.dynamics")

MAX_TIMESTEP = 0.02


class StepError(RuntimeError):
    """A step could not be completed (bad input or LCP failure)."""


@dataclass
class EnvironmentPlane:
    name: str
    point: np.ndarray
    normal: np.ndarray
    # optional rectangular extent: half sizes along u_axis and normal x u_axis
    half_u: float | None = None
    half_v: float | None = None
    u_axis: np.ndarray | None = None
    # bounded patches only: a point deeper than this entered from the side or
    # below, not through the surface, and gets no contact row
    capture_depth: float = 0.05

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        self.normal = np.asarray(self.normal, dtype=float)
        n = np.linalg.norm(self.normal)
        if n < 1e-9:
            raise ValueError(f"plane {self.name!r}: normal must be non-zero")
        self.normal = self.normal / n
        if self.u_axis is not None:
            u = np.asarray(self.u_axis, dtype=float)
            u = u - np.dot(u, self.normal) * self.normal
            nu = np.linalg.norm(u)
            if nu < 1e-9:
                raise ValueError(f"plane {self.name!r}: u_axis is parallel to the normal")
            self.u_axis = u / nu

    def tangent_frame(self) -> tuple[np.ndarray, np.ndarray]:
        if self.u_axis is not None:
            return self.u_axis, np.cross(self.normal, self.u_axis)
        return plane_basis(self.normal)

    def contains(self, point: np.ndarray) -> bool:
        if self.half_u is None:
            return True
        u, v = self.tangent_frame()
        rel = point - self.point
        return abs(rel @ u) <= self.half_u and abs(rel @ v) <= (self.half_v or self.half_u)


@dataclass
class Contact:
    segment: int
    local_point: np.ndarray
    world_point: np.ndarray
    normal: np.ndarray
    gap: float
    plane: str
    impulse: float = 0.0


@dataclass
class UnilateralRow:
    kind: str                  # balance | contact | contact_tangent | joint_limit_lower | joint_limit_upper
    jacobian: np.ndarray       # length n_dof
    gap: float
    stabilization: float       # gap feedback coefficient used in q-hat
    label: str = ""
    contact: Contact | None = None


@dataclass
class UnilateralSystem:
    rows: list[UnilateralRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def jacobian(self, n_dof: int) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, n_dof))
        return np.vstack([r.jacobian.reshape(1, -1) for r in self.rows])

    def gaps(self) -> np.ndarray:
        return np.array([r.gap for r in self.rows])


@dataclass
class StepConfig:
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    contact_margin: float = 0.005        # m, activation window for contact rows
    limit_margin: float = 0.05           # rad, activation window for limit rows
    baumgarte: float = 0.2               # gap feedback for contacts and limits
    balance_stabilization: float = 0.0   # extra delta-rate damping on the balance row
    balance_margin_frac: float = 0.01    # inner margin as a fraction of d^2
    grip: bool = True                    # pin tangential velocity of touching contacts
    # a contact this close is "touching"; keep the window tight, a gripping
    # point that carries no normal load can transmit phantom shear
    grip_margin: float = 1e-4
    velocity_cap: float = 10.0           # sanity clamp on qdot entries
    # bound on the push-out rate any single row's gap feedback may request;
    # a deep gap otherwise converts directly into a launch-grade impulse
    max_correction_velocity: float = 2.0
    constraint_reg: float = 1e-10        # relative Delassus diagonal compliance
    # viscous joint damping folded into the velocity solve, N*m*s per
    # articulated dof.  Damping applied through the torque vector flips sign
    # step to step once h*c exceeds a dof's inertia (arm twist axes sit near
    # 2e-3 kg*m^2); the implicit form is unconditionally stable.
    joint_friction: float = 0.0
    # the auto chain leads with the exact active-set solve and falls back to
    # pivoting and sweep methods on the degenerate grip-saturated frames
    # where any single method can cycle
    lcp: LcpOptions = field(default_factory=lambda: LcpOptions(method="auto"))

    def __post_init__(self):
        self.gravity = np.asarray(self.gravity, dtype=float)


@dataclass
class StepReport:
    contacts: list[Contact]
    rows: list[UnilateralRow]
    impulses: np.ndarray
    residual: float
    iterations: int
    clamped: bool
    balance_delta: float | None
    balance_impulse: float


def mass_matrix(model: AvatarModel, q: np.ndarray, kin: Kinematics | None = None) -> np.ndarray:
    """Joint-space mass matrix, n_dof x n_dof, symmetric positive definite.

    Built as the sum over segments of J^T I J at each segment CoM, which is
    the kinetic-energy form of the composite-rigid-body matrix.
    """
    kin = kin or Kinematics(model, q)
    n = model.n_dof
    M = np.zeros((n, n))
    for i, seg in enumerate(model.segments):
        J = kin.point_jacobian(i, kin.world_point(i, seg.local_com))
        Jw, Jv = J[0:3], J[3:6]
        R = kin.transforms[i].R
        I_w = R @ seg.inertia @ R.T
        M += seg.mass * (Jv.T @ Jv) + Jw.T @ (I_w @ Jw)
    return 0.5 * (M + M.T)


def _spatial_cross_motion(V: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Motion-vector cross product in world-origin coordinates."""
    w, v = V[:3], V[3:]
    a, m = S[:3], S[3:]
    return np.concatenate([np.cross(w, a), np.cross(w, m) + np.cross(v, a)])


def bias_forces(model: AvatarModel, q: np.ndarray, qdot: np.ndarray, gravity,
                kin: Kinematics | None = None) -> np.ndarray:
    """Coriolis, centrifugal and gravity torques: the recursive Newton-Euler
    evaluation with zero joint acceleration, in world-origin coordinates."""
    kin = kin or Kinematics(model, q)
    qdot = np.asarray(qdot, dtype=float)
    if qdot.shape != (model.n_dof,):
        raise StepError(f"qdot must have length {model.n_dof}")
    g = np.asarray(gravity, dtype=float)

    n_seg = model.n_seg
    V = np.zeros((n_seg, 6))
    A = np.zeros((n_seg, 6))
    S_all = np.vstack([kin.axis, kin.moment])          # 6 x n_dof

    for i, seg in enumerate(model.segments):
        o, nv = model.v_offset[i], seg.joint.nv
        Vi = V[seg.parent].copy() if seg.parent is not None else np.zeros(6)
        Ai = A[seg.parent].copy() if seg.parent is not None else np.zeros(6)
        for j in range(o, o + nv):
            Vi += S_all[:, j] * qdot[j]
        for j in range(o, o + nv):
            if not model.dof_is_linear[j]:
                # axes are fixed in the child body, so S evolves with Vi
                Ai += _spatial_cross_motion(Vi, S_all[:, j]) * qdot[j]
        V[i], A[i] = Vi, Ai

    # wrench each body needs to sustain (V, A) against gravity, world origin
    F = np.zeros((n_seg, 6))                            # (torque about origin; force)
    for i, seg in enumerate(model.segments):
        c = kin.world_point(i, seg.local_com)
        w, v_o = V[i, :3], V[i, 3:]
        wd, a_o = A[i, :3], A[i, 3:]
        v_c = v_o + np.cross(w, c)
        a_c = a_o + np.cross(wd, c) + np.cross(w, v_c)
        R = kin.transforms[i].R
        I_w = R @ seg.inertia @ R.T
        f = seg.mass * (a_c - g)
        tau_c = I_w @ wd + np.cross(w, I_w @ w)
        F[i, :3] = tau_c + np.cross(c, f)
        F[i, 3:] = f

    for i in range(n_seg - 1, 0, -1):
        F[model.segments[i].parent] += F[i]

    bias = np.zeros(model.n_dof)
    for i, seg in enumerate(model.segments):
        o, nv = model.v_offset[i], seg.joint.nv
        for j in range(o, o + nv):
            bias[j] = S_all[:3, j] @ F[i, :3] + S_all[3:, j] @ F[i, 3:]
    return bias


def detect_contacts(model: AvatarModel, q: np.ndarray, planes: list[EnvironmentPlane],
                    margin: float = 0.005, kin: Kinematics | None = None,
                    qdot: np.ndarray | None = None, horizon: float = 0.0) -> list[Contact]:
    """Collision points within ``margin`` of a plane (or crossing it within
    ``horizon`` seconds when a velocity is supplied).  Gaps may be negative."""
    kin = kin or Kinematics(model, q)
    contacts: list[Contact] = []
    for i, seg in enumerate(model.segments):
        for lp in seg.collision_points:
            p = kin.world_point(i, lp)
            vel = None
            for plane in planes:
                gap = float(plane.normal @ (p - plane.point))
                if gap >= margin:
                    if qdot is None or horizon <= 0.0:
                        continue
                    if vel is None:
                        vel = kin.point_velocity(i, p, qdot)
                    if gap + horizon * float(plane.normal @ vel) >= 0.0:
                        continue
                if plane.half_u is not None and gap < -plane.capture_depth:
                    continue
                if not plane.contains(p):
                    continue
                contacts.append(Contact(
                    segment=i, local_point=lp, world_point=p,
                    normal=plane.normal, gap=gap, plane=plane.name,
                ))
    return contacts


def joint_limit_rows(model: AvatarModel, q: np.ndarray, margin: float = 0.05,
                     stabilization: float = 0.2) -> list[UnilateralRow]:
    """One row per revolute coordinate within ``margin`` of a limit.

    The stabilization coefficient admits an approach speed of
    stabilization * gap / h, so the joint glides into the stop instead of
    freezing at the activation boundary.
    """
    rows: list[UnilateralRow] = []
    n = model.n_dof
    for i, seg in enumerate(model.segments):
        if seg.joint.kind != "revolute" or seg.joint.limits is None:
            continue
        qi = float(q[model.q_offset[i]])
        vi = model.v_offset[i]
        lo, hi = seg.joint.limits
        if qi - lo < margin:
            row = np.zeros(n)
            row[vi] = 1.0
            rows.append(UnilateralRow("joint_limit_lower", row, qi - lo, stabilization,
                                      label=seg.name))
        if hi - qi < margin:
            row = np.zeros(n)
            row[vi] = -1.0
            rows.append(UnilateralRow("joint_limit_upper", row, hi - qi, stabilization,
                                      label=seg.name))
    return rows


def _contact_rows(contacts: list[Contact], kin: Kinematics, config: StepConfig) -> list[UnilateralRow]:
    rows: list[UnilateralRow] = []
    for c in contacts:
        Jlin = kin.point_jacobian(c.segment, c.world_point)[3:6]
        rows.append(UnilateralRow("contact", c.normal @ Jlin, c.gap, config.baumgarte,
                                  label=c.plane, contact=c))
        if config.grip and c.gap < config.grip_margin:
            t1, t2 = plane_basis(c.normal)
            for t in (t1, t2):
                jt = t @ Jlin
                rows.append(UnilateralRow("contact_tangent", jt, 0.0, 0.0, label=c.plane, contact=c))
                rows.append(UnilateralRow("contact_tangent", -jt, 0.0, 0.0, label=c.plane, contact=c))
    return rows


@dataclass
class AssembledLcp:
    problem: LcpProblem
    v_free: np.ndarray
    J: np.ndarray             # rows x n_dof
    Minv_JT: np.ndarray       # n_dof x rows


def assemble_lcp(model: AvatarModel, state: SimState, M_mass: np.ndarray,
                 applied: np.ndarray, unilateral: UnilateralSystem, h: float,
                 bias: np.ndarray | None = None, gravity=(0.0, 0.0, -9.81),
                 kin: Kinematics | None = None, reg: float = 1e-10,
                 friction: np.ndarray | None = None,
                 damping: np.ndarray | None = None,
                 max_correction: float = 2.0) -> AssembledLcp:
    """Delassus-operator LCP over the active rows.

    M = J_u M_mass^-1 J_u^T and q-hat = J_u v_free + (1/h) stabilization*gap
    per row, so the dual z is an impulse and J_u^T z a generalized impulse.
    Redundant rows (several corners of one rigid sole, grip pairs) make the
    Delassus matrix singular; ``reg`` adds a relative diagonal compliance so
    pivoting solvers stay definite.  The induced constraint slack is of order
    reg * |z|, far below every stabilization term.

    ``friction`` holds per-dof viscous coefficients and ``damping`` a full
    PSD velocity-feedback operator; both integrate implicitly:
    (M + h (diag(c) + D)) v+ = M v + h (applied - bias), and the same
    operator shapes the impulse response.
    """
    if bias is None:
        bias = bias_forces(model, state.q, state.qdot, gravity, kin=kin)
    visc = None
    if friction is not None and np.any(friction):
        visc = np.diag(friction)
    if damping is not None and np.any(damping):
        visc = damping if visc is None else visc + damping
    if visc is not None:
        cho = cho_factor(M_mass + h * visc)
        v_free = cho_solve(cho, M_mass @ state.qdot + h * (applied - bias))
    else:
        cho = cho_factor(M_mass)
        v_free = state.qdot + h * cho_solve(cho, applied - bias)
    J = unilateral.jacobian(model.n_dof)
    if len(unilateral) == 0:
        return AssembledLcp(LcpProblem(np.zeros((0, 0)), np.zeros(0)), v_free, J,
                            np.zeros((model.n_dof, 0)))
    Minv_JT = cho_solve(cho, J.T)
    M_lcp = J @ Minv_JT
    if reg > 0.0:
        d = np.diag(M_lcp)
        M_lcp[np.diag_indices_from(M_lcp)] = d + reg * np.maximum(1.0, d)
    stab = np.array([r.stabilization * r.gap for r in unilateral.rows]) / h
    # positive gaps only meter the approach speed; negative ones demand a
    # push-out, which must stay bounded no matter how deep the violation
    np.maximum(stab, -max_correction, out=stab)
    q_hat = J @ v_free + stab
    return AssembledLcp(LcpProblem(M_lcp, q_hat), v_free, J, Minv_JT)


def step(model: AvatarModel, state: SimState, applied: np.ndarray,
         planes: list[EnvironmentPlane], h: float, config: StepConfig | None = None,
         balance_row: BalanceConstraintRow | None = None,
         kin: Kinematics | None = None,
         M_mass: np.ndarray | None = None,
         damping: np.ndarray | None = None) -> tuple[SimState, StepReport]:
    """Advance one semi-implicit Euler step with unilateral impulses.

    ``damping`` is an optional PSD velocity-feedback operator (controller
    damping gains) folded into the implicit velocity solve.
    """
    config = config or StepConfig()
    if not 0.0 < h <= MAX_TIMESTEP:
        raise StepError(f"timestep must lie in (0, {MAX_TIMESTEP}], got {h}")
    applied = np.asarray(applied, dtype=float)
    if applied.shape != (model.n_dof,):
        raise StepError(f"applied torque must have length {model.n_dof}")

    kin = kin or Kinematics(model, state.q)
    M = mass_matrix(model, state.q, kin=kin) if M_mass is None else M_mass
    bias = bias_forces(model, state.q, state.qdot, config.gravity, kin=kin)

    contacts = detect_contacts(model, state.q, planes, margin=config.contact_margin,
                               kin=kin, qdot=state.qdot, horizon=1.5 * h)
    system = UnilateralSystem()
    balance_delta = None
    if balance_row is not None:
        balance_delta = balance_row.delta
        margin = config.balance_margin_frac * balance_row.ellipse.d ** 2
        stab_gap = balance_row.delta - margin
        j_bal = np.asarray(balance_row.jacobian, dtype=float).ravel()
        extra = config.balance_stabilization * float(j_bal @ state.qdot)
        system.rows.append(UnilateralRow(
            "balance", j_bal, stab_gap + h * extra, 1.0, label="balance"))
    system.rows.extend(_contact_rows(contacts, kin, config))
    system.rows.extend(joint_limit_rows(model, state.q, margin=config.limit_margin,
                                        stabilization=config.baumgarte))

    friction = None
    if config.joint_friction > 0.0:
        friction = np.full(model.n_dof, config.joint_friction)
        root = model.segments[0]
        if root.joint.kind == "free6":
            o = model.v_offset[0]
            friction[o:o + 6] = 0.0      # nothing for the base to rub against
    asm = assemble_lcp(model, state, M, applied, system, h, bias=bias, kin=kin,
                       reg=config.constraint_reg, friction=friction, damping=damping,
                       max_correction=config.max_correction_velocity)

    impulses = np.zeros(len(system))
    residual = 0.0
    iterations = 0
    if len(system):
        sol = solve_lcp(asm.problem, config.lcp)
        if sol.status == "infeasible" or sol.residual > max(10 * config.lcp.tol, 1e-7):
            raise StepError(
                f"LCP failed at t={state.t:.4f}: status={sol.status} residual={sol.residual:.2e} "
                f"({len(system)} rows)")
        impulses = sol.z
        residual = sol.residual
        iterations = sol.iterations
        v_new = asm.v_free + asm.Minv_JT @ sol.z
    else:
        v_new = asm.v_free

    clamped = bool(np.any(np.abs(v_new) > config.velocity_cap))
    if clamped:
        log.warning("velocity cap %.1f hit at t=%.4f; clamping", config.velocity_cap, state.t)
        v_new = np.clip(v_new, -config.velocity_cap, config.velocity_cap)

    q_new = integrate_coords(model, state.q, v_new, h)
    new_state = SimState(q_new, v_new, state.t + h)

    balance_impulse = 0.0
    for r, z in zip(system.rows, impulses):
        if r.kind == "contact" and r.contact is not None:
            r.contact.impulse = float(z)
        elif r.kind == "balance":
            balance_impulse = float(z)
    report = StepReport(contacts=contacts, rows=system.rows, impulses=impulses,
                        residual=residual, iterations=iterations, clamped=clamped,
                        balance_delta=balance_delta, balance_impulse=balance_impulse)
    return new_state, report
