"""Static balance as a scalar inequality on the center of mass.

The support region is an ellipse in the ground plane.  The balance measure

    delta = d^2 - || P (x_com - x_c) ||^2_Q

is positive strictly inside the ellipse, zero on its boundary and negative
outside, where P projects onto the ground plane, Q is a symmetric positive
definite 2x2 metric and d the limit distance (the major semi-axis, so the
smallest eigenvalue of Q is one).  Differentiating gives the single row

    d(delta)/dq = -(x_com - x_c)^T P^T (Q + Q^T) P J_com

used as a unilateral constraint by the time stepper.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .com import com_jacobian, com_position
from .model import AvatarModel, Kinematics
from .transforms import plane_basis

__all__ = [
    "SupportEllipse",
    "BalanceConstraintRow",
    "BalanceError",
    "fit_support_ellipse",
    "balance_distance",
    "balance_jacobian",
    "build_balance_row",
]

log = logging.getLogger("balance_sim.balance")

DEFAULT_SAFETY = 0.9


class BalanceError(ValueError):
    """Raised when a support region cannot be built."""


@dataclass
class SupportEllipse:
    center: np.ndarray          # x_c, world, lies in the ground plane
    Q_metric: np.ndarray        # 2x2 SPD in the plane basis of up_axis
    d: float                    # limit distance (major semi-axis), > 0
    up_axis: np.ndarray         # unit normal of the ground plane

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.Q_metric = np.asarray(self.Q_metric, dtype=float)
        self.up_axis = np.asarray(self.up_axis, dtype=float)
        n = np.linalg.norm(self.up_axis)
        if n < 1e-9:
            raise BalanceError("up_axis must be non-zero")
        self.up_axis = self.up_axis / n
        if self.d <= 0:
            raise BalanceError("limit distance d must be positive")
        if self.Q_metric.shape != (2, 2):
            raise BalanceError("Q_metric must be 2x2")
        sym = 0.5 * (self.Q_metric + self.Q_metric.T)
        if np.any(np.linalg.eigvalsh(sym) <= 0):
            raise BalanceError("Q_metric must be positive definite")

    def plane_projection(self) -> np.ndarray:
        """2x3 matrix P mapping world offsets to plane coordinates."""
        t1, t2 = plane_basis(self.up_axis)
        return np.vstack([t1, t2])

    def semi_axes(self) -> tuple[np.ndarray, np.ndarray]:
        """(lengths, directions): ellipse semi-axes in plane coordinates."""
        sym = 0.5 * (self.Q_metric + self.Q_metric.T)
        evals, evecs = np.linalg.eigh(sym)
        lengths = self.d / np.sqrt(evals)
        return lengths, evecs


@dataclass
class BalanceConstraintRow:
    jacobian: np.ndarray        # 1 x n_dof
    delta: float
    ellipse: SupportEllipse


def fit_support_ellipse(contact_points, up_axis=(0.0, 0.0, 1.0),
                        safety: float = DEFAULT_SAFETY) -> SupportEllipse:
    """Fit the support ellipse from ground contact points.

    The points are projected along up_axis, their convex hull taken, and the
    largest ellipse centered at the hull centroid that fits the hull's
    principal-axis bounding box is shrunk by ``safety``.  The metric is
    normalized so delta is exactly zero on the ellipse boundary and d equals
    the major semi-axis.
    """
    if not 0 < safety <= 1:
        raise BalanceError("safety must lie in (0, 1]")
    pts = np.atleast_2d(np.asarray(contact_points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise BalanceError("contact points must be an array of 3-vectors")
    if pts.shape[0] < 3:
        raise BalanceError("need at least 3 contact points to span a support region")

    up = np.asarray(up_axis, dtype=float)
    up = up / np.linalg.norm(up)
    t1, t2 = plane_basis(up)
    P = np.vstack([t1, t2])
    flat = pts @ P.T
    height = float(np.mean(pts @ up))

    try:
        hull = ConvexHull(flat)
    except QhullError as e:
        raise BalanceError(f"degenerate support: contact points are collinear ({e})") from e

    verts = flat[hull.vertices]
    # polygon area centroid
    x, y = verts[:, 0], verts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * np.sum(cross)
    if abs(area) < 1e-12:
        raise BalanceError("degenerate support: hull has zero area")
    centroid = np.array([np.sum((x + xn) * cross), np.sum((y + yn) * cross)]) / (6.0 * area)

    # principal axes of the hull polygon area (second moments about centroid)
    xc, yc = x - centroid[0], y - centroid[1]
    xcn, ycn = np.roll(xc, -1), np.roll(yc, -1)
    w = xc * ycn - xcn * yc
    sxx = np.sum(w * (xc * xc + xc * xcn + xcn * xcn)) / 12.0
    syy = np.sum(w * (yc * yc + yc * ycn + ycn * ycn)) / 12.0
    sxy = np.sum(w * (xc * ycn + 2 * xc * yc + 2 * xcn * ycn + xcn * yc)) / 24.0
    second = np.array([[sxx, sxy], [sxy, syy]]) * np.sign(area)
    _, axes = np.linalg.eigh(second)

    # largest ellipse centered at the centroid inside the principal-frame box
    local = (verts - centroid) @ axes
    semi = np.minimum(-local.min(axis=0), local.max(axis=0)) * safety
    if np.any(semi <= 1e-12):
        raise BalanceError("degenerate support: hull is flat along a principal axis")

    d = float(np.max(semi))
    Q = axes @ np.diag((d / semi) ** 2) @ axes.T
    center = centroid @ P + height * up
    return SupportEllipse(center=center, Q_metric=Q, d=d, up_axis=up)


def balance_distance(ellipse: SupportEllipse, x_com) -> float:
    """delta = d^2 - ||P (x_com - x_c)||^2_Q; positive means balanced."""
    v = np.asarray(x_com, dtype=float) - ellipse.center
    v2 = ellipse.plane_projection() @ v
    return float(ellipse.d ** 2 - v2 @ ellipse.Q_metric @ v2)


def balance_jacobian(model: AvatarModel, q: np.ndarray, ellipse: SupportEllipse,
                     kin: Kinematics | None = None) -> np.ndarray:
    """1 x n_dof row: rate of delta per unit joint velocity."""
    kin = kin or Kinematics(model, q)
    x_com = com_position(model, q, kin=kin)
    P = ellipse.plane_projection()
    v2 = P @ (x_com - ellipse.center)
    w = (ellipse.Q_metric + ellipse.Q_metric.T) @ v2
    row = -(w @ P) @ com_jacobian(model, q, kin=kin)
    return row.reshape(1, -1)


def build_balance_row(model: AvatarModel, q: np.ndarray, ellipse: SupportEllipse,
                      kin: Kinematics | None = None) -> BalanceConstraintRow:
    """Bundle delta and its Jacobian row for the time stepper."""
    kin = kin or Kinematics(model, q)
    delta = balance_distance(ellipse, com_position(model, q, kin=kin))
    row = balance_jacobian(model, q, ellipse, kin=kin)
    if delta < 0:
        log.debug("balance: delta negative (%.3e), CoM outside support ellipse", delta)
    return BalanceConstraintRow(jacobian=row, delta=delta, ellipse=ellipse)
