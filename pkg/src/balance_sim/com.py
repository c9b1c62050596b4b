"""Whole-body center of mass and its Jacobian.

Both quantities are plain mass-weighted means over the segments; the
Jacobian literally sums per-segment reduced body Jacobians taken at each
segment's local CoM, with no recursive shortcut.
"""

from __future__ import annotations

import numpy as np

from .model import AvatarModel, Kinematics, body_jacobian, reduce_jacobian

__all__ = ["com_position", "com_jacobian"]


def com_position(model: AvatarModel, q: np.ndarray, kin: Kinematics | None = None) -> np.ndarray:
    """World position of the whole-body center of mass."""
    kin = kin or Kinematics(model, q)
    acc = np.zeros(3)
    for i, seg in enumerate(model.segments):
        acc += seg.mass * kin.world_point(i, seg.local_com)
    return acc / model.total_mass


def com_jacobian(model: AvatarModel, q: np.ndarray, kin: Kinematics | None = None) -> np.ndarray:
    """3 x n_dof world-frame Jacobian of the center of mass.

    Mass-weighted mean of the reduced (linear-row) body Jacobians evaluated
    at every segment CoM, so com_jacobian @ qdot is the CoM velocity.
    """
    kin = kin or Kinematics(model, q)
    J = np.zeros((3, model.n_dof))
    for i, seg in enumerate(model.segments):
        if seg.mass == 0.0:
            continue
        J += seg.mass * reduce_jacobian(body_jacobian(model, q, i, seg.local_com, kin=kin))
    return J / model.total_mass
