"""Independent cross-checks used by the unit and acceptance tests.

Everything here deliberately avoids the package's own Jacobian code paths:
finite differences go through forward kinematics only, and the symbolic
chain is built from scratch with sympy.
"""

import numpy as np

from balance_sim.model import Kinematics, integrate_coords
from balance_sim.transforms import mat_to_quat, quat_conj, quat_log, quat_mul

FD_EPS = 1e-6


def fd_vector_jacobian(model, q, func, eps=FD_EPS):
    """Central finite differences of func(q) along tangent directions."""
    cols = []
    for j in range(model.n_dof):
        e = np.zeros(model.n_dof)
        e[j] = 1.0
        fp = func(integrate_coords(model, q, e, eps))
        fm = func(integrate_coords(model, q, e, -eps))
        cols.append((fp - fm) / (2.0 * eps))
    return np.array(cols).T


def fd_frame_jacobian(model, q, segment, local_point, eps=FD_EPS):
    """6 x n finite-difference Jacobian (angular; linear) of a body frame point."""

    def frame(qq):
        kin = Kinematics(model, qq)
        T = kin.transforms[segment]
        return mat_to_quat(T.R), kin.world_point(segment, local_point)

    cols = []
    for j in range(model.n_dof):
        e = np.zeros(model.n_dof)
        e[j] = 1.0
        quat_p, pos_p = frame(integrate_coords(model, q, e, eps))
        quat_m, pos_m = frame(integrate_coords(model, q, e, -eps))
        ang = quat_log(quat_mul(quat_p, quat_conj(quat_m))) / (2.0 * eps)
        lin = (pos_p - pos_m) / (2.0 * eps)
        cols.append(np.concatenate([ang, lin]))
    return np.array(cols).T


def jacobian_mismatch(J, J_fd):
    """Relative error with an absolute floor, as used by the acceptance gate."""
    return np.linalg.norm(J - J_fd) / max(1.0, np.linalg.norm(J_fd))


def random_spd_lcp(rng, k):
    """Random strictly positive definite LCP of the acceptance family."""
    A = rng.normal(size=(k, k))
    M = A.T @ A + 0.1 * np.eye(k)
    q = rng.normal(size=k)
    return M, q
