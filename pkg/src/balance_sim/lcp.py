"""Linear complementarity problems: 0 <= w  perp  z >= 0 with w = M z + q.

Three solvers sit behind ``solve_lcp``: projected Gauss-Seidel for symmetric
(positive semi-definite) matrices, least-index active-set pivoting as the
rescue when the sweep stalls, and Lemke pivoting with lexicographic
tie-breaking for non-symmetric inputs.  An exhaustive active-set enumeration
is provided as a test oracle for small problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LcpProblem",
    "LcpOptions",
    "LcpSolution",
    "complementarity_residual",
    "solve_lcp",
    "enumerate_lcp_oracle",
]


@dataclass
class LcpProblem:
    M: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.M = np.atleast_2d(np.asarray(self.M, dtype=float))
        self.q = np.atleast_1d(np.asarray(self.q, dtype=float))
        k = self.q.shape[0]
        if self.M.shape != (k, k):
            raise ValueError(f"M must be {k}x{k} to match q, got {self.M.shape}")
        if not (np.all(np.isfinite(self.M)) and np.all(np.isfinite(self.q))):
            raise ValueError("LCP data contains non-finite entries")

    @property
    def size(self) -> int:
        return self.q.shape[0]


@dataclass
class LcpOptions:
    max_iter: int = 2000
    tol: float = 1e-8
    method: str = "auto"       # auto | pgs | active_set | lemke


@dataclass
class LcpSolution:
    z: np.ndarray
    status: str                # solved | infeasible | iteration_limit
    iterations: int
    residual: float


def complementarity_residual(problem: LcpProblem, z: np.ndarray) -> float:
    """max of negative-part norms of z and w, and the complementarity gap |z.w|."""
    z = np.asarray(z, dtype=float)
    w = problem.M @ z + problem.q
    neg_z = np.linalg.norm(np.minimum(z, 0.0), np.inf) if z.size else 0.0
    neg_w = np.linalg.norm(np.minimum(w, 0.0), np.inf) if z.size else 0.0
    return float(max(neg_z, neg_w, abs(z @ w)))


def _active_set_polish(problem: LcpProblem, z: np.ndarray) -> np.ndarray | None:
    """Re-solve the support identified by an iterative solver exactly."""
    active = np.nonzero(z > 1e-12)[0]
    if active.size == 0:
        return None
    M, q = problem.M, problem.q
    sub = M[np.ix_(active, active)]
    try:
        za = np.linalg.solve(sub, -q[active])
    except np.linalg.LinAlgError:
        return None
    if np.any(za < 0.0):
        return None
    out = np.zeros_like(z)
    out[active] = za
    if np.any(M @ out + q < -1e-10):
        return None
    return out


def _solve_pgs(problem: LcpProblem, opts: LcpOptions) -> LcpSolution:
    M, q = problem.M, problem.q
    k = problem.size
    z = np.zeros(k)
    diag = np.diag(M).copy()
    usable = diag > 1e-14
    checkpoint = np.inf
    for it in range(1, opts.max_iter + 1):
        for i in range(k):
            if not usable[i]:
                continue
            w_i = M[i] @ z + q[i]
            z[i] = max(0.0, z[i] - w_i / diag[i])
        res = complementarity_residual(problem, z)
        if res <= opts.tol:
            polished = _active_set_polish(problem, z)
            if polished is not None:
                pres = complementarity_residual(problem, polished)
                if pres <= res:
                    return LcpSolution(polished, "solved", it, pres)
            return LcpSolution(z, "solved", it, res)
        if it % 50 == 0:
            # bail early when the sweep stalls so the caller can fall back
            if res > 0.8 * checkpoint:
                return LcpSolution(z, "iteration_limit", it, res)
            checkpoint = res
    return LcpSolution(z, "iteration_limit", opts.max_iter, complementarity_residual(problem, z))


def _solve_active_set(problem: LcpProblem, opts: LcpOptions) -> LcpSolution:
    """Least-index principal pivoting (Murty): swap one index per iteration.

    Exact on each candidate support, so the returned z carries no iterative
    error.  Finite termination holds for P-matrices; the iteration cap covers
    everything else.  Intended for symmetric positive (semi-)definite input.
    """
    M, q = problem.M, problem.q
    k = problem.size
    viol_tol = 1e-11 * max(1.0, float(np.linalg.norm(q, np.inf)))
    active = np.zeros(k, dtype=bool)
    z = np.zeros(k)
    max_swaps = max(10 * k + 200, 2 * k)
    for it in range(1, max_swaps + 1):
        z = np.zeros(k)
        if active.any():
            idx = np.nonzero(active)[0]
            sub = M[np.ix_(idx, idx)]
            try:
                z[idx] = np.linalg.solve(sub, -q[idx])
            except np.linalg.LinAlgError:
                z[idx], *_ = np.linalg.lstsq(sub, -q[idx], rcond=None)
        w = M @ z + q
        viol = np.nonzero((active & (z < -viol_tol)) | (~active & (w < -viol_tol)))[0]
        if viol.size == 0:
            z = np.maximum(z, 0.0)
            res = complementarity_residual(problem, z)
            status = "solved" if res <= max(opts.tol, 1e-7) else "iteration_limit"
            return LcpSolution(z, status, it, res)
        active[viol[0]] = ~active[viol[0]]
    z = np.maximum(z, 0.0)
    return LcpSolution(z, "iteration_limit", max_swaps, complementarity_residual(problem, z))


def _lemke_pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _solve_lemke(problem: LcpProblem, opts: LcpOptions) -> LcpSolution:
    """Lemke's algorithm with a covering vector and lexicographic ratio test.

    Variable indices: w_i -> i, z_i -> k + i, artificial z0 -> 2k.  The w
    block of the tableau starts as the identity and doubles as the
    lexicographic perturbation columns.
    """
    M, q = problem.M, problem.q
    k = problem.size
    zero = np.zeros(k)
    if np.all(q >= 0.0):
        return LcpSolution(zero, "solved", 0, complementarity_residual(problem, zero))

    rhs = 2 * k + 1
    T = np.hstack([np.eye(k), -M, -np.ones((k, 1)), q.reshape(-1, 1)])
    basis = list(range(k))

    # initial special pivot: z0 enters, the most negative q row leaves
    row = int(np.argmin(q))
    _lemke_pivot(T, row, 2 * k)
    leaving = basis[row]
    basis[row] = 2 * k
    entering = leaving + k            # complement of the w that left

    max_pivots = max(opts.max_iter, 50 * (k + 1))
    for iterations in range(1, max_pivots + 1):
        col = T[:, entering]
        candidates = [r for r in range(k) if col[r] > 1e-12]
        if not candidates:
            # secondary ray: no solution on Lemke's path
            return LcpSolution(zero, "infeasible", iterations,
                               complementarity_residual(problem, zero))
        best_row = candidates[0]
        best = np.concatenate(([T[best_row, rhs]], T[best_row, :k])) / col[best_row]
        for r in candidates[1:]:
            ratio = np.concatenate(([T[r, rhs]], T[r, :k])) / col[r]
            diff = ratio - best
            nz = np.nonzero(np.abs(diff) > 1e-12)[0]
            if nz.size and diff[nz[0]] < 0:
                best, best_row = ratio, r
        row = best_row
        _lemke_pivot(T, row, entering)
        leaving = basis[row]
        basis[row] = entering
        if leaving == 2 * k:
            z = np.zeros(k)
            for r, b in enumerate(basis):
                if k <= b < 2 * k:
                    z[b - k] = max(T[r, rhs], 0.0)
            res = complementarity_residual(problem, z)
            status = "solved" if res <= max(opts.tol, 1e-7) else "iteration_limit"
            return LcpSolution(z, status, iterations, res)
        entering = leaving + k if leaving < k else leaving - k

    z = np.zeros(k)
    for r, b in enumerate(basis):
        if k <= b < 2 * k:
            z[b - k] = max(T[r, rhs], 0.0)
    return LcpSolution(z, "iteration_limit", max_pivots, complementarity_residual(problem, z))


def solve_lcp(problem: LcpProblem, opts: LcpOptions | None = None) -> LcpSolution:
    """Solve the LCP, choosing among Gauss-Seidel, active-set and Lemke.

    ``auto`` leads with least-index active-set pivoting on symmetric input:
    exact supports, and at the row counts a contact frame produces each swap
    is a cheap dense solve.  Degenerate frames (rigid soles, grip pairs,
    saturated balance row) can make it cycle, so Lemke rescues those, and a
    Gauss-Seidel sweep is the final fallback before reporting the best
    residual seen.  Non-symmetric input goes straight to Lemke.
    """
    opts = opts or LcpOptions()
    if problem.size == 0:
        return LcpSolution(np.zeros(0), "solved", 0, 0.0)
    if opts.method == "pgs":
        return _solve_pgs(problem, opts)
    if opts.method == "active_set":
        return _solve_active_set(problem, opts)
    if opts.method == "lemke":
        return _solve_lemke(problem, opts)
    if opts.method != "auto":
        raise ValueError(f"unknown LCP method {opts.method!r}")
    symmetric = np.allclose(problem.M, problem.M.T, atol=1e-10, rtol=1e-8)
    if symmetric:
        sol = _solve_active_set(problem, opts)
        if sol.status == "solved":
            return sol
        rescue = _solve_lemke(problem, opts)
        if rescue.status == "solved":
            return rescue
        sweep = _solve_pgs(problem, opts)
        return min((sol, rescue, sweep), key=lambda s: s.residual)
    return _solve_lemke(problem, opts)


def enumerate_lcp_oracle(problem: LcpProblem, tol: float = 1e-10) -> LcpSolution:
    """Exhaustive active-set search; exponential, intended for k <= 12 tests.

    Tries every support pattern, solving M[a,a] z_a = -q_a and accepting the
    first pattern whose z and w are non-negative within tol.
    """
    k = problem.size
    if k > 12:
        raise ValueError("enumeration oracle is limited to 12 rows")
    M, q = problem.M, problem.q
    for pattern in range(2 ** k):
        active = [i for i in range(k) if pattern >> i & 1]
        z = np.zeros(k)
        if active:
            sub = M[np.ix_(active, active)]
            rhs = -q[active]
            try:
                za = np.linalg.solve(sub, rhs)
            except np.linalg.LinAlgError:
                za, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
                if not np.allclose(sub @ za, rhs, atol=1e-9):
                    continue
            if np.any(za < -tol):
                continue
            z[active] = np.maximum(za, 0.0)
        w = M @ z + q
        if np.all(w >= -tol):
            return LcpSolution(z, "solved", pattern + 1, complementarity_residual(problem, z))
    return LcpSolution(np.zeros(k), "infeasible", 2 ** k, complementarity_residual(problem, np.zeros(k)))
