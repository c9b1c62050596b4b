"""Command line front end.

Subcommands: ``run`` a scenario to a metrics CSV, ``serve`` it live over a
WebSocket, ``solve-lcp`` a problem from a JSON file, and ``check`` a
scenario's avatar against the built-in self tests.  The BALANCE_SIM_LOG
environment variable picks the log level (debug, info, warning, error).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .dynamics import StepError
from .harness import HarnessError, load_scenario, run, write_metrics
from .lcp import LcpProblem, complementarity_residual, solve_lcp


def _setup_logging() -> None:
    level = os.environ.get("BALANCE_SIM_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    balance = False if args.no_balance else None
    result = run(scenario, balance=balance, duration=args.duration)
    if args.out:
        write_metrics(result, args.out, scenario)
    s = result.summary
    print(f"steps: {s['steps']}  sim: {s['sim_seconds']} s  wall: {s['wall_seconds']} s")
    print(f"min delta: {s['min_delta']}")
    print(f"max penetration: {s['max_penetration']} m")
    print(f"max guide angle: {s['max_guide_angle']} rad")
    return 0


def _cmd_serve(args) -> int:
    from .server import ServeOptions, serve

    scenario = load_scenario(args.scenario)
    options = ServeOptions(host=args.host, port=args.port, frame_rate=args.fps)
    serve(scenario, options)
    return 0


def _cmd_solve_lcp(args) -> int:
    with open(args.file) as f:
        doc = json.load(f)
    try:
        problem = LcpProblem(np.asarray(doc["M"], dtype=float),
                             np.asarray(doc["q"], dtype=float))
    except KeyError as e:
        print(f"input must provide M and q ({e} missing)", file=sys.stderr)
        return 2
    sol = solve_lcp(problem)
    print(f"status: {sol.status}")
    print(f"iterations: {sol.iterations}")
    print(f"residual: {sol.residual:.3e}")
    print("z:", " ".join(f"{v:.12g}" for v in sol.z))
    return 0 if sol.status == "solved" else 1


def _cmd_check(args) -> int:
    from .balance import SupportEllipse, balance_distance, balance_jacobian
    from .com import com_jacobian, com_position
    from .lcp import enumerate_lcp_oracle
    from .model import integrate_coords

    scenario = load_scenario(args.scenario)
    model = scenario.avatar
    rng = np.random.default_rng(scenario.seed or 0)
    failures = 0

    def fd_check(name, value_fn, jac, q, h=1e-6, tol=1e-5):
        nonlocal failures
        num = np.zeros_like(jac)
        for i in range(model.n_dof):
            dq = np.zeros(model.n_dof)
            dq[i] = h
            fp = value_fn(integrate_coords(model, q, dq, 1.0))
            fm = value_fn(integrate_coords(model, q, -dq, 1.0))
            num[..., i] = (fp - fm) / (2 * h)
        scale = max(1.0, float(np.abs(jac).max()))
        err = float(np.abs(num - jac).max()) / scale
        ok = err < tol
        failures += 0 if ok else 1
        print(f"{'ok' if ok else 'FAIL'}  {name}: rel err {err:.2e}")

    for trial in range(5):
        q = integrate_coords(model, model.neutral_q(),
                             rng.normal(size=model.n_dof) * 0.3, 1.0)
        fd_check(f"com_jacobian[{trial}]",
                 lambda qq: com_position(model, qq),
                 com_jacobian(model, q), q)
        ell = SupportEllipse(center=np.array([0.0, 0.0, 0.0]),
                             Q_metric=np.array([[1.3, 0.2], [0.2, 2.1]]),
                             d=0.3, up_axis=np.array([0.0, 0.0, 1.0]))
        fd_check(f"balance_jacobian[{trial}]",
                 lambda qq: np.array([balance_distance(ell, com_position(model, qq))]),
                 balance_jacobian(model, q, ell).reshape(1, -1), q)

    lcp_bad = 0
    for trial in range(20):
        k = int(rng.integers(1, 7))
        A = rng.normal(size=(k, k))
        M = A @ A.T + np.eye(k) * 0.1
        qv = rng.normal(size=k)
        p = LcpProblem(M, qv)
        got = solve_lcp(p)
        ref = enumerate_lcp_oracle(p)
        ok = (got.status == "solved"
              and complementarity_residual(p, got.z) <= 1e-8
              and np.allclose(got.z, ref.z, atol=1e-7))
        if not ok:
            lcp_bad += 1
            print(f"FAIL  lcp[{trial}]: status={got.status} residual={got.residual:.2e}")
    failures += lcp_bad
    print(f"lcp oracle: {20 - lcp_bad}/20 ok")

    print("all checks passed" if failures == 0 else f"{failures} checks failed")
    return 0 if failures == 0 else 1


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(prog="balance-sim",
                                     description="Articulated avatar balance simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="batch-simulate a scenario")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--no-balance", action="store_true",
                       help="disable the balance constraint row")
    p_run.add_argument("--duration", type=float, default=None,
                       help="override scenario duration, seconds")
    p_run.add_argument("--out", default=None, help="metrics CSV path")
    p_run.set_defaults(fn=_cmd_run)

    p_serve = sub.add_parser("serve", help="steer a scenario live over a WebSocket")
    p_serve.add_argument("--scenario", required=True)
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--fps", type=float, default=30.0,
                         help="state frames per second")
    p_serve.set_defaults(fn=_cmd_serve)

    p_lcp = sub.add_parser("solve-lcp", help="solve an LCP from a JSON file {M, q}")
    p_lcp.add_argument("--file", required=True)
    p_lcp.set_defaults(fn=_cmd_solve_lcp)

    p_check = sub.add_parser("check", help="run Jacobian and LCP self-tests")
    p_check.add_argument("--scenario", required=True)
    p_check.set_defaults(fn=_cmd_check)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (HarnessError, StepError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except RuntimeError as e:
        # covers server startup failures (busy port and friends)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
