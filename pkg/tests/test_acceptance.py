"""Shipping gate: one test per acceptance criterion, in order.

Every test prints a single PASS/FAIL line with the measured numbers so a
verbose run reads as a checklist.  Tolerances, counts and time budgets are
asserted, not just reported.
"""

import asyncio
import json
import signal
import socket
import subprocess
import sys
import time
from importlib import resources

import numpy as np
import pytest

from balance_sim.balance import SupportEllipse, balance_distance, balance_jacobian
from balance_sim.com import com_jacobian, com_position
from balance_sim.harness import load_scenario, run, write_metrics
from balance_sim.lcp import LcpProblem, enumerate_lcp_oracle, solve_lcp
from balance_sim.model import Kinematics, body_jacobian, integrate_coords
from balance_sim.transforms import mat_to_quat, plane_basis, quat_conj, quat_log, quat_mul

from conftest import random_configuration
from oracles import jacobian_mismatch, random_spd_lcp

SCENARIOS = resources.files("balance_sim") / "assets" / "scenarios"
FD_EPS = 1e-6


def _verdict(name, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    line = f"{name}: {tag}" + (f"  [{detail}]" if detail else "")
    print(line)
    assert ok, line


def _scenario(name):
    return load_scenario(SCENARIOS / f"{name}.json")


# ------------------------------------------------------------------ 1

def _fd_all(model, q, ellipse, segment, local_point):
    """One FD sweep feeding all three jacobian checks.

    Each tangent direction costs exactly two forward-kinematics builds;
    com, balance distance and the body frame are read off the same pair.
    """
    n = model.n_dof
    cols_com, cols_bal, cols_body = [], [], []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        kp = Kinematics(model, integrate_coords(model, q, e, FD_EPS))
        km = Kinematics(model, integrate_coords(model, q, e, -FD_EPS))
        cp = com_position(model, None, kin=kp)
        cm = com_position(model, None, kin=km)
        cols_com.append((cp - cm) / (2 * FD_EPS))
        cols_bal.append((balance_distance(ellipse, cp) - balance_distance(ellipse, cm))
                        / (2 * FD_EPS))
        quat_p = mat_to_quat(kp.transforms[segment].R)
        quat_m = mat_to_quat(km.transforms[segment].R)
        ang = quat_log(quat_mul(quat_p, quat_conj(quat_m))) / (2 * FD_EPS)
        lin = (kp.world_point(segment, local_point)
               - km.world_point(segment, local_point)) / (2 * FD_EPS)
        cols_body.append(np.concatenate([ang, lin]))
    return (np.array(cols_com).T, np.array(cols_bal), np.array(cols_body).T)


def test_criterion_01_jacobians_match_finite_differences(humanoid):
    rng = np.random.default_rng(11)
    ellipse = SupportEllipse(center=np.zeros(3), Q_metric=np.array([[1.3, 0.2], [0.2, 2.1]]),
                             d=0.3, up_axis=np.array([0.0, 0.0, 1.0]))
    assert humanoid.n_dof >= 12
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        q = random_configuration(humanoid, rng)
        seg = int(rng.integers(0, len(humanoid.segments)))
        point = rng.normal(scale=0.2, size=3)
        fd_com, fd_bal, fd_body = _fd_all(humanoid, q, ellipse, seg, point)
        errs = (
            jacobian_mismatch(com_jacobian(humanoid, q), fd_com),
            jacobian_mismatch(balance_jacobian(humanoid, q, ellipse).ravel(), fd_bal),
            jacobian_mismatch(body_jacobian(humanoid, q, seg, point), fd_body),
        )
        worst = max(worst, *errs)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-5 and elapsed < 10.0
    _verdict("criterion 1 (jacobians vs finite differences)", ok,
             f"worst rel err {worst:.2e}, {elapsed:.1f} s for 100 configs")


# ------------------------------------------------------------------ 2

def test_criterion_02_lcp_matches_oracle():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst_dz = 0.0
    worst_res = 0.0
    for _ in range(1000):
        k = int(rng.integers(1, 9))
        M, q = random_spd_lcp(rng, k)
        problem = LcpProblem(M, q)
        got = solve_lcp(problem)
        want = enumerate_lcp_oracle(problem)
        assert got.status == "solved", got.status
        worst_dz = max(worst_dz, float(np.max(np.abs(got.z - want.z))))
        worst_res = max(worst_res, got.residual)
    elapsed = time.perf_counter() - t0
    ok = worst_dz <= 1e-8 and worst_res <= 1e-8 and elapsed < 30.0
    _verdict("criterion 2 (LCP vs exhaustive oracle)", ok,
             f"1000 problems, max |dz| {worst_dz:.2e}, max residual {worst_res:.2e}, "
             f"{elapsed:.1f} s")


# ------------------------------------------------------------------ 3

def test_criterion_03_balance_distance_point_values():
    center = np.array([0.3, -0.2, 0.0])
    Q = np.array([[1.3, 0.4], [0.4, 2.2]])
    d = 0.35
    ellipse = SupportEllipse(center=center, Q_metric=Q, d=d,
                             up_axis=np.array([0.0, 0.0, 1.0]))
    t1, t2 = plane_basis(ellipse.up_axis)
    lengths, dirs = ellipse.semi_axes()

    worst = abs(balance_distance(ellipse, center + 1.7 * ellipse.up_axis) - d * d)
    for i in range(2):
        v = lengths[i] * dirs[:, i]
        on = center + v[0] * t1 + v[1] * t2
        worst = max(worst, abs(balance_distance(ellipse, on)))
        outside = balance_distance(ellipse, center + 1.01 * (v[0] * t1 + v[1] * t2))
        ok_outside = outside < 0
        worst = max(worst, 0.0 if ok_outside else abs(outside) + 1.0)
    ok = worst < 1e-12
    _verdict("criterion 3 (delta point values)", ok, f"worst |error| {worst:.2e}")


# ------------------------------------------------------------------ 4

def test_criterion_04_retarget_run_keeps_balance():
    sc = _scenario("giant_to_dwarf")
    t0 = time.perf_counter()
    on = run(sc, balance=True)
    t_on = time.perf_counter() - t0
    t0 = time.perf_counter()
    off = run(sc, balance=False)
    t_off = time.perf_counter() - t0
    min_norm_on = float(np.min(on.column("delta_norm")))
    min_off = float(np.min(off.column("delta")))
    ok = (min_norm_on >= -1e-6 and min_off < 0
          and t_on < 60.0 and t_off < 60.0)
    _verdict("criterion 4 (balance on/off contrast)", ok,
             f"on: min delta/d^2 {min_norm_on:.2e} in {t_on:.1f} s; "
             f"off: min delta {min_off:.3f} in {t_off:.1f} s")


# ------------------------------------------------------------------ 5

def test_criterion_05_table_lean_hand_stays_on_table():
    sc = _scenario("table_lean")
    table_z = next(float(p.point[2]) for p in sc.planes if p.name == "table")
    res = run(sc)
    hand_z = res.column("z_left_hand")
    min_z = float(np.min(hand_z))
    ok = min_z >= table_z - 1e-4
    _verdict("criterion 5 (hand height vs table)", ok,
             f"min hand z {min_z:.6f} vs table {table_z:.2f}")


# ------------------------------------------------------------------ 6

def test_criterion_06_guided_drill_beats_unguided():
    guided = run(_scenario("drill"))
    unguided = run(_scenario("drill_unguided"))
    ang_g = float(np.max(guided.column("angle_work_line")))
    ang_u = float(np.max(unguided.column("angle_work_line")))
    lat = guided.column("lateral_work_line")
    rms = float(np.sqrt(np.mean(lat ** 2)))
    ok = ang_g < 0.1 * ang_u and rms < 1e-3
    _verdict("criterion 6 (virtual guide contrast)", ok,
             f"axis angle {ang_g:.4f} vs {ang_u:.4f} rad (ratio {ang_g / ang_u:.3f}), "
             f"lateral rms {rms:.2e} m")


# ------------------------------------------------------------------ 7

def test_criterion_07_standing_statics():
    sc = _scenario("standing")
    res = run(sc)
    t = res.column("t")
    settled = t >= 3.0
    assert np.any(settled)
    weight_impulse = (sum(s.mass for s in sc.avatar.segments)
                      * abs(float(sc.physics.gravity[2])) * sc.timestep)
    imp = res.column("impulse_z_sum")[settled]
    pen = res.column("max_penetration")[settled]
    lim = res.column("max_limit_violation")[settled]
    imp_err = float(np.max(np.abs(imp - weight_impulse))) / weight_impulse
    ok = imp_err <= 0.01 and float(np.max(pen)) < 1e-4 and float(np.max(lim)) < 1e-6
    _verdict("criterion 7 (standing statics)", ok,
             f"support impulse within {imp_err * 100:.2f}% of m*g*h, "
             f"penetration {float(np.max(pen)):.1e} m, "
             f"limit violation {float(np.max(lim)):.1e} rad")


# ------------------------------------------------------------------ 8

def test_criterion_08_energy_dissipates():
    sc = _scenario("standing")
    res = run(sc, balance=False)
    t = res.column("t")
    contacts = res.column("n_contacts")
    energy = res.column("energy")
    first_touch = float(t[np.argmax(contacts > 0)])
    after = t >= first_touch + 0.5
    d_e = np.diff(energy[after])
    max_rise = float(np.max(d_e))
    ok = max_rise <= 1e-6
    _verdict("criterion 8 (dissipation)", ok,
             f"max energy change {max_rise:.2e} J/step after transient")


# ------------------------------------------------------------------ 9

def test_criterion_09_metrics_deterministic(tmp_path):
    sc = _scenario("standing")
    paths = []
    for i in range(2):
        res = run(sc)
        p = tmp_path / f"run{i}.csv"
        write_metrics(res, p, sc)
        paths.append(p)
    bodies = []
    for p in paths:
        lines = p.read_bytes().split(b"\n")
        assert lines[0].startswith(b"#")
        bodies.append(b"\n".join(lines[1:]))
    ok = bodies[0] == bodies[1] and len(bodies[0]) > 0
    _verdict("criterion 9 (determinism)", ok,
             f"metrics bodies byte-identical, {len(bodies[0])} bytes")


# ------------------------------------------------------------------ 10

async def _recv_state(ws, pred, what, timeout):
    t_end = time.monotonic() + timeout
    while True:
        left = t_end - time.monotonic()
        assert left > 0, f"timed out waiting for {what}"
        frame = json.loads(await asyncio.wait_for(ws.recv(), timeout=left))
        if frame["type"] == "state" and pred(frame):
            return frame


def test_criterion_10_protocol_round_trip():
    pytest.importorskip("websockets")
    from websockets.asyncio.client import connect

    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    proc = subprocess.Popen(
        [sys.executable, "-m", "balance_sim.cli", "serve",
         "--scenario", str(SCENARIOS / "giant_to_dwarf.json"), "--port", str(port)],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)

    async def body():
        deadline = time.monotonic() + 20.0
        while True:
            try:
                probe = socket.create_connection(("127.0.0.1", port), timeout=0.5)
                probe.close()
                break
            except OSError:
                assert time.monotonic() < deadline, "server did not come up"
                await asyncio.sleep(0.2)
        async with connect(f"ws://127.0.0.1:{port}") as ws:
            hello = json.loads(await ws.recv())
            assert hello["type"] == "hello"

            n = 0
            t0 = time.monotonic()
            while time.monotonic() - t0 < 2.0:
                f = json.loads(await asyncio.wait_for(ws.recv(), timeout=2.0))
                n += f["type"] == "state"
            fps = n / 2.0

            # drag sequence, then measure reflection of the final sample
            xs = np.linspace(0.22, 0.3, 5)
            for x in xs[:-1]:
                await ws.send(json.dumps({"type": "set_target", "task": "left_hand",
                                          "pos": [float(x), 0.25, 0.9]}))
                await asyncio.sleep(0.05)
            sent = time.monotonic()
            await ws.send(json.dumps({"type": "set_target", "task": "left_hand",
                                      "pos": [float(xs[-1]), 0.25, 0.9]}))
            await _recv_state(
                ws, lambda f: abs(f["targets"]["left_hand"]["pos"][0] - xs[-1]) < 1e-9,
                "drag reflection", timeout=5.0)
            latency = time.monotonic() - sent

            await ws.send(json.dumps({"type": "toggle", "what": "balance", "on": False}))
            f = await _recv_state(ws, lambda f: f["delta"] is not None and f["delta"] < 0,
                                  "delta below zero", timeout=60.0)
            low = f["delta"]
            await ws.send(json.dumps({"type": "toggle", "what": "balance", "on": True}))
            f = await _recv_state(ws, lambda f: f["delta"] is not None and f["delta"] >= 0,
                                  "delta recovery", timeout=60.0)
            return fps, latency, low, f["delta"]

    try:
        fps, latency, low, high = asyncio.run(body())
    finally:
        proc.send_signal(signal.SIGINT)
        try:
            proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            proc.kill()
    ok = fps >= 25.0 and latency < 0.1 and low < 0 <= high
    _verdict("criterion 10 (wire protocol round trip)", ok,
             f"{fps:.1f} frames/s, drag latency {latency * 1000:.0f} ms, "
             f"delta {low:.2e} -> {high:.2e}")
