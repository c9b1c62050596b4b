"""Real-time steering server.

Runs one simulation session wall-clock paced on a worker thread and speaks
JSON text frames over a WebSocket.  The physics loop and the network side
share nothing but two hand-off points: a last-write-wins mailbox for inbound
steering, and per-client bounded frame queues that drop the oldest frame
rather than ever blocking the stepper.

The first connected client steers; later clients watch.  Steering rights
pass to the oldest remaining connection when the steerer leaves.
"""

from __future__ import annotations

import asyncio
import json
import logging
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .control import control_step
from .dynamics import StepError, mass_matrix, step
from .harness import Scenario, build_context
from .model import Kinematics, SimState
from .balance import balance_distance
from .com import com_position
from .transforms import mat_to_quat

log = logging.getLogger("balance_sim.server")

PROTOCOL_VERSION = 1


class ServeError(RuntimeError):
    """Startup or session failure of the steering server."""


@dataclass
class ServeOptions:
    host: str = "127.0.0.1"
    port: int = 8765
    frame_rate: float = 30.0       # state frames per wall second
    queue_depth: int = 8           # frames buffered per laggard client


@dataclass
class _Mailbox:
    """Inbound steering commands; the stepper drains it once per step."""
    lock: threading.Lock = field(default_factory=threading.Lock)
    targets: dict[str, np.ndarray] = field(default_factory=dict)
    toggles: dict[str, bool] = field(default_factory=dict)
    reset: bool = False

    def post_target(self, task: str, pos) -> None:
        with self.lock:
            self.targets[task] = np.asarray(pos, dtype=float)

    def post_toggle(self, what: str, on: bool) -> None:
        with self.lock:
            self.toggles[what] = bool(on)

    def post_reset(self) -> None:
        with self.lock:
            self.reset = True

    def drain(self):
        with self.lock:
            out = (self.targets, self.toggles, self.reset)
            self.targets, self.toggles, self.reset = {}, {}, False
        return out


class _Session:
    """Wall-clock paced simulation of one scenario."""

    def __init__(self, scenario: Scenario, options: ServeOptions):
        self.scenario = scenario
        self.options = options
        self.mailbox = _Mailbox()
        self.stop = threading.Event()
        self._frame_sink = None       # set by the server: fn(frame_text)
        self._steered: set[str] = set()   # tasks taken over from the stream
        self._reset()

    def _reset(self) -> None:
        sc = self.scenario
        self.ctx = build_context(sc, sc.balance_enabled)
        self.state = SimState(sc.initial_q.copy(), np.zeros(sc.avatar.n_dof), 0.0)
        self.kin = Kinematics(sc.avatar, self.state.q)
        self.M = mass_matrix(sc.avatar, self.state.q, kin=self.kin)
        self._steered.clear()
        ell = self.ctx.ellipse
        self.ellipse_doc = None if ell is None else _ellipse_doc(ell)

    def _apply_mail(self) -> None:
        targets, toggles, do_reset = self.mailbox.drain()
        if do_reset:
            self._reset()
            return
        for task, pos in targets.items():
            tgt = self.ctx.targets.get(task)
            if tgt is None:
                continue
            tgt.position = pos
            # the operator owns this task now; the recording lets go
            self._steered.add(task)
        for what, on in toggles.items():
            if what == "balance":
                self.ctx.balance_enabled = on
            elif what.startswith("guide:"):
                g = self.ctx.guides.get(what.split(":", 1)[1])
                if g is not None:
                    g.enabled = on

    def loop(self) -> None:
        sc = self.scenario
        h = sc.timestep
        frame_gap = 1.0 / self.options.frame_rate
        t0 = time.monotonic()
        sim_elapsed = 0.0
        last_frame = 0.0
        while not self.stop.is_set():
            self._apply_mail()
            if sc.stream is not None:
                live = {k: v for k, v in sc.stream.sample(self.state.t).items()
                        if k not in self._steered}
                for task, (pos, quat) in live.items():
                    tgt = self.ctx.targets.get(task)
                    if tgt is not None:
                        tgt.position = pos
                        if quat is not None:
                            tgt.orientation = quat
            cout = control_step(sc.avatar, self.state, self.ctx, M_mass=self.M, kin=self.kin)
            try:
                new_state, report = step(sc.avatar, self.state, cout.torques, sc.planes, h,
                                         config=sc.physics, balance_row=cout.balance_row,
                                         kin=self.kin, M_mass=self.M, damping=cout.damping)
            except StepError as e:
                log.error("step failed (%s); session reset", e)
                self._reset()
                continue
            self.state = new_state
            self.kin = Kinematics(sc.avatar, new_state.q)
            self.M = mass_matrix(sc.avatar, new_state.q, kin=self.kin)

            now = time.monotonic()
            if self._frame_sink is not None and now - last_frame >= frame_gap:
                last_frame = now
                self._frame_sink(self._frame(report))

            sim_elapsed += h
            ahead = t0 + sim_elapsed - time.monotonic()
            if ahead > 0:
                time.sleep(ahead)
            elif ahead < -0.25:
                # the stepper fell behind; forgive the debt instead of racing
                t0 = time.monotonic() - sim_elapsed

    def _frame(self, report) -> str:
        sc = self.scenario
        com = com_position(sc.avatar, self.state.q, kin=self.kin)
        ell = self.ctx.ellipse
        delta = balance_distance(ell, com) if ell is not None else None
        joints = []
        for i, seg in enumerate(sc.avatar.segments):
            tr = self.kin.transforms[i]
            joints.append({"name": seg.name,
                           "pos": [round(float(x), 5) for x in tr.p],
                           "quat": [round(float(x), 6) for x in mat_to_quat(tr.R)]})
        contacts = [[round(float(x), 5) for x in c.world_point]
                    for c in report.contacts]
        targets = {name: {"pos": [round(float(x), 5) for x in t.position],
                          "enabled": bool(t.enabled)}
                   for name, t in self.ctx.targets.items()}
        frame = {
            "type": "state",
            "t": round(self.state.t, 6),
            "joints": joints,
            "com": [round(float(x), 6) for x in com],
            "delta": None if delta is None else round(float(delta), 9),
            "delta_norm": None if delta is None else round(float(delta / ell.d ** 2), 6),
            "balance": bool(self.ctx.balance_enabled),
            "ellipse": self.ellipse_doc,
            "contacts": contacts,
            "targets": targets,
        }
        return json.dumps(frame)


def _ellipse_doc(ell) -> dict:
    """Drawable form: world center, semi-axis lengths, major-axis angle.

    The angle lives in the support-plane basis (world x, y for a level
    floor); axes are sorted major first so the angle names the long axis.
    """
    lengths, dirs = ell.semi_axes()
    order = np.argsort(lengths)[::-1]
    major = dirs[:, order[0]]
    return {
        "center": [round(float(x), 6) for x in ell.center],
        "axes": [round(float(lengths[i]), 6) for i in order],
        "angle": round(float(np.arctan2(major[1], major[0])), 6),
        "d": float(ell.d),
    }


def _hello(scenario: Scenario, session: _Session, steering: bool) -> str:
    doc = {
        "type": "hello",
        "protocol": PROTOCOL_VERSION,
        "scenario": scenario.name,
        "steering": steering,
        "timestep": scenario.timestep,
        "tasks": sorted(scenario.targets),
        "guides": sorted(scenario.guides),
        "segments": [{"name": s.name,
                      "parent": None if s.parent is None else scenario.avatar.segments[s.parent].name}
                     for s in scenario.avatar.segments],
        "planes": [{"name": p.name,
                    "point": [float(x) for x in p.point],
                    "normal": [float(x) for x in p.normal]}
                   for p in scenario.planes],
        "ellipse": session.ellipse_doc,
    }
    return json.dumps(doc)


def _error_frame(message: str) -> str:
    return json.dumps({"type": "error", "message": message})


class SteeringServer:
    """Owns the session thread and the WebSocket endpoint."""

    def __init__(self, scenario: Scenario, options: ServeOptions | None = None):
        self.scenario = scenario
        self.options = options or ServeOptions()
        self.session = _Session(scenario, self.options)
        self._clients: dict = {}          # connection -> asyncio.Queue
        self._order: list = []            # connection order; head steers
        self._loop: asyncio.AbstractEventLoop | None = None

    # -- frame fan-out -------------------------------------------------

    def _broadcast(self, text: str) -> None:
        for q in self._clients.values():
            if q.full():
                try:
                    q.get_nowait()
                except asyncio.QueueEmpty:
                    pass
            q.put_nowait(text)

    def _sink(self, text: str) -> None:
        if self._loop is not None:
            self._loop.call_soon_threadsafe(self._broadcast, text)

    # -- client lifecycle ----------------------------------------------

    def _steerer(self):
        return self._order[0] if self._order else None

    async def _pump(self, ws, queue: asyncio.Queue) -> None:
        while True:
            await ws.send(await queue.get())

    async def handler(self, ws) -> None:
        queue: asyncio.Queue = asyncio.Queue(maxsize=self.options.queue_depth)
        self._clients[ws] = queue
        self._order.append(ws)
        pump = asyncio.ensure_future(self._pump(ws, queue))
        try:
            await ws.send(_hello(self.scenario, self.session, self._steerer() is ws))
            async for raw in ws:
                reply = self._dispatch(ws, raw)
                if reply is not None:
                    await ws.send(reply)
        except Exception:
            pass
        finally:
            pump.cancel()
            self._clients.pop(ws, None)
            if ws in self._order:
                self._order.remove(ws)

    def _dispatch(self, ws, raw) -> str | None:
        try:
            msg = json.loads(raw)
        except (TypeError, ValueError):
            return _error_frame("frame is not valid JSON")
        if not isinstance(msg, dict) or "type" not in msg:
            return _error_frame("frame must be an object with a type")
        kind = msg["type"]
        if kind not in ("set_target", "toggle", "reset"):
            return _error_frame(f"unknown message type {kind!r}")
        if self._steerer() is not ws:
            return _error_frame("read-only connection; another client steers")
        if kind == "set_target":
            task = msg.get("task")
            pos = msg.get("pos")
            if task not in self.scenario.targets:
                return _error_frame(f"unknown task {task!r}")
            if (not isinstance(pos, (list, tuple)) or len(pos) != 3
                    or not all(isinstance(v, (int, float)) for v in pos)):
                return _error_frame("pos must be [x, y, z]")
            self.session.mailbox.post_target(task, pos)
        elif kind == "toggle":
            what = msg.get("what")
            on = msg.get("on")
            known = what == "balance" or (
                isinstance(what, str) and what.startswith("guide:")
                and what.split(":", 1)[1] in self.scenario.guides)
            if not known:
                return _error_frame(f"unknown toggle {what!r}")
            if not isinstance(on, bool):
                return _error_frame("on must be true or false")
            self.session.mailbox.post_toggle(what, on)
        else:
            self.session.mailbox.post_reset()
        return None

    # -- lifecycle -------------------------------------------------------

    async def serve_forever(self) -> None:
        import websockets.asyncio.server

        self._loop = asyncio.get_running_loop()
        self.session._frame_sink = self._sink
        worker = threading.Thread(target=self.session.loop, daemon=True,
                                  name="physics-loop")
        try:
            server = await websockets.asyncio.server.serve(
                self.handler, self.options.host, self.options.port)
        except OSError as e:
            raise ServeError(f"cannot listen on {self.options.host}:{self.options.port}: {e}") from e
        worker.start()
        log.info("serving %s on ws://%s:%d", self.scenario.name,
                 self.options.host, self.options.port)
        try:
            await asyncio.Future()
        finally:
            self.session.stop.set()
            server.close()
            await server.wait_closed()


def serve(scenario: Scenario, options: ServeOptions | None = None) -> None:
    """Blocking entry point: run the steering server until interrupted."""
    srv = SteeringServer(scenario, options)
    try:
        asyncio.run(srv.serve_forever())
    except KeyboardInterrupt:
        pass
