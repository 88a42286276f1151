"""Live simulation session over WebSocket for the browser teleop client.

Wire protocol (JSON text frames):

    server -> client:
      {"type":"state","tick":int,"points":[[x,y,z],...],"clusters":[int,...],
       "knife":{"pos":[x,y,z],"quat":[x,y,z,w]},
       "reward":{"R_total":float,"N_C":int}}
      {"type":"ack","what":<command>}        command accepted
      {"type":"error","message":str}         malformed or rejected command

    client -> server:
      {"type":"twist","v":[3],"w":[3]}
      {"type":"cut_commit"}
      {"type":"reset","object":<shape spec>}
      {"type":"goal","spec":{"kind":...,"thickness":...}}
      {"type":"claim_control"}

One sim thread owns all mutable state; handlers only enqueue commands and
every connected socket receives the identical serialized frame each tick.
The first client to claim control keeps it until disconnect; everyone else
spectates. Cluster ids on the wire are uint8 with 255 marking particles not
in any fragment (damaged or unassigned).
"""

from __future__ import annotations

import asyncio
import json
import os
import queue
import threading
import time

import numpy as np

from .config import GoalSpec, RunConfig
from .datagen import resolve_goal_clouds
from .geometry import shape_from_dict
from .mpm import KnifeState, MaterialTable, MPMSim, spawn_from_shape
from .spectral import evaluate_fragments, farthest_point_sampling
from .topology import discover_topology

MAX_TELEOP_SPEED = 1.5  # m/s, far under the transfer stability bound
MAX_TELEOP_SPIN = 6.0   # rad/s


def apply_thread_cap() -> int | None:
    """Honor TOPOCUT_THREADS; the kernels are serial, so this caps numba only."""
    val = os.environ.get("TOPOCUT_THREADS")
    if not val:
        return None
    n = max(1, int(val))
    try:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except (ImportError, ValueError):
        pass
    return n


def _build_sim(run: RunConfig) -> MPMSim:
    table = MaterialTable.from_params(run.materials)
    shape = shape_from_dict(run.object_shape)
    particles = spawn_from_shape(shape, table, run.sim)
    sim = MPMSim(run.sim, particles, KnifeState.default_for(run.sim))
    return sim


class TeleopService:
    def __init__(self, run: RunConfig | None = None, host: str = "127.0.0.1",
                 port: int = 8765, tick_rate: float = 20.0,
                 max_points: int = 8192, realtime: bool = True,
                 point_budget: int = 512):
        self.run = (run or RunConfig()).validate()
        self.host = host
        self.port = port
        self.tick_rate = tick_rate
        self.max_points = max_points
        self.realtime = realtime
        self.point_budget = point_budget

        self._commands: queue.Queue = queue.Queue()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._server = None
        self._loop: asyncio.AbstractEventLoop | None = None
        self._clients: set = set()
        self._controller = None
        self._tick = 0
        self._sim: MPMSim | None = None
        self._object_spec: dict = self.run.object_shape
        self._subset: np.ndarray | None = None
        self._goal = self.run.goal
        self._goal_clouds: list = []
        self._reward = {"R_total": 0.0, "N_C": 0}
        self.last_error: str | None = None

    # -- lifecycle ----------------------------------------------------------

    async def start(self):
        apply_thread_cap()
        self._loop = asyncio.get_running_loop()
        self._reset_sim(self.run.object_shape)
        self._thread = threading.Thread(target=self._sim_loop, daemon=True,
                                        name="sim-loop")
        self._thread.start()
        from websockets.asyncio.server import serve

        self._server = await serve(self._handler, self.host, self.port)
        self.port = next(iter(self._server.sockets)).getsockname()[1]
        return self

    async def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=10)
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    # -- sim thread ---------------------------------------------------------

    def _reset_sim(self, object_spec: dict):
        self._object_spec = object_spec
        run = self._run_with_shape(object_spec)
        self._sim = _build_sim(run)
        n = self._sim.particles.n
        if n > self.max_points:
            self._subset = farthest_point_sampling(self._sim.particles.x,
                                                   self.max_points)
        else:
            self._subset = np.arange(n)
        self._reward = {"R_total": 0.0, "N_C": 0}
        self._resolve_goal()

    def _resolve_goal(self):
        shape = shape_from_dict(self._object_spec)
        self._goal_clouds = resolve_goal_clouds(self._goal, shape.bounds(),
                                                self._sim.particles.spacing)

    def _run_with_shape(self, object_spec: dict) -> RunConfig:
        import copy

        run = copy.copy(self.run)
        run.object_shape = object_spec
        return run

    def _commit_cut(self):
        sim = self._sim
        rots, trans, halfs = sim.drain_swept_poses()
        if len(rots) > 4000:
            # thin stale hover poses; stride keeps successive translations
            # well under a quarter cell at teleop speed limits
            stride = min(8, (len(rots) + 3999) // 4000)
            keep = np.unique(np.r_[np.arange(0, len(rots), stride), len(rots) - 1])
            rots, trans, halfs = rots[keep], trans[keep], halfs[keep]
        p = sim.particles
        topo = discover_topology(p.x, p.damaged == 0, p.cluster_id,
                                 p.particle_radius(self.run.topology.r_p_factor),
                                 sim.config.dx, self.run.topology,
                                 swept=(rots, trans, halfs) if len(rots) else None,
                                 point_budget=self.point_budget)
        p.cluster_id[:] = topo.labels
        clouds = [c.points for c in topo.clusters]
        if clouds and self._goal_clouds:
            ev = evaluate_fragments(clouds, self._goal_clouds, self.run.spectral)
            self._reward = {"R_total": float(ev.R_total), "N_C": int(ev.N_C)}

    def _apply_command(self, cmd: tuple):
        kind = cmd[0]
        sim = self._sim
        if kind == "twist":
            v = np.clip(np.asarray(cmd[1], dtype=np.float64),
                        -MAX_TELEOP_SPEED, MAX_TELEOP_SPEED)
            w = np.clip(np.asarray(cmd[2], dtype=np.float64),
                        -MAX_TELEOP_SPIN, MAX_TELEOP_SPIN)
            sim.knife.set_twist(v, w)
        elif kind == "cut_commit":
            sim.knife.set_twist(np.zeros(3), np.zeros(3))
            self._commit_cut()
        elif kind == "reset":
            self._reset_sim(cmd[1])
        elif kind == "goal":
            self._goal = cmd[1]
            self._resolve_goal()

    def _snapshot(self) -> str:
        sim = self._sim
        pts = np.round(sim.particles.x[self._subset], 6)
        ids = sim.particles.cluster_id[self._subset].astype(np.int64)
        ids = np.where((ids < 0) | (sim.particles.damaged[self._subset] != 0),
                       255, ids).astype(np.uint8)
        pose = sim.knife.pose
        frame = {
            "type": "state",
            "tick": self._tick,
            "points": pts.tolist(),
            "clusters": ids.tolist(),
            "knife": {"pos": np.round(pose.translation, 6).tolist(),
                      "quat": np.round(pose.quat_xyzw(), 6).tolist()},
            "reward": self._reward,
        }
        return json.dumps(frame, separators=(",", ":"))

    def _sim_loop(self):
        period = 1.0 / self.tick_rate
        while not self._stop.is_set():
            started = time.monotonic()
            try:
                while True:
                    self._apply_command(self._commands.get_nowait())
            except queue.Empty:
                pass
            except Exception as exc:  # keep serving; surface on next frame
                self.last_error = str(exc)
            try:
                self._sim.step_frame()
            except Exception as exc:
                self.last_error = str(exc)
            self._tick += 1
            payload = self._snapshot()
            if self._loop is not None:
                self._loop.call_soon_threadsafe(self._broadcast, payload)
            if self.realtime:
                remaining = period - (time.monotonic() - started)
                if remaining > 0:
                    time.sleep(remaining)

    # -- network side -------------------------------------------------------

    def _broadcast(self, payload: str):
        for ws in list(self._clients):
            asyncio.ensure_future(self._safe_send(ws, payload))

    async def _safe_send(self, ws, payload: str):
        try:
            await ws.send(payload)
        except Exception:
            self._clients.discard(ws)

    async def _handler(self, ws):
        self._clients.add(ws)
        try:
            async for raw in ws:
                await self._dispatch(ws, raw)
        finally:
            self._clients.discard(ws)
            if self._controller is ws:
                self._controller = None

    async def _dispatch(self, ws, raw: str):
        try:
            msg = json.loads(raw)
            kind = msg["type"]
        except (json.JSONDecodeError, TypeError, KeyError):
            await ws.send(json.dumps({"type": "error",
                                      "message": "malformed message"}))
            return
        try:
            if kind == "claim_control":
                if self._controller is None or self._controller is ws:
                    self._controller = ws
                    await ws.send(json.dumps({"type": "ack",
                                              "what": "claim_control"}))
                else:
                    await ws.send(json.dumps(
                        {"type": "error",
                         "message": "control held by another client"}))
            elif kind in ("twist", "cut_commit", "reset", "goal"):
                if self._controller is not ws:
                    await ws.send(json.dumps(
                        {"type": "error", "message": "claim control first"}))
                    return
                if kind == "twist":
                    self._commands.put(("twist", msg["v"], msg["w"]))
                elif kind == "cut_commit":
                    self._commands.put(("cut_commit",))
                elif kind == "reset":
                    shape_from_dict(msg["object"])  # validate before enqueue
                    self._commands.put(("reset", msg["object"]))
                else:
                    spec = msg["spec"]
                    goal = GoalSpec(kind=spec["kind"],
                                    thickness=float(spec.get("thickness", 0.1)),
                                    sample_count=int(spec.get("sample_count", 512)))
                    goal.validate()
                    self._commands.put(("goal", goal))
                await ws.send(json.dumps({"type": "ack", "what": kind}))
            else:
                await ws.send(json.dumps(
                    {"type": "error", "message": f"unknown type {kind!r}"}))
        except (KeyError, TypeError, ValueError) as exc:
            await ws.send(json.dumps({"type": "error", "message": str(exc)}))


async def _serve_forever(service: TeleopService):
    await service.start()
    # flush so wrappers reading the ephemeral port through a pipe see it
    print(f"teleop service listening on ws://{service.host}:{service.port}",
          flush=True)
    try:
        await asyncio.Future()
    finally:
        await service.stop()


def run_service(run: RunConfig | None = None, host: str = "127.0.0.1",
                port: int = 8765, tick_rate: float = 20.0):
    """Blocking entry point used by the CLI."""
    service = TeleopService(run, host=host, port=port, tick_rate=tick_rate)
    try:
        asyncio.run(_serve_forever(service))
    except KeyboardInterrupt:
        pass
