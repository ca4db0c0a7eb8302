"""Interactive steering sessions over HTTP/JSON plus a push event stream.

A session owns a world, a frame store, and the retrieval config.  Each step
takes a target pose (or a delta), retrieves context for it, renders the
ground-truth panorama, appends the new frame, and returns everything a
client needs to show why each frame was retrieved.  The session core is
plain Python so scripted replays and tests run without a server; the
FastAPI app is a thin shell over it.

All response floats are serialized with 17 significant digits, which makes
replaying a recorded step log reproduce responses byte for byte.
"""
from __future__ import annotations

import asyncio
import itertools
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional

from fastapi import FastAPI, Request
from fastapi.responses import Response, StreamingResponse

from . import jsonio
from .eval_harness import _VisibleCache
from .geometry import (
    DEFAULT_FOV,
    CameraPose,
    OverlapConfig,
    fov_overlap_heuristic,
)
from .memory_store import MemoryStore
from .retrieval import RetrievalConfig, StrategyKind, dedup_non_adjacent, retrieve_context
from .world import WorldModel, generate_world, load_world, render_panorama

SCHEMA_VERSION = 1


class SessionNotFound(Exception):
    pass


class ValidationError(Exception):
    """Carries the offending field name for field-level diagnostics."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name
        self.message = message


def _require_number(doc: dict, key: str, where: str) -> float:
    if key not in doc:
        raise ValidationError(f"{where}.{key}", "missing required field")
    v = doc[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise ValidationError(f"{where}.{key}", "must be a finite number")
    return float(v)


def _pose_from_doc(doc: dict, where: str) -> CameraPose:
    x = _require_number(doc, "x", where)
    y = _require_number(doc, "y", where)
    yaw = float(doc.get("yaw", 0.0))
    fov = float(doc.get("fov", DEFAULT_FOV))
    if not (0.0 < fov < math.pi):
        raise ValidationError(f"{where}.fov", "must be in (0, pi)")
    return CameraPose(x, y, yaw, fov)


def pose_doc(pose: CameraPose) -> dict:
    return {"x": pose.x, "y": pose.y, "yaw": pose.yaw, "fov": pose.fov}


def fan_polygon(pose: CameraPose, radius: float, arc_points: int = 24) -> list[list[float]]:
    """Sector outline for drawing: apex plus sampled arc, left edge first."""
    pts = [[pose.x, pose.y]]
    for i in range(arc_points + 1):
        a = pose.yaw + pose.fov / 2.0 - pose.fov * i / arc_points
        pts.append([pose.x + radius * math.cos(a), pose.y + radius * math.sin(a)])
    return pts


def _panorama_doc(pan) -> dict:
    return {
        "ids": list(pan.ids),
        "depths": [None if math.isnan(d) else d for d in pan.depths],
    }


def _parse_retrieval_cfg(doc: dict, base: RetrievalConfig) -> RetrievalConfig:
    from dataclasses import replace

    kwargs: dict[str, Any] = {}
    if "strategy" in doc:
        try:
            kwargs["strategy"] = StrategyKind(doc["strategy"])
        except ValueError:
            raise ValidationError(
                "retrieval.strategy",
                f"unknown strategy {doc['strategy']!r}; one of "
                + ", ".join(s.value for s in StrategyKind),
            )
    for key in ("k", "far_slots", "seed"):
        if key in doc:
            kwargs[key] = int(_require_number(doc, key, "retrieval"))
    for key in ("time_scale", "recent_only_prob"):
        if key in doc:
            kwargs[key] = _require_number(doc, key, "retrieval")
    try:
        return replace(base, **kwargs)
    except ValueError as exc:
        raise ValidationError("retrieval", str(exc))


def _parse_overlap_cfg(doc: dict, base: OverlapConfig) -> OverlapConfig:
    from dataclasses import replace

    kwargs: dict[str, Any] = {}
    for key in ("d_min", "d_max"):
        if key in doc:
            kwargs[key] = _require_number(doc, key, "overlap")
    try:
        return replace(base, **kwargs)
    except ValueError as exc:
        raise ValidationError("overlap", str(exc))


class SteeringSession:
    """One interactive steering run; steps are serialized by a lock."""

    def __init__(
        self,
        session_id: str,
        world: WorldModel,
        start: CameraPose,
        rcfg: RetrievalConfig,
        ocfg: OverlapConfig,
    ):
        self.session_id = session_id
        self.world = world
        self.rcfg = rcfg
        self.ocfg = ocfg
        self.store = MemoryStore(ocfg, track_edges=False)
        self.cache = _VisibleCache(world, ocfg)
        self.current_pose = start
        self.step_counter = 0
        self.coverage_history: list[float] = []
        self.step_log: list[dict] = []
        self.lock = threading.Lock()
        # (queue, owning event loop); steps run in worker threads, so
        # publishing must hop onto the subscriber's loop
        self.subscribers: list[tuple[asyncio.Queue, asyncio.AbstractEventLoop]] = []
        pan = render_panorama(world, start, ocfg)
        self.store.append_pose(start, 0, pan)

    def _clamp(self, pose: CameraPose) -> tuple[CameraPose, bool]:
        x0, y0, x1, y1 = self.world.bounds
        cx = min(max(pose.x, x0), x1)
        cy = min(max(pose.y, y0), y1)
        if cx == pose.x and cy == pose.y:
            return pose, False
        return CameraPose(cx, cy, pose.yaw, pose.fov), True

    def _coverage(self, target: CameraPose, ids: Iterable[int]) -> float:
        vis = self.cache.get(target)
        if not vis:
            return 1.0
        union: set[int] = set()
        for i in ids:
            union |= self.cache.get(self.store.records[i].pose)
        return len(vis & union) / len(vis)

    def step(self, request: dict) -> dict:
        with self.lock:
            return self._step_locked(request)

    def _step_locked(self, request: dict) -> dict:
        if "target" in request:
            target = _pose_from_doc(request["target"], "target")
        elif "delta" in request:
            d = request["delta"]
            target = self.current_pose.moved(
                float(d.get("dx", 0.0)), float(d.get("dy", 0.0)), float(d.get("dyaw", 0.0))
            )
        else:
            raise ValidationError("target", "step needs a target pose or a delta")
        if "retrieval" in request:
            self.rcfg = _parse_retrieval_cfg(request["retrieval"], self.rcfg)
        if "overlap" in request:
            new_ocfg = _parse_overlap_cfg(request["overlap"], self.ocfg)
            if new_ocfg != self.ocfg:
                self.ocfg = new_ocfg
                self.store.cfg = new_ocfg
                self.cache = _VisibleCache(self.world, new_ocfg)
        target, clamped = self._clamp(target)

        most_recent = len(self.store) - 1
        retrieved = retrieve_context(self.store, target, self.rcfg, most_recent)
        fov_pass = set(self.store.query_covisible(target))
        dedup = set(dedup_non_adjacent(sorted(fov_pass), self.rcfg.seed))

        candidates = []
        for i in sorted(fov_pass | set(retrieved)):
            v = fov_overlap_heuristic(target, self.store.records[i].pose, self.ocfg)
            candidates.append(
                {
                    "frame_id": i,
                    "pose": pose_doc(self.store.records[i].pose),
                    "overlaps": v.overlaps,
                    "reject_reason": v.reject_reason.value if v.reject_reason else None,
                    "intersections": [
                        {"point": [p[0], p[1]], "distance": d} for p, d in v.intersections
                    ],
                    "stage": (
                        "most-recent"
                        if i == most_recent
                        else "dedup-survivor"
                        if i in dedup
                        else "fov-pass"
                        if i in fov_pass
                        else "other"
                    ),
                }
            )

        cov = self._coverage(target, retrieved)
        pan = render_panorama(self.world, target, self.ocfg)
        new_id = self.store.append_pose(
            target, self.store.records[-1].time_index + 1, pan
        )
        self.current_pose = target
        self.step_counter += 1
        self.coverage_history.append(cov)

        result = {
            "schema_version": SCHEMA_VERSION,
            "session_id": self.session_id,
            "step": self.step_counter,
            "frame_id": new_id,
            "clamped": clamped,
            "target": pose_doc(target),
            "most_recent_id": most_recent,
            "retrieved": retrieved,
            "fans": {
                "target": fan_polygon(target, self.ocfg.d_max),
                "retrieved": {
                    str(i): fan_polygon(self.store.records[i].pose, self.ocfg.d_max)
                    for i in retrieved
                },
            },
            "candidates": candidates,
            "coverage": cov,
            "panorama": _panorama_doc(pan),
            "effective_config": {
                "strategy": self.rcfg.strategy.value,
                "k": self.rcfg.k,
                "far_slots": self.rcfg.far_slots,
                "d_min": self.ocfg.d_min,
                "d_max": self.ocfg.d_max,
                "seed": self.rcfg.seed,
            },
        }
        self.step_log.append({"request": request, "result": result})
        self._publish(result)
        return result

    def _publish(self, result: dict) -> None:
        for q, loop in list(self.subscribers):
            def push(queue=q):
                try:
                    queue.put_nowait(result)
                except asyncio.QueueFull:
                    pass

            try:
                running = asyncio.get_running_loop()
            except RuntimeError:
                running = None
            if running is loop:
                push()
            else:
                loop.call_soon_threadsafe(push)

    def state(self) -> dict:
        with self.lock:
            return {
                "schema_version": SCHEMA_VERSION,
                "session_id": self.session_id,
                "step": self.step_counter,
                "store_size": len(self.store),
                "current_pose": pose_doc(self.current_pose),
                "coverage_history": list(self.coverage_history),
                "world": {
                    "seed": self.world.seed,
                    "bounds": list(self.world.bounds),
                    "landmarks": len(self.world.landmarks),
                    "occluders": len(self.world.occluders),
                },
                "effective_config": {
                    "strategy": self.rcfg.strategy.value,
                    "k": self.rcfg.k,
                    "far_slots": self.rcfg.far_slots,
                    "d_min": self.ocfg.d_min,
                    "d_max": self.ocfg.d_max,
                    "seed": self.rcfg.seed,
                },
                "poses": [pose_doc(r.pose) for r in self.store.records],
            }

    def log_jsonl(self) -> str:
        with self.lock:
            return "".join(jsonio.dumps17(e) + "\n" for e in self.step_log)


class SessionManager:
    """Process-lifetime session registry; ids are deterministic per creation
    order so scripted runs replay exactly."""

    def __init__(self):
        self._sessions: dict[str, SteeringSession] = {}
        self._counter = itertools.count(1)
        self._lock = threading.Lock()

    def create(self, request: dict) -> SteeringSession:
        wdoc = request.get("world", {})
        if "file" in wdoc:
            world = load_world(wdoc["file"])
        else:
            seed = int(wdoc.get("seed", 0))
            bounds = tuple(wdoc.get("bounds", (0.0, 0.0, 60.0, 60.0)))
            if len(bounds) != 4 or bounds[2] <= bounds[0] or bounds[3] <= bounds[1]:
                raise ValidationError("world.bounds", "must be [x0, y0, x1, y1] with x1>x0, y1>y0")
            density = float(wdoc.get("density", 1.0))
            if density <= 0:
                raise ValidationError("world.density", "must be positive")
            world = generate_world(
                density, int(wdoc.get("occluder_count", 4)), bounds, seed
            )
        rcfg = _parse_retrieval_cfg(request.get("retrieval", {}), RetrievalConfig())
        ocfg = _parse_overlap_cfg(request.get("overlap", {}), OverlapConfig())
        if "start" in request:
            start = _pose_from_doc(request["start"], "start")
        else:
            x0, y0, x1, y1 = world.bounds
            start = CameraPose((x0 + x1) / 2.0, (y0 + y1) / 2.0, 0.0)
        with self._lock:
            sid = f"sess-{world.seed}-{next(self._counter)}"
            session = SteeringSession(sid, world, start, rcfg, ocfg)
            self._sessions[sid] = session
        return session

    def get(self, session_id: str) -> SteeringSession:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise SessionNotFound(session_id)


def replay_step_log(lines: Iterable[str], create_request: Optional[dict] = None) -> list[dict]:
    """Re-run the recorded step requests through a fresh session and return
    the new results; with identical seeds these match the recorded results
    byte for byte once serialized."""
    manager = SessionManager()
    session = manager.create(create_request or {})
    out = []
    for line in lines:
        if not line.strip():
            continue
        entry = jsonio.loads(line)
        out.append(session.step(entry["request"]))
    return out


def create_app(manager: Optional[SessionManager] = None) -> FastAPI:
    app = FastAPI(title="covis gateway")
    app.state.manager = manager or SessionManager()

    def json_response(doc: dict, status: int = 200) -> Response:
        return Response(jsonio.dumps17(doc), status_code=status, media_type="application/json")

    def error(status: int, message: str, field_name: Optional[str] = None) -> Response:
        doc: dict[str, Any] = {"error": {"message": message}}
        if field_name:
            doc["error"]["field"] = field_name
        return json_response(doc, status)

    @app.get("/healthz")
    async def healthz():
        return json_response({"status": "ok", "schema_version": SCHEMA_VERSION})

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await request.body()
        try:
            doc = jsonio.loads(body.decode()) if body else {}
        except Exception:
            return error(400, "request body must be JSON")
        try:
            session = app.state.manager.create(doc)
        except ValidationError as exc:
            return error(422, exc.message, exc.field_name)
        return json_response(
            {"session_id": session.session_id, "state": session.state()}, 201
        )

    @app.post("/sessions/{session_id}/step")
    async def step(session_id: str, request: Request):
        try:
            session = app.state.manager.get(session_id)
        except SessionNotFound:
            return error(404, f"unknown session {session_id}")
        body = await request.body()
        try:
            doc = jsonio.loads(body.decode()) if body else {}
        except Exception:
            return error(400, "request body must be JSON")
        try:
            result = await asyncio.to_thread(session.step, doc)
        except ValidationError as exc:
            return error(422, exc.message, exc.field_name)
        return json_response(result)

    @app.get("/sessions/{session_id}/state")
    async def state(session_id: str):
        try:
            session = app.state.manager.get(session_id)
        except SessionNotFound:
            return error(404, f"unknown session {session_id}")
        return json_response(session.state())

    @app.get("/sessions/{session_id}/log")
    async def step_log(session_id: str):
        try:
            session = app.state.manager.get(session_id)
        except SessionNotFound:
            return error(404, f"unknown session {session_id}")
        return Response(session.log_jsonl(), media_type="application/x-ndjson")

    @app.get("/sessions/{session_id}/events")
    async def events(session_id: str, max_events: Optional[int] = None):
        """Server-sent step results; max_events ends the stream after that
        many events (scripted clients and tests; browsers stream forever)."""
        try:
            session = app.state.manager.get(session_id)
        except SessionNotFound:
            return error(404, f"unknown session {session_id}")
        queue: asyncio.Queue = asyncio.Queue(maxsize=256)
        entry = (queue, asyncio.get_running_loop())
        session.subscribers.append(entry)

        async def stream():
            sent = 0
            try:
                while max_events is None or sent < max_events:
                    result = await queue.get()
                    yield f"event: step\ndata: {jsonio.dumps17(result)}\n\n"
                    sent += 1
            finally:
                if entry in session.subscribers:
                    session.subscribers.remove(entry)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
