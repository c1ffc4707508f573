"""HTTP/WebSocket service hosting the operator loop for a live episode.

REST surface (all JSON):

    GET  /state                  engine/session snapshot
    GET  /episode/log            the JSONL episode log so far (text/plain)
    GET  /frames/{id}/maps       full-resolution pooled/uncertainty/binary maps
    POST /hoc/resolve            {"prefs": [[prompt, weight], ...],
                                  "responder": str?, "request_id": int?}
    POST /config/thresholds      {"theta_scene"?, "theta_roi"?, "theta_trav"?}
                                 applied at the next frame boundary

WebSocket /events streams ServiceEvent records `{"id": n, "type": ...,
"data": {...}}` with types frame_outcome, hoc_pending, hoc_resolved,
episode_done, error. Reconnecting clients pass ?since=<last id> to replay
missed events from the ring buffer. Previews embedded in events are
downscaled (<= 320 px wide); full-resolution maps are fetched per frame id.

All engine mutation funnels through the single runner thread plus the
engine's own lock; HTTP handlers only stage changes or resolve the pending
call.
"""

from __future__ import annotations

import base64
import io
import queue
import threading
import time
from collections import OrderedDict, deque
from contextlib import asynccontextmanager
from pathlib import Path
from tempfile import NamedTemporaryFile

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image
from pydantic import BaseModel
from starlette.concurrency import run_in_threadpool

from .engine import (
    EXTERNAL_OPERATOR,
    Engine,
    FrameOutcome,
    HocRequest,
    HocResponse,
    Operator,
)
from .errors import NoPendingRequestError, PrefsError, TravsegError
from .providers.replay import ReplayEpisode
from .types import EngineConfig, Frame, TraversalPrefs, validate_prefs

PREVIEW_MAX_WIDTH = 320
EVENT_BUFFER = 2048


def _b64_png(pixels: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _b64_f32(values: np.ndarray) -> str:
    return base64.b64encode(np.asarray(values, dtype="<f4").tobytes()).decode("ascii")


def _preview(frame: Frame, pooled: np.ndarray, unc: np.ndarray) -> dict:
    scale = min(1.0, PREVIEW_MAX_WIDTH / frame.width)
    pw = max(1, round(frame.width * scale))
    ph = max(1, round(frame.height * scale))
    image = Image.fromarray(frame.pixels, mode="RGB")
    if (pw, ph) != (frame.width, frame.height):
        image = image.resize((pw, ph), Image.BILINEAR)

    def shrink(values: np.ndarray) -> np.ndarray:
        if (pw, ph) == (frame.width, frame.height):
            return values
        img = Image.fromarray(values.astype(np.float32), mode="F")
        return np.asarray(img.resize((pw, ph), Image.BILINEAR))

    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return {
        "width": pw,
        "height": ph,
        "image_png_b64": base64.b64encode(buf.getvalue()).decode("ascii"),
        "pooled_f32_b64": _b64_f32(shrink(pooled)),
        "unc_f32_b64": _b64_f32(shrink(unc)),
    }


class EventBus:
    """Ring-buffered fan-out: every subscriber sees the same ordered stream."""

    def __init__(self, capacity: int = EVENT_BUFFER):
        self._lock = threading.Lock()
        self._buffer: deque[dict] = deque(maxlen=capacity)
        self._subscribers: list[queue.Queue] = []
        self._next_id = 1

    def publish(self, kind: str, data: dict) -> dict:
        with self._lock:
            event = {"id": self._next_id, "type": kind, "data": data}
            self._next_id += 1
            self._buffer.append(event)
            targets = list(self._subscribers)
        for q in targets:
            q.put(event)
        return event

    def subscribe(self, since: int | None = None) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._lock:
            if since is not None:
                for event in self._buffer:
                    if event["id"] > since:
                        q.put(event)
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    @property
    def last_id(self) -> int:
        with self._lock:
            return self._next_id - 1


class EpisodeService:
    """Owns the engine thread stepping through one replay episode."""

    def __init__(
        self,
        episode: ReplayEpisode,
        config: EngineConfig,
        fps: float = 4.0,
        operator: Operator | None = None,
        log_path: str | Path | None = None,
    ):
        self.episode = episode
        self.config = config
        self.fps = fps
        self.bus = EventBus()
        if log_path is None:
            tmp = NamedTemporaryFile(
                mode="w", suffix=".jsonl", prefix="travseg_episode_", delete=False
            )
            tmp.close()
            log_path = tmp.name
        self.log_path = Path(log_path)
        self.engine = Engine(
            config,
            episode.mask_provider(),
            episode.embedding_provider(),
            operator=operator if operator is not None else EXTERNAL_OPERATOR,
            log_path=self.log_path,
        )
        self.engine.add_listener(self._on_engine_event)
        self._staged_thresholds: dict[str, float] = {}
        self._staged_lock = threading.Lock()
        self._outcomes: OrderedDict[int, FrameOutcome] = OrderedDict()
        self._frames: OrderedDict[int, Frame] = OrderedDict()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.done = False
        self.error: str | None = None

    # engine listener (runs on the engine/runner thread)
    def _on_engine_event(self, kind: str, payload) -> None:
        if kind == "hoc_pending":
            request: HocRequest = payload
            self.bus.publish(
                "hoc_pending",
                {
                    "request_id": request.request_id,
                    "frame_id": request.frame_id,
                    "reason": request.reason.value,
                    "u_roi": request.u_roi,
                    "scene_similarity": request.scene_similarity,
                    "prefs": request.prefs.as_pairs(),
                    "preview": _preview(
                        request.frame, request.pooled.values, request.unc.values
                    ),
                },
            )
        elif kind == "hoc_resolved":
            request, response = payload
            self.bus.publish(
                "hoc_resolved",
                {
                    "request_id": request.request_id,
                    "frame_id": request.frame_id,
                    "responder": response.responder,
                    "prefs_update": response.prefs.as_pairs(),
                },
            )

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="travseg-runner", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        self.engine.cancel_wait()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
        self.engine.close()

    def _apply_staged(self) -> None:
        with self._staged_lock:
            staged, self._staged_thresholds = self._staged_thresholds, {}
        if staged:
            self.engine.set_thresholds(**staged)

    def stage_thresholds(self, **thresholds: float) -> None:
        # Validate now so the API can reject, apply at the frame boundary.
        bounds = {"theta_scene": (-1.0, 1.0), "theta_roi": (0.0, 1.0), "theta_trav": (-1.0, 1.0)}
        for key, value in thresholds.items():
            lo, hi = bounds[key]
            if not (lo <= float(value) <= hi):
                raise ValueError(f"{key} {value} outside [{lo}, {hi}]")
        with self._staged_lock:
            self._staged_thresholds.update(thresholds)

    def _run(self) -> None:
        try:
            first = True
            for frame in self.episode.iter_frames():
                if self._stop.is_set():
                    return
                if first:
                    self.engine.init_episode(frame)
                    first = False
                self._apply_staged()
                outcome = self.engine.step(frame)
                self._frames[frame.id] = frame
                self._outcomes[frame.id] = outcome
                while len(self._outcomes) > 64:
                    self._outcomes.popitem(last=False)
                    self._frames.popitem(last=False)
                self.bus.publish("frame_outcome", self._outcome_payload(frame, outcome))
                if self.fps > 0:
                    self._stop.wait(1.0 / self.fps)
            self.done = True
            self.bus.publish("episode_done", {"frames": self.engine.frame_count})
        except TravsegError as exc:
            self.error = str(exc)
            self.bus.publish("error", {"message": str(exc)})
        except Exception as exc:  # surface anything else to clients too
            self.error = f"{type(exc).__name__}: {exc}"
            self.bus.publish("error", {"message": self.error})

    def _outcome_payload(self, frame: Frame, outcome: FrameOutcome) -> dict:
        return {
            "frame_id": outcome.frame_id,
            "scene_similarity": outcome.scene_similarity,
            "u_roi": outcome.u_roi,
            "event": outcome.event.value,
            "calls": [c.value for c in outcome.calls],
            "matched_frame_id": outcome.matched_frame_id,
            "timed_out": outcome.timed_out,
            "prefs": outcome.prefs_after.as_pairs(),
            "preview": _preview(frame, outcome.pooled.values, outcome.unc.values),
        }

    def state(self) -> dict:
        pending = self.engine.pending_request
        return {
            "episode": {
                "directory": str(self.episode.directory),
                "frames": len(self.episode),
                "width": self.episode.width,
                "height": self.episode.height,
            },
            "frame_count": self.engine.frame_count,
            "done": self.done,
            "error": self.error,
            "thresholds": {
                "theta_scene": self.engine.theta_scene,
                "theta_roi": self.engine.theta_roi,
                "theta_trav": self.engine.theta_trav,
            },
            "prefs": self.engine.prefs.as_pairs(),
            "roi": {
                "name": self.config.roi.name,
                "polygon": [[x, y] for x, y in self.config.roi.polygon],
            },
            "counters": {
                "scene_calls": self.engine.scene_calls,
                "roi_calls": self.engine.roi_calls,
                "history_updates": self.engine.history_updates,
            },
            "pending_hoc": None
            if pending is None
            else {
                "request_id": pending.request_id,
                "frame_id": pending.frame_id,
                "reason": pending.reason.value,
                "u_roi": pending.u_roi,
                "scene_similarity": pending.scene_similarity,
                "prefs": pending.prefs.as_pairs(),
            },
            "last_event_id": self.bus.last_id,
        }


class ResolveBody(BaseModel):
    prefs: list = []
    responder: str = "console"
    request_id: int | None = None


class ThresholdsBody(BaseModel):
    theta_scene: float | None = None
    theta_roi: float | None = None
    theta_trav: float | None = None


def _parse_prefs_payload(raw: list) -> TraversalPrefs:
    pairs = []
    for item in raw:
        if isinstance(item, dict):
            if "prompt" not in item or "weight" not in item:
                raise PrefsError("each entry needs 'prompt' and 'weight'")
            pairs.append((str(item["prompt"]), float(item["weight"])))
        else:
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise PrefsError(f"entry {item!r} is not a [prompt, weight] pair")
            pairs.append((str(item[0]), float(item[1])))
    return validate_prefs(pairs)


def build_service(
    episode: ReplayEpisode,
    config: EngineConfig,
    console_dir: str | Path | None = None,
    fps: float = 4.0,
    operator: Operator | None = None,
    log_path: str | Path | None = None,
) -> FastAPI:
    service = EpisodeService(episode, config, fps=fps, operator=operator, log_path=log_path)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        service.start()
        try:
            yield
        finally:
            service.stop()

    app = FastAPI(title="travseg operator service", lifespan=lifespan)
    app.state.service = service

    @app.get("/state")
    def get_state() -> dict:
        return service.state()

    @app.get("/episode/log")
    def get_log() -> PlainTextResponse:
        try:
            text = service.log_path.read_text(encoding="utf-8")
        except FileNotFoundError:
            text = ""
        return PlainTextResponse(text)

    @app.get("/frames/{frame_id}/maps")
    def get_frame_maps(frame_id: int) -> dict:
        outcome = service._outcomes.get(frame_id)
        if outcome is None:
            raise HTTPException(status_code=404, detail=f"no cached maps for frame {frame_id}")
        return {
            "frame_id": frame_id,
            "width": outcome.pooled.width,
            "height": outcome.pooled.height,
            "pooled_f32_b64": _b64_f32(outcome.pooled.values),
            "unc_f32_b64": _b64_f32(outcome.unc.values),
            "binary_png_b64": _b64_png(outcome.binary.values * np.uint8(255)),
        }

    @app.post("/hoc/resolve")
    def resolve(body: ResolveBody) -> dict:
        try:
            prefs = _parse_prefs_payload(body.prefs)
        except (PrefsError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        pending = service.engine.pending_request
        if pending is None:
            raise HTTPException(status_code=409, detail="no operator call is pending")
        if body.request_id is not None and body.request_id != pending.request_id:
            raise HTTPException(
                status_code=409,
                detail=f"request {body.request_id} is not pending "
                f"(current: {pending.request_id})",
            )
        try:
            service.engine.resolve_hoc(
                HocResponse(
                    prefs=prefs,
                    responder=body.responder,
                    latency=max(0.0, time.time() - pending.created_at),
                )
            )
        except NoPendingRequestError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"resolved": pending.request_id}

    @app.post("/config/thresholds")
    def set_thresholds(body: ThresholdsBody) -> dict:
        changes = {k: v for k, v in body.model_dump().items() if v is not None}
        if not changes:
            raise HTTPException(status_code=422, detail="no thresholds given")
        try:
            service.stage_thresholds(**changes)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"staged": changes}

    @app.websocket("/events")
    async def events(ws: WebSocket) -> None:
        await ws.accept()
        since_param = ws.query_params.get("since")
        since = int(since_param) if since_param is not None else None
        sub = service.bus.subscribe(since)

        def poll() -> dict | None:
            try:
                return sub.get(timeout=0.5)
            except queue.Empty:
                return None

        try:
            while True:
                event = await run_in_threadpool(poll)
                if event is not None:
                    await ws.send_json(event)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            service.bus.unsubscribe(sub)

    console = _resolve_console_dir(console_dir)
    if console is not None:
        app.mount("/", StaticFiles(directory=console, html=True), name="console")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index() -> str:
            return (
                "<html><body><h1>travseg operator service</h1>"
                "<p>No console bundle found. Build the frontend "
                "(<code>npm run build</code> in frontend/) or pass --console DIR. "
                'API: <a href="/state">/state</a>, <a href="/docs">/docs</a>.</p>'
                "</body></html>"
            )

    return app


def _resolve_console_dir(console_dir: str | Path | None) -> Path | None:
    if console_dir is not None:
        path = Path(console_dir)
        return path if path.is_dir() else None
    # Editable/checkout layout: repo_root/frontend/dist next to src/.
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None
