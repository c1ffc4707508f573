"""Per-frame traversability evaluation with scene memory and operator calls.

Each frame goes through, in order:

1. Embed the frame and compare against the reference scene embedding.
2. On a scene change (similarity below threshold): try the operator-call
   history first; a valid match merges its preferences silently, otherwise
   the human operator is called with a SCENE_CHANGE request.
3. Compute per-prompt attention maps, pool them, derive the uncertainty map
   and its mean over the vehicle ROI.
4. If the ROI uncertainty exceeds its threshold, call the operator with an
   UNKNOWN_OBJECT request and recompute the maps once with the merged
   preferences.
5. Emit the frame outcome (and a line in the episode log).

Scene change is checked before unknown-object detection because a preference
update changes the masks the ROI score is computed from; after any update the
maps are recomputed at most once per frame.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import IO, Callable, Sequence

import numpy as np

from .errors import (
    EmptyInputError,
    FrameOrderError,
    NoPendingRequestError,
    TravsegError,
)
from .maskops import binarize, roi_uncertainty_score, uncertainty_map, weighted_max_pool
from .memory import SceneMemory, cosine_similarity, merge_prefs
from .providers.base import EmbeddingProvider, MaskProvider
from .roi import rasterize_roi
from .types import (
    AttentionMap,
    BinaryMask,
    Embedding,
    EngineConfig,
    Frame,
    PooledMap,
    TraversalPrefs,
    UncertaintyMap,
)


class EngineEvent(str, Enum):
    NO_CALL = "NO_CALL"
    HISTORY_UPDATE = "HISTORY_UPDATE"
    HOC_SCENE_CHANGE = "HOC_SCENE_CHANGE"
    HOC_UNKNOWN_OBJECT = "HOC_UNKNOWN_OBJECT"


class HocReason(str, Enum):
    SCENE_CHANGE = "SCENE_CHANGE"
    UNKNOWN_OBJECT = "UNKNOWN_OBJECT"


@dataclass(frozen=True)
class FrameMaps:
    masks: tuple[AttentionMap, ...]
    pooled: PooledMap
    binary: BinaryMask
    unc: UncertaintyMap
    u_roi: float


@dataclass(frozen=True)
class HocRequest:
    """A blocking ask for the operator, with everything they need to decide."""

    request_id: int
    frame_id: int
    reason: HocReason
    frame: Frame
    pooled: PooledMap
    unc: UncertaintyMap
    u_roi: float
    prefs: TraversalPrefs
    embedding: Embedding
    scene_similarity: float
    created_at: float


@dataclass(frozen=True)
class HocResponse:
    """The operator's partial preference update; empty means 'no change'."""

    prefs: TraversalPrefs = TraversalPrefs()
    responder: str = "operator"
    latency: float = 0.0


@dataclass(frozen=True)
class FrameOutcome:
    frame_id: int
    pooled: PooledMap
    binary: BinaryMask
    unc: UncertaintyMap
    u_roi: float
    scene_similarity: float
    event: EngineEvent
    prefs_after: TraversalPrefs
    matched_frame_id: int | None = None
    match_similarity: float | None = None
    calls: tuple[EngineEvent, ...] = ()
    timed_out: bool = False

    def log_record(self) -> dict:
        rec = {
            "frame_id": self.frame_id,
            "s_t": self.scene_similarity,
            "u_roi": self.u_roi,
            "event": self.event.value,
            "calls": [c.value for c in self.calls],
            "prefs": [[p, w] for p, w in self.prefs_after.as_pairs()],
        }
        if self.matched_frame_id is not None:
            rec["matched_frame_id"] = self.matched_frame_id
            rec["match_similarity"] = self.match_similarity
        if self.timed_out:
            rec["timed_out"] = True
        return rec


class Operator:
    """Synchronous operator interface; return None to simulate a timeout."""

    def answer(self, request: HocRequest) -> HocResponse | None:
        raise NotImplementedError


class NullOperator(Operator):
    """Never answers; every call times out and stays pending."""

    def answer(self, request: HocRequest) -> HocResponse | None:
        return None


class ScriptedOperator(Operator):
    """Replays canned answers keyed by frame id, with a default for the rest.

    Each scripted response is consumed once; repeated calls on the same frame
    fall through to the next matching entry, then to the default. A None
    default simulates an operator who stops answering.
    """

    def __init__(
        self,
        responses: Sequence[tuple[int | None, TraversalPrefs]] = (),
        default: TraversalPrefs | None = TraversalPrefs(),
        responder: str = "scripted",
    ):
        self._responses = list(responses)
        self._default = default
        self.responder = responder

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedOperator":
        import yaml

        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
        default = doc.get("default", [])
        default_prefs = (
            None if default is None else TraversalPrefs.from_pairs(_pairs(default))
        )
        responses = []
        for item in doc.get("responses", []):
            frame = item.get("frame")
            responses.append(
                (
                    None if frame is None else int(frame),
                    TraversalPrefs.from_pairs(_pairs(item.get("prefs", []))),
                )
            )
        return cls(responses=responses, default=default_prefs)

    def answer(self, request: HocRequest) -> HocResponse | None:
        for i, (frame_id, prefs) in enumerate(self._responses):
            if frame_id is None or frame_id == request.frame_id:
                del self._responses[i]
                return HocResponse(prefs=prefs, responder=self.responder)
        if self._default is None:
            return None
        return HocResponse(prefs=self._default, responder=self.responder)


def _pairs(raw) -> list[tuple[str, float]]:
    if isinstance(raw, dict):
        return [(str(k), float(v)) for k, v in raw.items()]
    return [(str(p), float(w)) for p, w in raw]


class _ExternalOperator(Operator):
    """Marker operator: answers arrive via Engine.resolve_hoc from outside."""

    def answer(self, request: HocRequest) -> HocResponse | None:  # pragma: no cover
        raise RuntimeError("external operator is driven through Engine.resolve_hoc")


EXTERNAL_OPERATOR = _ExternalOperator()


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value)}")


class Engine:
    """One engine instance drives one episode; frames are strictly sequential.

    The operator boundary is synchronous from the engine's point of view:
    `step` blocks in the operator's `answer` (scripted operators return
    immediately; with EXTERNAL_OPERATOR the step waits for `resolve_hoc` from
    another thread, up to `hoc_timeout`). On a timeout the frame is failed
    safe -- its binary mask is forced all-zero -- and the request stays
    pending so a late `resolve_hoc` still applies its update. While a
    timed-out request is unanswered, later gate firings do not raise new
    requests; those frames fail safe the same way.
    """

    def __init__(
        self,
        config: EngineConfig,
        mask_provider: MaskProvider,
        embedding_provider: EmbeddingProvider,
        operator: Operator | None = None,
        log_path: str | Path | None = None,
        history_path: str | Path | None = None,
        clock: Callable[[], float] = time.time,
    ):
        self.config = config
        self.mask_provider = mask_provider
        self.embedding_provider = embedding_provider
        self.operator = operator if operator is not None else NullOperator()
        self.clock = clock
        self.theta_scene = config.theta_scene
        self.theta_roi = config.theta_roi
        self.theta_trav = config.theta_trav
        self.hoc_timeout = config.hoc_timeout

        self._log_path = Path(log_path) if log_path is not None else None
        self._history_path = Path(history_path) if history_path is not None else None
        self._log_file: IO[str] | None = None
        self._lock = threading.Lock()
        self._resolved = threading.Condition(self._lock)
        self._pending: HocRequest | None = None
        self._deposited: HocResponse | None = None
        self._awaiting = False
        self._cancel_wait = False
        self._listeners: list[Callable[[str, object], None]] = []

        self.memory: SceneMemory | None = None
        self.prefs = config.initial_prefs
        self.roi_mask: BinaryMask | None = None
        self._last_frame_id: int | None = None
        self._request_counter = 0
        self.frame_count = 0
        self.scene_calls = 0
        self.roi_calls = 0
        self.history_updates = 0

    # Service hooks; kind is "hoc_pending" or "hoc_resolved".
    def add_listener(self, listener: Callable[[str, object], None]) -> None:
        self._listeners.append(listener)

    def _emit(self, kind: str, payload: object) -> None:
        for listener in self._listeners:
            listener(kind, payload)

    @property
    def pending_request(self) -> HocRequest | None:
        with self._lock:
            return self._pending

    def cancel_wait(self) -> None:
        """Wake a step blocked on the operator; it proceeds as if timed out."""
        with self._lock:
            self._cancel_wait = True
            self._resolved.notify_all()

    def set_thresholds(
        self,
        theta_scene: float | None = None,
        theta_roi: float | None = None,
        theta_trav: float | None = None,
    ) -> None:
        if theta_scene is not None:
            if not (-1.0 <= theta_scene <= 1.0):
                raise ValueError(f"theta_scene {theta_scene} outside [-1, 1]")
            self.theta_scene = float(theta_scene)
        if theta_roi is not None:
            if not (0.0 <= theta_roi <= 1.0):
                raise ValueError(f"theta_roi {theta_roi} outside [0, 1]")
            self.theta_roi = float(theta_roi)
        if theta_trav is not None:
            if not (-1.0 <= theta_trav <= 1.0):
                raise ValueError(f"theta_trav {theta_trav} outside [-1, 1]")
            self.theta_trav = float(theta_trav)

    def init_episode(self, first_frame: Frame) -> None:
        """Reset preferences, reference scene, history, ROI, and counters."""
        if len(self.config.initial_prefs) == 0:
            raise EmptyInputError("initial preferences must contain at least one prompt")
        self.prefs = self.config.initial_prefs
        self.roi_mask = rasterize_roi(self.config.roi, first_frame.width, first_frame.height)
        reference = self.embedding_provider.get_embedding(first_frame)
        self.memory = SceneMemory(reference)
        if (
            self.config.persist_history
            and self._history_path is not None
            and self._history_path.is_file()
        ):
            # Cross-episode reuse is opt-in; by default history starts empty.
            self.memory.load_history(self._history_path)
        self._last_frame_id = None
        self.frame_count = 0
        self.scene_calls = 0
        self.roi_calls = 0
        self.history_updates = 0
        with self._lock:
            self._pending = None
            self._deposited = None
        if self._log_path is not None:
            self._log_file = open(self._log_path, "w", encoding="utf-8")

    def close(self) -> None:
        if self._history_path is not None and self.memory is not None:
            self.memory.save_history(self._history_path)
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None

    def step(self, frame: Frame) -> FrameOutcome:
        if self.memory is None or self.roi_mask is None:
            raise TravsegError("init_episode must run before step")
        if len(self.prefs) == 0:
            raise EmptyInputError("cannot evaluate a frame with zero prompts")
        if self._last_frame_id is not None and frame.id <= self._last_frame_id:
            raise FrameOrderError(
                f"frame id {frame.id} not greater than previous {self._last_frame_id}"
            )
        if (frame.height, frame.width) != self.roi_mask.shape:
            self.roi_mask = rasterize_roi(self.config.roi, frame.width, frame.height)

        e_t = self.embedding_provider.get_embedding(frame)
        s_t = cosine_similarity(e_t, self.memory.reference)
        calls: list[EngineEvent] = []
        matched_id: int | None = None
        matched_sim: float | None = None
        timed_out = False

        if s_t < self.theta_scene:
            match = self.memory.find_match(e_t, self.theta_scene)
            if match is not None:
                entry, sim = match
                self.prefs = merge_prefs(self.prefs, entry.prefs)
                self.memory.set_reference(e_t)
                matched_id, matched_sim = entry.frame_id, sim
                self.history_updates += 1
                calls.append(EngineEvent.HISTORY_UPDATE)
            else:
                snapshot = self._compute(frame)
                response = self._call_operator(
                    frame, HocReason.SCENE_CHANGE, snapshot, e_t, s_t
                )
                self.scene_calls += 1
                calls.append(EngineEvent.HOC_SCENE_CHANGE)
                if response is None:
                    timed_out = True
                else:
                    self.prefs = merge_prefs(self.prefs, response.prefs)
                    self.memory.record_hoc(e_t, self.prefs, frame.id, self.clock())

        maps = self._compute(frame)

        if maps.u_roi > self.theta_roi:
            response = self._call_operator(
                frame, HocReason.UNKNOWN_OBJECT, maps, e_t, s_t
            )
            self.roi_calls += 1
            calls.append(EngineEvent.HOC_UNKNOWN_OBJECT)
            if response is None:
                timed_out = True
            else:
                self.prefs = merge_prefs(self.prefs, response.prefs)
                self.memory.record_hoc(e_t, self.prefs, frame.id, self.clock())
                maps = self._compute(frame)  # single recompute with merged prefs

        binary = maps.binary
        if timed_out:
            # Fail safe: an unanswered call leaves the whole frame non-traversable.
            binary = BinaryMask(np.zeros(binary.shape, dtype=np.uint8))

        outcome = FrameOutcome(
            frame_id=frame.id,
            pooled=maps.pooled,
            binary=binary,
            unc=maps.unc,
            u_roi=maps.u_roi,
            scene_similarity=s_t,
            event=calls[-1] if calls else EngineEvent.NO_CALL,
            prefs_after=self.prefs,
            matched_frame_id=matched_id,
            match_similarity=matched_sim,
            calls=tuple(calls),
            timed_out=timed_out,
        )
        self._last_frame_id = frame.id
        self.frame_count += 1
        if self._log_file is not None:
            self._log_file.write(
                json.dumps(outcome.log_record(), sort_keys=True, default=_json_default) + "\n"
            )
            self._log_file.flush()
        return outcome

    def resolve_hoc(self, response: HocResponse) -> None:
        """Deliver the operator's answer for the pending request.

        While a `step` is blocked waiting, the answer is handed to it; for a
        request that already timed out, the preference merge and history
        append are applied here directly. Without a pending request this
        raises NoPendingRequestError (which also covers double resolution).
        """
        with self._lock:
            if self._pending is None:
                raise NoPendingRequestError("no operator call is pending")
            request = self._pending
            if self._awaiting:
                self._deposited = response
                self._resolved.notify_all()
                return
            # Late resolution after a timeout: apply to current state.
            self.prefs = merge_prefs(self.prefs, response.prefs)
            assert self.memory is not None
            self.memory.record_hoc(request.embedding, self.prefs, request.frame_id, self.clock())
            self._pending = None
        self._emit("hoc_resolved", (request, response))

    def _compute(self, frame: Frame) -> FrameMaps:
        masks = self.mask_provider.get_masks(frame, list(self.prefs.prompts()))
        pooled = weighted_max_pool(masks, self.prefs)
        unc = uncertainty_map(masks)
        assert self.roi_mask is not None
        u_roi = roi_uncertainty_score(unc, self.roi_mask)
        return FrameMaps(
            masks=tuple(masks),
            pooled=pooled,
            binary=binarize(pooled, self.theta_trav),
            unc=unc,
            u_roi=u_roi,
        )

    def _call_operator(
        self,
        frame: Frame,
        reason: HocReason,
        maps: FrameMaps,
        e_t: Embedding,
        s_t: float,
    ) -> HocResponse | None:
        external = isinstance(self.operator, _ExternalOperator)
        with self._lock:
            if self._pending is not None:
                return None  # an earlier timed-out call is still unanswered
            self._request_counter += 1
            request = HocRequest(
                request_id=self._request_counter,
                frame_id=frame.id,
                reason=reason,
                frame=frame,
                pooled=maps.pooled,
                unc=maps.unc,
                u_roi=maps.u_roi,
                prefs=self.prefs,
                embedding=e_t,
                scene_similarity=s_t,
                created_at=self.clock(),
            )
            self._pending = request
            if external:
                # Flag before releasing the lock so a resolve racing with the
                # hoc_pending emission deposits instead of applying late.
                self._awaiting = True
                self._deposited = None
        self._emit("hoc_pending", request)

        if not external:
            response = self.operator.answer(request)
        else:
            with self._lock:
                try:
                    deadline = time.monotonic() + self.hoc_timeout
                    while self._deposited is None and not self._cancel_wait:
                        remaining = deadline - time.monotonic()
                        if remaining <= 0 or not self._resolved.wait(timeout=remaining):
                            break
                    response = self._deposited
                    self._deposited = None
                    self._cancel_wait = False
                finally:
                    self._awaiting = False

        with self._lock:
            if response is not None:
                self._pending = None
        if response is not None:
            self._emit("hoc_resolved", (request, response))
        return response
