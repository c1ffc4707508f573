"""Scene memory: embedding similarity, operator-call history, preference merge.

The history is episode-scoped and append-only. Lookups are a linear scan;
operator calls number in the tens per episode, so no index is warranted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, ZeroVectorError
from .types import Embedding, TraversalPrefs


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """Cosine of the angle between two embeddings, clamped to [-1, 1].

    Clamping guards against |result| exceeding 1 by rounding error; inputs
    are validated to be same-dimension and nonzero.
    """
    if a.dim != b.dim:
        raise DimensionMismatchError(f"embedding dims differ: {a.dim} vs {b.dim}")
    na = np.linalg.norm(a.values)
    nb = np.linalg.norm(b.values)
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine similarity undefined for zero vectors")
    value = float(np.dot(a.values, b.values) / (na * nb))
    return max(-1.0, min(1.0, value))


def merge_prefs(tau1: TraversalPrefs, tau2: TraversalPrefs) -> TraversalPrefs:
    """Apply a partial preference update: tau2 wins, the rest of tau1 survives.

    The result lists every tau2 entry unchanged (in tau2's order), followed by
    the tau1 entries whose prompt does not appear in tau2 (in tau1's order).
    There is deliberately no removal mechanism; an operator can only re-weight
    a prompt (e.g. to 0), never delete it.
    """
    updated = set(tau2.prompts())
    entries = list(tau2.entries) + [e for e in tau1.entries if e.prompt not in updated]
    return TraversalPrefs(tuple(entries))


@dataclass(frozen=True)
class HistoryEntry:
    """One past operator call: the scene embedding and the preferences it left."""

    embedding: Embedding
    prefs: TraversalPrefs
    frame_id: int
    created_at: float


class SceneMemory:
    """Reference scene embedding plus the chronological operator-call history."""

    def __init__(self, reference: Embedding):
        self._reference = reference
        self._history: list[HistoryEntry] = []

    @property
    def reference(self) -> Embedding:
        return self._reference

    @property
    def history(self) -> tuple[HistoryEntry, ...]:
        return tuple(self._history)

    def __len__(self) -> int:
        return len(self._history)

    def set_reference(self, embedding: Embedding) -> None:
        """Move the reference scene without logging an operator call.

        Used after a successful history match; without this the scene-change
        gate would re-fire on every subsequent frame of the new scene.
        """
        self._check_dim(embedding)
        self._reference = embedding

    def find_match(
        self, e_t: Embedding, theta_scene: float
    ) -> tuple[HistoryEntry, float] | None:
        """Most-similar history entry, if its similarity clears theta_scene.

        Returns (entry, similarity) for the entry maximizing cosine similarity
        with e_t when that similarity is >= theta_scene, else None. Earliest
        entry wins ties.
        """
        self._check_dim(e_t)
        best: tuple[HistoryEntry, float] | None = None
        for entry in self._history:
            sim = cosine_similarity(e_t, entry.embedding)
            if best is None or sim > best[1]:
                best = (entry, sim)
        if best is not None and best[1] >= theta_scene:
            return best
        return None

    def record_hoc(
        self,
        e_t: Embedding,
        prefs: TraversalPrefs,
        frame_id: int,
        created_at: float = 0.0,
    ) -> HistoryEntry:
        """Log an operator call: append to history and move the reference to e_t."""
        self._check_dim(e_t)
        entry = HistoryEntry(
            embedding=e_t, prefs=prefs, frame_id=frame_id, created_at=created_at
        )
        self._history.append(entry)
        self._reference = e_t
        return entry

    def _check_dim(self, embedding: Embedding) -> None:
        if embedding.dim != self._reference.dim:
            raise DimensionMismatchError(
                f"embedding dim {embedding.dim} != episode dim {self._reference.dim}"
            )

    # Optional persistence: one JSON record per history entry, line-delimited.

    def save_history(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self._history:
                fh.write(
                    json.dumps(
                        {
                            "frame_id": entry.frame_id,
                            "created_at": entry.created_at,
                            "embedding": entry.embedding.values.tolist(),
                            "prefs": entry.prefs.as_pairs(),
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

    def load_history(self, path: str | Path) -> int:
        """Append persisted entries without moving the reference; returns count."""
        count = 0
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                embedding = Embedding(np.asarray(rec["embedding"], dtype=np.float64))
                self._check_dim(embedding)
                self._history.append(
                    HistoryEntry(
                        embedding=embedding,
                        prefs=TraversalPrefs.from_pairs([(p, w) for p, w in rec["prefs"]]),
                        frame_id=int(rec["frame_id"]),
                        created_at=float(rec["created_at"]),
                    )
                )
                count += 1
        return count
