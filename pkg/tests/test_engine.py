"""State-machine behavior of the per-frame evaluator."""

import threading

import numpy as np
import pytest

from travseg.engine import (
    EXTERNAL_OPERATOR,
    Engine,
    EngineEvent,
    HocReason,
    HocResponse,
    NullOperator,
    ScriptedOperator,
)
from travseg.errors import (
    EmptyInputError,
    FrameOrderError,
    NoPendingRequestError,
    TravsegError,
)
from travseg.providers import (
    ScriptedEmbeddingProvider,
    ScriptedMaskProvider,
    unit_embedding,
)
from travseg.types import EngineConfig, Frame, RoiSpec, TraversalPrefs, validate_prefs

FULL_ROI = RoiSpec("full", ((0, 0), (1, 0), (1, 1), (0, 1)))


def frame(frame_id, width=8, height=8):
    return Frame(id=frame_id, pixels=np.zeros((height, width, 3), dtype=np.uint8))


def uniform_masks(value=1.0):
    return ScriptedMaskProvider(
        lambda f, prompt: np.full((f.height, f.width), value)
    )


def labeled_embeddings(labels, seed=3, dim=8):
    """Embeddings keyed by per-frame scene labels (list indexed by frame id)."""
    return ScriptedEmbeddingProvider(
        lambda f: unit_embedding(seed, labels[f.id], dim).values
    )


def config(theta_scene=0.9, theta_roi=0.5, prefs=None, **kw):
    return EngineConfig(
        theta_scene=theta_scene,
        theta_roi=theta_roi,
        roi=FULL_ROI,
        initial_prefs=prefs if prefs is not None else validate_prefs([("grass", 1.0)]),
        **kw,
    )


def make_engine(labels, mask_value=1.0, operator=None, **config_kw):
    eng = Engine(
        config(**config_kw),
        uniform_masks(mask_value),
        labeled_embeddings(labels),
        operator=operator or ScriptedOperator(),
    )
    eng.init_episode(frame(0))
    return eng


class TestBasicFlow:
    def test_first_frame_is_no_call(self):
        eng = make_engine(["A", "A"])
        outcome = eng.step(frame(0))
        assert outcome.event is EngineEvent.NO_CALL
        assert outcome.scene_similarity == 1.0
        assert outcome.prefs_after.as_pairs() == [("grass", 1.0)]

    def test_both_gates_closed_prefs_unchanged(self):
        eng = make_engine(["A"] * 5)
        for i in range(5):
            outcome = eng.step(frame(i))
            assert outcome.event is EngineEvent.NO_CALL
        assert eng.scene_calls == 0 and eng.roi_calls == 0

    def test_init_requires_prompts(self):
        with pytest.raises(EmptyInputError):
            Engine(
                config(prefs=TraversalPrefs()),
                uniform_masks(),
                labeled_embeddings(["A"]),
            ).init_episode(frame(0))

    def test_step_before_init_rejected(self):
        eng = Engine(config(), uniform_masks(), labeled_embeddings(["A"]))
        with pytest.raises(TravsegError):
            eng.step(frame(0))

    def test_frame_ids_must_increase(self):
        eng = make_engine(["A", "A", "A"])
        eng.step(frame(1))
        with pytest.raises(FrameOrderError):
            eng.step(frame(1))
        with pytest.raises(FrameOrderError):
            eng.step(frame(0))


class TestSceneChange:
    def test_unseen_scene_calls_operator(self):
        operator = ScriptedOperator(
            responses=[(1, validate_prefs([("mud", -0.5)]))]
        )
        eng = make_engine(["A", "B", "B"], operator=operator)
        eng.step(frame(0))
        outcome = eng.step(frame(1))
        assert outcome.event is EngineEvent.HOC_SCENE_CHANGE
        assert outcome.scene_similarity < eng.theta_scene
        assert outcome.prefs_after.as_pairs() == [("mud", -0.5), ("grass", 1.0)]
        assert len(eng.memory.history) == 1
        # reference moved: the next identical frame is quiet
        assert eng.step(frame(2)).event is EngineEvent.NO_CALL

    def test_history_revisit_avoids_operator(self):
        # After calls on B and A, revisiting B must resolve from history alone.
        operator = ScriptedOperator(responses=[(1, validate_prefs([("mud", -0.5)]))])
        eng = make_engine(["A", "B", "A", "B"], operator=operator)
        eng.step(frame(0))
        eng.step(frame(1))  # HOC on B
        eng.step(frame(2))  # HOC on A (reference moved to B at frame 1)
        # poison the operator: any further call would raise
        eng.operator = _ExplodingOperator()
        outcome = eng.step(frame(3))
        assert outcome.event is EngineEvent.HISTORY_UPDATE
        assert outcome.matched_frame_id == 1

    def test_history_update_merges_matched_prefs(self):
        # Scripted: frame1 scene B -> operator adds mud; frame2 scene A (fresh
        # reference B makes A a change; A is not in history -> call, adds rock);
        # frame3 back to B -> history entry for B merges mud back in.
        operator = ScriptedOperator(
            responses=[
                (1, validate_prefs([("mud", -0.5)])),
                (2, validate_prefs([("rock", -1.0)])),
            ]
        )
        eng = make_engine(["A", "B", "A", "B"], operator=operator)
        eng.step(frame(0))
        assert eng.step(frame(1)).event is EngineEvent.HOC_SCENE_CHANGE
        assert eng.step(frame(2)).event is EngineEvent.HOC_SCENE_CHANGE
        outcome = eng.step(frame(3))
        assert outcome.event is EngineEvent.HISTORY_UPDATE
        assert outcome.matched_frame_id == 1
        assert outcome.match_similarity == pytest.approx(1.0)
        # merged history prefs win for shared prompts, everything survives
        assert set(outcome.prefs_after.prompts()) == {"grass", "mud", "rock"}
        assert eng.history_updates == 1

    def test_history_update_does_not_append_history(self):
        operator = ScriptedOperator(responses=[(1, validate_prefs([("mud", -0.5)]))])
        eng = make_engine(["A", "B", "A", "B"], operator=operator)
        eng.step(frame(0))
        eng.step(frame(1))
        eng.operator = _ExplodingOperator()
        eng.step(frame(3, width=8))  # skip id 2; B matches history
        assert len(eng.memory.history) == 1  # no growth from the match


class TestUnknownObject:
    def test_zero_attention_forces_call_with_unit_uncertainty(self):
        eng = Engine(
            config(theta_roi=0.9),
            uniform_masks(0.0),
            labeled_embeddings(["A"]),
            operator=ScriptedOperator(),
        )
        eng.init_episode(frame(0))
        outcome = eng.step(frame(0))
        assert outcome.event is EngineEvent.HOC_UNKNOWN_OBJECT
        assert outcome.u_roi == 1.0
        assert eng.roi_calls == 1
        assert len(eng.memory.history) == 1

    def test_operator_prompt_fixes_roi_next_frames(self):
        def masks(f, prompt):
            if prompt == "barrel":
                return np.full((f.height, f.width), 0.95)
            return np.zeros((f.height, f.width))

        operator = ScriptedOperator(responses=[(0, validate_prefs([("barrel", -1.0)]))])
        eng = Engine(
            config(theta_roi=0.5),
            ScriptedMaskProvider(masks),
            labeled_embeddings(["A", "A"]),
            operator=operator,
        )
        eng.init_episode(frame(0))
        first = eng.step(frame(0))
        assert first.event is EngineEvent.HOC_UNKNOWN_OBJECT
        # recompute with the new prompt dropped the score below the gate
        assert first.u_roi == pytest.approx(0.05)
        second = eng.step(frame(1))
        assert second.event is EngineEvent.NO_CALL
        assert eng.roi_calls == 1

    def test_scene_and_roi_can_fire_in_one_frame(self):
        operator = ScriptedOperator()
        eng = Engine(
            config(theta_roi=0.5),
            ScriptedMaskProvider(
                lambda f, p: np.full((f.height, f.width), 1.0 if f.id == 0 else 0.0)
            ),
            labeled_embeddings(["A", "B"]),
            operator=operator,
        )
        eng.init_episode(frame(0))
        eng.step(frame(0))
        outcome = eng.step(frame(1))
        assert outcome.calls == (
            EngineEvent.HOC_SCENE_CHANGE,
            EngineEvent.HOC_UNKNOWN_OBJECT,
        )
        assert outcome.event is EngineEvent.HOC_UNKNOWN_OBJECT
        assert eng.scene_calls == 1 and eng.roi_calls == 1
        assert len(eng.memory.history) == 2


class TestResolveHoc:
    def test_timeout_fails_safe_and_keeps_request_pending(self):
        eng = make_engine(["A", "B"], operator=NullOperator())
        eng.step(frame(0))
        outcome = eng.step(frame(1))
        assert outcome.event is EngineEvent.HOC_SCENE_CHANGE
        assert outcome.timed_out
        assert not outcome.binary.values.any()  # fail safe: nothing traversable
        assert eng.pending_request is not None
        assert eng.pending_request.reason is HocReason.SCENE_CHANGE

    def test_late_resolve_applies_merge_and_history(self):
        eng = make_engine(["A", "B"], operator=NullOperator())
        eng.step(frame(0))
        eng.step(frame(1))
        assert len(eng.memory.history) == 0
        eng.resolve_hoc(HocResponse(prefs=validate_prefs([("mud", -0.5)])))
        assert eng.pending_request is None
        assert eng.prefs.as_pairs() == [("mud", -0.5), ("grass", 1.0)]
        assert len(eng.memory.history) == 1
        assert eng.memory.history[0].frame_id == 1

    def test_empty_response_still_updates_reference_and_history(self):
        eng = make_engine(["A", "B", "B"], operator=NullOperator())
        eng.step(frame(0))
        eng.step(frame(1))
        eng.resolve_hoc(HocResponse())
        assert eng.prefs.as_pairs() == [("grass", 1.0)]
        assert len(eng.memory.history) == 1
        # reference moved to the unanswered frame's embedding
        outcome = eng.step(frame(2))
        assert outcome.event is EngineEvent.NO_CALL

    def test_resolve_without_pending_rejected(self):
        eng = make_engine(["A"])
        with pytest.raises(NoPendingRequestError):
            eng.resolve_hoc(HocResponse())

    def test_double_resolve_rejected(self):
        eng = make_engine(["A", "B"], operator=NullOperator())
        eng.step(frame(0))
        eng.step(frame(1))
        eng.resolve_hoc(HocResponse())
        with pytest.raises(NoPendingRequestError):
            eng.resolve_hoc(HocResponse())

    def test_no_new_request_while_one_is_pending(self):
        eng = make_engine(["A", "B", "C"], operator=NullOperator())
        eng.step(frame(0))
        eng.step(frame(1))
        first_pending = eng.pending_request
        outcome = eng.step(frame(2))  # scene C also unseen; gate fires again
        assert outcome.timed_out
        assert eng.pending_request.request_id == first_pending.request_id

    def test_external_operator_round_trip(self):
        eng = Engine(
            config(hoc_timeout=10.0),
            uniform_masks(1.0),
            labeled_embeddings(["A", "B"]),
            operator=EXTERNAL_OPERATOR,
        )
        eng.init_episode(frame(0))
        eng.step(frame(0))

        pending_seen = threading.Event()
        eng.add_listener(lambda kind, _: pending_seen.set() if kind == "hoc_pending" else None)
        result: list = []

        def run():
            result.append(eng.step(frame(1)))

        worker = threading.Thread(target=run)
        worker.start()
        assert pending_seen.wait(timeout=5.0)
        eng.resolve_hoc(HocResponse(prefs=validate_prefs([("mud", -0.5)])))
        worker.join(timeout=5.0)
        assert not worker.is_alive()
        outcome = result[0]
        assert outcome.event is EngineEvent.HOC_SCENE_CHANGE
        assert not outcome.timed_out
        assert outcome.prefs_after.get("mud") == -0.5


class _ExplodingOperator:
    def answer(self, request):
        raise AssertionError("operator must not be called")


class TestGates:
    def test_gate_soundness_no_events_possible(self):
        labels = [str(i) for i in range(10)]  # every frame a new scene
        eng = Engine(
            config(theta_scene=-1.0, theta_roi=1.0),
            uniform_masks(0.0),  # maximal uncertainty everywhere
            labeled_embeddings(labels),
            operator=_ExplodingOperator(),
        )
        eng.init_episode(frame(0))
        for i in range(10):
            outcome = eng.step(frame(i))
            assert outcome.event is EngineEvent.NO_CALL
        assert eng.scene_calls == 0 and eng.roi_calls == 0 and eng.history_updates == 0

    def test_gate_saturation_scene_branch_every_frame(self):
        labels = [str(i) for i in range(10)]
        eng = Engine(
            config(theta_scene=1.0),
            uniform_masks(1.0),
            labeled_embeddings(labels),
            operator=ScriptedOperator(),
        )
        eng.init_episode(frame(0))
        for i in range(1, 10):  # frame 0 has similarity exactly 1.0 == theta
            outcome = eng.step(frame(i))
            assert outcome.event is EngineEvent.HOC_SCENE_CHANGE

    def test_revisit_economy_two_scenes(self):
        labels = ["A" if i % 2 == 0 else "B" for i in range(20)]
        eng = make_engine(labels, operator=ScriptedOperator())
        events = [eng.step(frame(i)).event for i in range(20)]
        calls = [e for e in events if e is EngineEvent.HOC_SCENE_CHANGE]
        assert len(calls) == 2
        assert events[3:] == [EngineEvent.HISTORY_UPDATE] * 17


class TestInvariants:
    def test_prompt_set_never_shrinks(self):
        operator = ScriptedOperator(
            responses=[
                (1, validate_prefs([("mud", -0.5)])),
                (3, validate_prefs([("grass", 0.2)])),  # re-weight only
            ]
        )
        labels = ["A", "B", "A", "C", "B", "C"]
        eng = make_engine(labels, operator=operator)
        seen: set = set()
        for i in range(6):
            outcome = eng.step(frame(i))
            prompts = set(outcome.prefs_after.prompts())
            assert seen <= prompts
            seen = prompts

    def test_posted_thresholds_validated(self):
        eng = make_engine(["A"])
        with pytest.raises(ValueError):
            eng.set_thresholds(theta_roi=1.5)
        eng.set_thresholds(theta_scene=0.5, theta_trav=-0.25)
        assert eng.theta_scene == 0.5 and eng.theta_trav == -0.25

    def test_history_persisted_and_reloaded_behind_flag(self, tmp_path):
        history_path = tmp_path / "history.jsonl"

        def build(persist: bool) -> Engine:
            operator = ScriptedOperator(responses=[(1, validate_prefs([("mud", -0.5)]))])
            eng = Engine(
                config(persist_history=persist),
                uniform_masks(1.0),
                labeled_embeddings(["A", "B"]),
                operator=operator,
                history_path=history_path,
            )
            eng.init_episode(frame(0))
            return eng

        first = build(persist=False)
        first.step(frame(0))
        first.step(frame(1))  # records one operator call
        first.close()
        assert history_path.is_file()

        # default: a new episode starts with empty history (not closed here,
        # since closing writes this run's own empty history artifact)
        fresh = build(persist=False)
        assert len(fresh.memory.history) == 0

        # opt-in: the artifact seeds the next episode's history
        reused = build(persist=True)
        assert len(reused.memory.history) == 1
        assert reused.memory.history[0].prefs.get("mud") == -0.5

    def test_determinism_same_inputs_same_outcomes(self):
        def run():
            operator = ScriptedOperator(responses=[(1, validate_prefs([("mud", -0.5)]))])
            labels = ["A", "B", "A", "B", "C", "C"]
            eng = Engine(
                config(theta_roi=0.99),
                uniform_masks(0.8),
                labeled_embeddings(labels),
                operator=operator,
            )
            eng.init_episode(frame(0))
            return [eng.step(frame(i)).log_record() for i in range(6)]

        assert run() == run()
