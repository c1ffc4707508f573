"""Acceptance suite: one test per exit criterion, at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v`; a PASS/FAIL line per criterion
is printed in the terminal summary.
"""

import contextlib
import hashlib
import socket
import threading
import time

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from travseg.cli import main as cli_main
from travseg.demo import demo_config
from travseg.dataeval import miou
from travseg.engine import Engine, EngineEvent, ScriptedOperator
from travseg.maskops import uncertainty_map, weighted_max_pool
from travseg.memory import cosine_similarity, merge_prefs
from travseg.providers import (
    EpisodeWriter,
    ReplayEpisode,
    ScriptedEmbeddingProvider,
    ScriptedMaskProvider,
    unit_embedding,
)
from travseg.dataeval.runner import run_hoc_sweep
from travseg.service import build_service
from travseg.types import (
    AttentionMap,
    BinaryMask,
    EngineConfig,
    Frame,
    RoiSpec,
    TraversalPrefs,
    validate_prefs,
)

from conftest import REPO_ROOT
from oracles import miou_set_oracle, pool_brute_force

FULL_ROI = RoiSpec("full", ((0, 0), (1, 0), (1, 1), (0, 1)))


def frame(frame_id, width=8, height=8):
    return Frame(id=frame_id, pixels=np.zeros((height, width, 3), dtype=np.uint8))


@pytest.mark.acceptance(name="pooling oracle equivalence (1000 random instances, exact)")
def test_pooling_oracle_equivalence():
    rng = np.random.default_rng(20240901)
    start = time.monotonic()
    for _ in range(1000):
        k = int(rng.integers(1, 6))
        height = int(rng.integers(1, 17))
        width = int(rng.integers(1, 17))
        masks = [AttentionMap(rng.random((height, width))) for _ in range(k)]
        weights = [float(w) for w in rng.uniform(-1.0, 1.0, size=k)]
        prefs = validate_prefs([(f"p{i}", w) for i, w in enumerate(weights)])
        pooled = weighted_max_pool(masks, prefs)
        expected = pool_brute_force([m.values.tolist() for m in masks], weights)
        assert pooled.values.tolist() == expected  # exact, same arithmetic
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"oracle comparison took {elapsed:.1f}s"


@pytest.mark.acceptance(name="map algebra invariants (ranges, monotonicity, sign), 1000 cases")
def test_map_algebra_invariants():
    rng = np.random.default_rng(77)
    for _ in range(1000):
        k = int(rng.integers(1, 6))
        height = int(rng.integers(1, 13))
        width = int(rng.integers(1, 13))
        masks = [AttentionMap(rng.random((height, width))) for _ in range(k)]

        unc = uncertainty_map(masks)
        assert unc.values.min() >= 0.0 and unc.values.max() <= 1.0

        weights = rng.uniform(-1.0, 1.0, size=k)
        prefs = validate_prefs([(f"p{i}", float(w)) for i, w in enumerate(weights)])
        pooled = weighted_max_pool(masks, prefs)
        assert pooled.values.min() >= -1.0 and pooled.values.max() <= 1.0

        extra = AttentionMap(rng.random((height, width)))
        grown = uncertainty_map(masks + [extra])
        assert (grown.values <= unc.values).all()

        sign = 1.0 if rng.random() < 0.5 else -1.0
        uniform = validate_prefs(
            [(f"p{i}", float(sign * rng.uniform(0, 1))) for i in range(k)]
        )
        signed = weighted_max_pool(masks, uniform)
        if sign > 0:
            assert (signed.values >= 0).all()
        else:
            assert (signed.values <= 0).all()


@pytest.mark.acceptance(name="merge laws (idempotence, precedence, union, identity)")
def test_merge_laws():
    rng = np.random.default_rng(55)
    vocabulary = [f"prompt-{i}" for i in range(20)]

    def random_prefs():
        count = int(rng.integers(0, 11))
        prompts = rng.choice(vocabulary, size=count, replace=False)
        return validate_prefs(
            [(str(p), float(rng.uniform(-1, 1))) for p in prompts]
        )

    for _ in range(1000):
        tau1, tau2 = random_prefs(), random_prefs()
        merged = merge_prefs(tau1, tau2)
        # idempotence
        assert set(merge_prefs(tau1, tau1).as_pairs()) == set(tau1.as_pairs())
        # update precedence
        for prompt, weight in tau2.as_pairs():
            assert merged.get(prompt) == weight
        # prompt-set union
        assert set(merged.prompts()) == set(tau1.prompts()) | set(tau2.prompts())
        # empty update is identity
        assert merge_prefs(tau1, TraversalPrefs()).as_pairs() == tau1.as_pairs()


def _labeled_engine(labels, mask_value=1.0, theta_scene=0.9, theta_roi=0.9,
                    operator=None, seed=3):
    engine = Engine(
        EngineConfig(
            theta_scene=theta_scene,
            theta_roi=theta_roi,
            roi=FULL_ROI,
            initial_prefs=validate_prefs([("grass", 1.0)]),
        ),
        ScriptedMaskProvider(lambda f, p: np.full((f.height, f.width), mask_value)),
        ScriptedEmbeddingProvider(lambda f: unit_embedding(seed, labels[f.id], 8).values),
        operator=operator or ScriptedOperator(),
    )
    engine.init_episode(frame(0))
    return engine


@pytest.mark.acceptance(name="state machine (a): gate soundness yields zero calls")
def test_state_machine_gate_soundness():
    labels = [str(i) for i in range(15)]  # every frame looks like a new scene
    engine = _labeled_engine(labels, mask_value=0.0, theta_scene=-1.0, theta_roi=1.0)
    for i in range(15):
        assert engine.step(frame(i)).event is EngineEvent.NO_CALL
    assert engine.scene_calls == 0 and engine.roi_calls == 0 and engine.history_updates == 0


@pytest.mark.acceptance(name="state machine (b): gate saturation triggers scene branch every frame")
def test_state_machine_gate_saturation():
    # theta_scene at its maximum legal value; all-distinct embeddings keep
    # similarity strictly below it on every frame after the first.
    labels = [str(i) for i in range(15)]
    engine = _labeled_engine(labels, mask_value=1.0, theta_scene=1.0)
    for i in range(1, 15):
        outcome = engine.step(frame(i))
        assert outcome.event is EngineEvent.HOC_SCENE_CHANGE
        assert outcome.scene_similarity < 1.0
    assert engine.scene_calls == 14


@pytest.mark.acceptance(name="state machine (c): two-scene episode matches golden call curve")
def test_state_machine_two_scene_golden_csv(tmp_path):
    directory = tmp_path / "episode"
    writer = EpisodeWriter(directory, 8, 8, 8)
    a = unit_embedding(3, "A", 8)
    b = unit_embedding(3, "B", 8)
    assert cosine_similarity(a, b) < 0.9  # scenario precondition
    ones = np.ones((8, 8))
    for i in range(20):
        writer.add_frame(
            Frame(id=i, pixels=np.zeros((8, 8, 3), dtype=np.uint8)),
            (a if i % 2 == 0 else b).values,
            {"grass": ones},
        )
    writer.finalize()

    config = EngineConfig(
        theta_scene=0.9,
        theta_roi=0.9,
        roi=FULL_ROI,
        initial_prefs=validate_prefs([("grass", 1.0)]),
    )
    out = tmp_path / "sweep.csv"
    results = run_hoc_sweep(ReplayEpisode(directory), config, [0.9], ScriptedOperator, out_path=out)
    assert results[0].total_scene_calls == 2
    assert results[0].total_roi_calls == 0
    assert results[0].total_history_updates == 17

    golden = (REPO_ROOT / "tests" / "golden" / "two_scene_alternating.csv").read_bytes()
    assert out.read_bytes() == golden


@pytest.mark.acceptance(name="state machine (d): forced unknown object with u_ROI = 1")
def test_state_machine_forced_unknown_object():
    engine = _labeled_engine(["A", "A"], mask_value=0.0, theta_roi=0.6)
    outcome = engine.step(frame(0))
    assert outcome.event is EngineEvent.HOC_UNKNOWN_OBJECT
    assert outcome.u_roi == 1.0
    assert outcome.u_roi > engine.theta_roi


@pytest.mark.acceptance(name="MIoU oracle (500 random pairs within 1e-12, hand case 1/3)")
def test_miou_oracle():
    rng = np.random.default_rng(4242)
    for _ in range(500):
        height = int(rng.integers(1, 33))
        width = int(rng.integers(1, 33))
        pred = rng.integers(0, 2, (height, width)).astype(np.uint8)
        gt = rng.integers(0, 2, (height, width)).astype(np.uint8)
        ignore = (rng.random((height, width)) < rng.uniform(0, 0.4)).astype(np.uint8)
        got = miou(BinaryMask(pred), BinaryMask(gt), BinaryMask(ignore))
        iou1, iou0, mean = miou_set_oracle(pred.tolist(), gt.tolist(), ignore.tolist())
        assert abs(got.iou_traversable - iou1) <= 1e-12
        assert abs(got.iou_non_traversable - iou0) <= 1e-12
        assert abs(got.miou - mean) <= 1e-12

    hand = miou(
        BinaryMask([[1, 1], [0, 0]]), BinaryMask([[1, 0], [1, 0]])
    )
    assert abs(hand.miou - 1 / 3) <= 1e-12


@pytest.mark.acceptance(name="replay determinism: identical episode logs (hash-equal)")
def test_replay_determinism(tmp_path, bundled_episode_dir):
    runner = CliRunner()
    digests = []
    for name in ("first.jsonl", "second.jsonl"):
        log = tmp_path / name
        result = runner.invoke(
            cli_main,
            [
                "replay",
                "--episode", str(bundled_episode_dir),
                "--config", str(bundled_episode_dir / "config.yaml"),
                "--log", str(log),
            ],
        )
        assert result.exit_code == 0, result.output
        digests.append(hashlib.sha256(log.read_bytes()).hexdigest())
    assert digests[0] == digests[1]


# ROI differentiation scenario: a zero-attention band, 6 rows tall, descends
# one row per frame toward the bottom of a 32x32 image. The wide/tall ROI
# sees it breach the gate earlier than the small near-field ROI.
ATV_ROI = RoiSpec("atv", ((0.25, 0.4375), (0.75, 0.4375), (0.75, 0.9375), (0.25, 0.9375)))
QUADRUPED_ROI = RoiSpec("quadruped", ((0.375, 0.75), (0.625, 0.75), (0.625, 0.9375), (0.375, 0.9375)))
ATV_FIRST_CALL_FRAME = 13     # golden: overlap reaches 5/16 rows > 0.25
QUAD_FIRST_CALL_FRAME = 20    # golden: overlap reaches 2/6 rows > 0.25


def _first_unknown_object_frame(roi: RoiSpec) -> int | None:
    def band_mask(f, prompt):
        values = np.ones((32, 32))
        values[f.id : f.id + 6, :] = 0.0
        return values

    engine = Engine(
        EngineConfig(
            theta_scene=0.9,
            theta_roi=0.25,
            roi=roi,
            initial_prefs=validate_prefs([("dry grass", 1.0)]),
        ),
        ScriptedMaskProvider(band_mask),
        ScriptedEmbeddingProvider(lambda f: unit_embedding(1, "field", 8).values),
        operator=ScriptedOperator(),
    )
    engine.init_episode(frame(0, width=32, height=32))
    for i in range(40):
        outcome = engine.step(frame(i, width=32, height=32))
        assert EngineEvent.HOC_SCENE_CHANGE not in outcome.calls
        if outcome.event is EngineEvent.HOC_UNKNOWN_OBJECT:
            return i
    return None


@pytest.mark.acceptance(name="ROI differentiation: large ROI fires >= 3 frames earlier")
def test_roi_differentiation():
    atv_first = _first_unknown_object_frame(ATV_ROI)
    quad_first = _first_unknown_object_frame(QUADRUPED_ROI)
    assert atv_first == ATV_FIRST_CALL_FRAME
    assert quad_first == QUAD_FIRST_CALL_FRAME
    assert quad_first - atv_first >= 3


@pytest.mark.acceptance(name="sidecar conformance: shared provider suite passes both backends")
def test_sidecar_conformance():
    sidecar = pytest.importorskip(
        "travseg_sidecar", reason="sidecar package not installed (see sidecar/)"
    )
    from travseg.providers import (
        RemoteProvider,
        SyntheticEmbeddingProvider,
        SyntheticMaskProvider,
    )
    from travseg.providers.conformance import (
        check_embedding_conformance,
        check_mask_conformance,
    )

    app = sidecar.build_app(sidecar.HashBackend(seed=0))
    with _run_uvicorn(app) as url:
        remote = RemoteProvider(url)
        check_mask_conformance(remote)
        check_embedding_conformance(remote)
    check_mask_conformance(SyntheticMaskProvider(seed=0))
    check_embedding_conformance(SyntheticEmbeddingProvider(seed=0))


@contextlib.contextmanager
def _run_uvicorn(app):
    import uvicorn

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10.0
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("uvicorn did not start within 10s")
        time.sleep(0.02)
    try:
        yield f"http://127.0.0.1:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=5.0)


@pytest.mark.acceptance(name="console end-to-end: hoc_pending -> resolve -> merged prefs (<30s)")
def test_console_end_to_end(bundled_episode_dir, tmp_path):
    start = time.monotonic()
    episode = ReplayEpisode(bundled_episode_dir)
    app = build_service(
        episode,
        demo_config(),
        console_dir=None,
        fps=0.0,
        operator=None,
        log_path=tmp_path / "episode.jsonl",
    )
    with TestClient(app) as client:
        with client.websocket_connect("/events?since=0") as ws:
            pending = None
            for _ in range(100):
                event = ws.receive_json()
                if event["type"] == "hoc_pending":
                    pending = event
                    break
            assert pending is not None, "no hoc_pending event arrived"
            response = client.post("/hoc/resolve", json={"prefs": [["mud", -0.5]]})
            assert response.status_code == 200
            saw_resolved = False
            for _ in range(100):
                event = ws.receive_json()
                if event["type"] == "hoc_resolved":
                    saw_resolved = True
                if event["type"] == "frame_outcome":
                    assert saw_resolved
                    assert ["mud", -0.5] in event["data"]["prefs"]
                    break
            else:
                raise AssertionError("no frame_outcome after resolve")
    assert time.monotonic() - start < 30.0
