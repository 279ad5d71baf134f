import json

import numpy as np
import pytest

import vidscan


def test_hand_trace_gives_one_pce():
    cfg = vidscan.EngineConfig()
    cfg.pce_high, cfg.pce_low, cfg.laf, cfg.cape_filter = 0.8, 0.3, 0, 1.0
    events, stats = vidscan.run_trace(cfg, vidscan.Trace([0.1, 0.9, 0.9, 0.2], [0] * 4, [0] * 4))
    assert [(e.kind, e.frame) for e in events] == [
        (vidscan.EventKind.PceStart, 1),
        (vidscan.EventKind.PceEnd, 3),
    ]
    assert stats.frames_seen == 4 and stats.capn_runs == 0


def test_policies_pick_first_and_best():
    trace = vidscan.Trace([0, 0, 0], [1, 1, 1], [0.4, 0.95, 0.99])
    cfg = vidscan.EngineConfig()
    cfg.cape_filter = 0.0
    events, _ = vidscan.run_trace(cfg, trace)
    assert [(e.frame, e.score) for e in events] == [(1, 0.95)]
    cfg.policy = vidscan.Policy.MultiCap
    events, stats = vidscan.run_trace(cfg, trace)
    assert [(e.frame, e.score) for e in events] == [(2, 0.99)]
    assert stats.capn_runs == 3


def test_trace_json_round_trip_and_validation():
    t = vidscan.Trace([0.1, 0.2], [0.3, 0.4], [0.5, 0.6])
    back = vidscan.Trace.from_json(t.to_json())
    assert back.pce == t.pce and back.capn == t.capn
    with pytest.raises(ValueError):
        vidscan.Trace([0.1], [0.2, 0.3], [0.4])


def test_prf_and_matching():
    r = vidscan.prf(2, 1, 0)
    assert r.p == pytest.approx(2 / 3) and r.r == 1.0 and r.f1 == pytest.approx(0.8)
    assert vidscan.match_captures([3, 5, 20], [(0, 9), (15, 25), (30, 40)]) == (2, 1, 1)


def test_adapter_recovers_planted_rule():
    rng = np.random.default_rng(0)
    w = np.linspace(-0.3, 0.3, 9)
    ids, attrs, labels = [], [], []
    for v in range(10):
        for _ in range(40):
            a = rng.uniform(size=10)
            ids.append(f"v{v:02d}")
            attrs.append(a.tolist())
            labels.append(float(a[:9] @ w + 0.5))
    adapters, fold_of = vidscan.fit_adapter_folds(ids, attrs, labels, 5)
    assert len(adapters) == 5 and len(fold_of) == 10
    for a in adapters:
        assert np.allclose(a.weights, w, atol=1e-4) and a.bias == pytest.approx(0.5, abs=1e-4)


def test_synth_video_and_pgm_round_trip(tmp_path):
    frames, ann = vidscan.synth_video(seed=3, pages=2)
    assert frames.dtype == np.uint8 and frames.ndim == 3 and frames.shape[1:] == (128, 96)
    a = json.loads(ann)
    assert a["capture_ranges"] and all(lo <= hi < len(frames) for lo, hi in a["capture_ranges"])
    assert json.loads(vidscan.normalize_annotations(ann)) == a
    again, _ = vidscan.synth_video(seed=3, pages=2)
    assert np.array_equal(frames, again)
    path = str(tmp_path / "f.pgm")
    vidscan.write_pgm(frames[0], path)
    assert np.array_equal(vidscan.read_pgm(path), frames[0])
    assert vidscan.letterbox(frames[0], 64, 64).shape == (64, 64)


def test_parameter_counts():
    assert vidscan.pcn_param_count(1) == 251275
    assert vidscan.pcn_param_count(2) - vidscan.pcn_param_count(1) == 1003
    assert vidscan.capn_param_count() == 408650
