import csv
import filecmp
import json
import statistics

import numpy as np
import pytest

from ptydip import harness
from ptydip.data import load_image_dir, write_idx
from ptydip.dip.io import save_model
from ptydip.dip.model import init_params
from ptydip.forward import Geometry, record_amplitudes
from ptydip.harness import ExperimentConfig, emit_images, run_benchmark, summarize
from ptydip.reconstruct import Trajectory, first_crossing, run_reconstruction

SMALL_GEOM = {"probe_size": 5, "sigma": 1.0, "shift": 2, "pad": None}


@pytest.fixture
def small_problem():
    g = Geometry(probe_size=5, sigma=1.0, shift=2)
    img = np.random.default_rng(0).random((8, 8))
    obj = g.embed(img)
    probe, scan = g.probe(), g.scan(img.shape)
    return record_amplitudes(obj, probe, scan), probe, scan, obj, g.roi(img.shape)


@pytest.fixture
def idx_dataset(tmp_path):
    rng = np.random.default_rng(5)
    path = tmp_path / "imgs.idx"
    write_idx(path, rng.integers(0, 256, size=(6, 8, 8), dtype=np.uint8))
    return {"kind": "idx", "path": str(path)}


def test_first_crossing_example():
    assert first_crossing([0.5, 0.2, 0.09, 0.05], 0.1) == 2
    assert first_crossing([0.5, 0.2], 0.1) is None
    assert first_crossing([0.1], 0.1) == 0


def test_zero_iterations_keeps_initial_state(small_problem):
    a, probe, scan, obj, roi = small_problem
    t = run_reconstruction(a, probe, scan, "AP", 0, seed=1, true_object=obj, roi=roi)
    assert [r.iteration for r in t.records] == [0]
    assert 0 <= t.records[0].e0 <= 1


def test_switch_zero_equals_dm_bitwise(small_problem):
    a, probe, scan, obj, roi = small_problem
    dm = run_reconstruction(a, probe, scan, "DM", 12, seed=3, true_object=obj, roi=roi)
    hd = run_reconstruction(a, probe, scan, "DIP_then_DM", 12, seed=3, switch=0, true_object=obj, roi=roi)
    assert [(r.e0, r.psnr, r.amp_mismatch) for r in dm.records] == [(r.e0, r.psnr, r.amp_mismatch) for r in hd.records]
    np.testing.assert_array_equal(dm.final_object, hd.final_object)


def test_zero_net_dip_equals_ap(small_problem):
    a, probe, scan, obj, roi = small_problem
    params = init_params(hidden=2, n_inner=1, kernel=(3, 3, 1, 1))
    ap = run_reconstruction(a, probe, scan, "AP", 4, seed=3, true_object=obj, roi=roi)
    dip = run_reconstruction(a, probe, scan, "DIP", 4, seed=3, dip_params=params, true_object=obj, roi=roi)
    assert [r.e0 for r in ap.records] == [r.e0 for r in dip.records]


def test_handoff_uses_network_only_before_switch(small_problem, monkeypatch):
    from ptydip.dip import model

    a, probe, scan, *_ = small_problem
    calls = []
    real = model.dip_iterate
    monkeypatch.setattr(model, "dip_iterate", lambda *args, **kw: calls.append(1) or real(*args, **kw))
    params = init_params(hidden=2, n_inner=1, kernel=(3, 3, 1, 1))
    run_reconstruction(a, probe, scan, "DIP_then_DM", 9, seed=0, dip_params=params, switch=5)
    assert len(calls) == 5


def test_reconstruction_errors(small_problem):
    a, probe, scan, *_ = small_problem
    with pytest.raises(ValueError, match="DIP parameters"):
        run_reconstruction(a, probe, scan, "DIP", 2, seed=0)
    with pytest.raises(ValueError):
        run_reconstruction(a, probe, scan, "AP", -1, seed=0)
    with pytest.raises(ValueError):
        run_reconstruction(a, probe, scan, "GLA", 1, seed=0)


def test_emit_images(tmp_path):
    t = Trajectory(method="AP", seed=0, image_id=3)
    t.snapshots = {0: np.full((6, 6), 0.5 + 0j), 4: np.full((6, 6), 1.7 + 0j) * np.exp(1j)}
    files = emit_images(t, [0, 4, 9], tmp_path)
    assert [f.name for f in files] == ["AP_3_0.pgm", "AP_3_4.pgm"]
    assert set(files[0].read_bytes()[-36:]) == {128}
    assert set(files[1].read_bytes()[-36:]) == {255}


def test_emitted_image_round_trip(tmp_path, rng):
    v = rng.uniform(-0.3, 1.3, size=(10, 10))
    t = Trajectory(method="DM", seed=0, image_id=0)
    t.snapshots = {5: v.astype(complex)}
    emit_images(t, [5], tmp_path)
    back = load_image_dir(tmp_path, 10).images[0]
    assert np.max(np.abs(back - np.clip(np.abs(v), 0, 1))) <= 1 / 255


def _cfg(tmp_path, dataset, name, **kw):
    base = dict(dataset=dataset, geometry=SMALL_GEOM, methods=["AP", "DM"], iterations=6, n_images=2, seeds=2,
                snapshot_iterations=[0, 6], output_dir=str(tmp_path / name))
    base.update(kw)
    return ExperimentConfig(**base)


def test_zero_iteration_bench(tmp_path, idx_dataset):
    res = run_benchmark(_cfg(tmp_path, idx_dataset, "z", methods=["AP"], iterations=0))
    assert [s["method"] for s in res["summary"]] == ["AP"]
    assert all(c["iteration"] == 0 for c in res["curves"]) and len(res["curves"]) == 1


def test_bench_outputs_and_aggregation(tmp_path, idx_dataset):
    cfg = _cfg(tmp_path, idx_dataset, "b")
    run_benchmark(cfg)
    out = tmp_path / "b"
    for name in ("config.json", "curves_raw.csv", "curves.csv", "summary.csv", "timing.csv", "failures.csv"):
        assert (out / name).exists()
    resolved = json.loads((out / "config.json").read_text())
    assert len(resolved["image_ids"]) == 2
    ids = resolved["image_ids"]
    assert {p.name for p in (out / "images").iterdir()} >= {f"AP_{ids[0]}_6.pgm", f"true_{ids[0]}.pgm"}

    with open(out / "curves_raw.csv") as fh:
        raw = list(csv.DictReader(fh))
    with open(out / "curves.csv") as fh:
        curves = list(csv.DictReader(fh))
    assert len(raw) == 2 * 2 * 2 * 7
    for c in curves:
        vals = [float(r["E0"]) for r in raw if r["method"] == c["method"] and r["iteration"] == c["iteration"]]
        assert int(c["n"]) == len(vals) == 4
        assert float(c["E0_mean"]) == pytest.approx(statistics.fmean(vals), rel=1e-12)
        assert float(c["E0_std"]) == pytest.approx(statistics.pstdev(vals), rel=1e-9, abs=1e-15)
        ps = [float(r["PSNR"]) for r in raw if r["method"] == c["method"] and r["iteration"] == c["iteration"]]
        assert float(c["PSNR_mean"]) == pytest.approx(statistics.fmean(ps), rel=1e-12)

    # report recomputes the same tables from the raw file
    before = (out / "summary.csv").read_bytes(), (out / "curves.csv").read_bytes()
    harness.report(out)
    assert ((out / "summary.csv").read_bytes(), (out / "curves.csv").read_bytes()) == before


def test_bench_is_deterministic(tmp_path, idx_dataset):
    run_benchmark(_cfg(tmp_path, idx_dataset, "r1"))
    run_benchmark(_cfg(tmp_path, idx_dataset, "r2"))
    for name in ("curves_raw.csv", "curves.csv", "summary.csv", "failures.csv"):
        assert filecmp.cmp(tmp_path / "r1" / name, tmp_path / "r2" / name, shallow=False)


def test_failures_recorded_and_run_continues(tmp_path, idx_dataset, monkeypatch):
    real = harness.run_reconstruction

    def flaky(a, probe, scan, method, *args, **kw):
        if method == "DM":
            raise FloatingPointError("boom")
        return real(a, probe, scan, method, *args, **kw)

    monkeypatch.setattr(harness, "run_reconstruction", flaky)
    res = run_benchmark(_cfg(tmp_path, idx_dataset, "f"))
    with open(tmp_path / "f" / "failures.csv") as fh:
        fails = list(csv.DictReader(fh))
    assert len(fails) == 4 and all("boom" in f["error"] for f in fails)
    assert [s["method"] for s in res["summary"]] == ["AP"]


def test_dip_methods_need_model(tmp_path, idx_dataset):
    with pytest.raises(ValueError, match="model"):
        _cfg(tmp_path, idx_dataset, "m", methods=["DIP"])
    path = tmp_path / "tiny.dipm"
    save_model(init_params(hidden=2, n_inner=1, kernel=(3, 3, 1, 1), head_scale=0.1), path)
    cfg = _cfg(tmp_path, idx_dataset, "m", methods=[{"name": "DIP_tiny", "method": "DIP", "model": str(path)}], iterations=2, seeds=1)
    res = run_benchmark(cfg)
    assert res["summary"][0]["method"] == "DIP_tiny"
    with pytest.raises(ValueError, match="unknown config"):
        ExperimentConfig.from_dict({"iterationz": 3})


def test_summary_conventions():
    rows = []
    for seed, series in enumerate([[0.5, 0.2, 0.09, 0.05], [0.5, 0.4, 0.3, 0.2]]):
        rows += [{"method": "X", "image_id": 0, "seed": seed, "iteration": i, "E0": e, "PSNR": 0.0, "amp_mismatch": 0.0}
                 for i, e in enumerate(series)]
    curves = harness.aggregate_curves(rows)
    s = summarize(rows, curves, 0.1, 3)[0]
    assert s["n_reached"] == 1
    assert s["mean_iters_to_threshold"] == (2 + 4) / 2
    assert s["curve_iters_to_threshold"] == ""  # mean curve ends at 0.125
