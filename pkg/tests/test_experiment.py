import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from brainalign import cli, ingest
from brainalign.datamodel import ResultRecord, RoiMaskSet
from brainalign.experiment import (
    Config,
    aggregate_records,
    emit_voxel_table,
    load_all_records,
    run,
    significance_grid,
    stats_table,
    write_table,
)
from brainalign.synth import SynthConfig, generate, subject_series


def hash_tree(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Two models (one informative, one pure decoy), 2 layers x 2 seqlens,
    3 subjects sharing the informative signal."""
    root = tmp_path_factory.mktemp("exp")
    cfg = SynthConfig(
        words=1600, dims=24, runs=4, voxels=12, noise_sigma=0.6, signal_rank=8,
        feature_snr={"Characters": 2.5, "Motion": 1.0}, feature_fraction=0.2, seed=0,
    )
    data = generate(cfg)
    decoy = generate(SynthConfig(
        words=1600, dims=24, runs=4, voxels=12, noise_sigma=1.0, signal_rank=8, seed=123,
    ))
    feats = root / "feats"
    feats.mkdir()
    for model, fm in (("good", data.features), ("decoy", decoy.features)):
        for layer in (1, 2):
            for seqlen in (5, 20):
                ingest.write_fmat(
                    feats / f"{model}_L{layer}_S{seqlen}.fmat",
                    fm.values,
                    meta={"model": model, "layer": layer, "sequence_length": seqlen},
                )
    subjects = {}
    for i in range(3):
        name = f"sub{i:02d}"
        series = subject_series(data, i)
        ingest.write_voxel_series(root / f"voxels_{name}.fmat", root / f"runs_{name}.tsv", series)
        subjects[name] = {"voxels": f"voxels_{name}.fmat", "runs": f"runs_{name}.tsv"}
    ingest.write_word_timing(root / "timing.tsv", data.timing)
    ingest.write_labels(root / "labels.tsv", data.labels)
    doc = {
        "seed": 0,
        "dataset": {
            "features": "feats/{model}_L{layer}_S{seqlen}.fmat",
            "subjects": subjects,
            "timing": "timing.tsv",
            "labels": "labels.tsv",
        },
        "sweep": {
            "models": ["good", "decoy"],
            "layers": {"good": [1, 2], "decoy": [1, 2]},
            "seqlens": {"good": [5, 20], "decoy": [5, 20]},
            "subjects": sorted(subjects),
        },
        "encoder": {"trim": 5},
        "metrics": {"block_len": 5, "reps": 60},
        "stats": {"model_pairs": [["decoy", "good"]], "alpha": 0.05, "pairing": "subject"},
        "discourse": {"sample_count": 40, "balanced": {"train_trs": 80, "test_trs": 100, "sample_count": 20}},
    }
    (root / "config.json").write_text(json.dumps(doc, indent=1))
    return root


def test_config_hash_is_content_hash(workspace):
    a = Config.load(workspace / "config.json")
    b = Config.load(workspace / "config.json")
    assert a.hash == b.hash
    b.doc["seed"] = 1
    assert a.hash != b.hash


def test_cell_enumeration_counts(workspace):
    config = Config.load(workspace / "config.json")
    cells = config.cells()
    assert len(cells) == 2 * 2 * 2 * 3


def test_seqlen_presets_and_model_caps():
    config = Config({"sweep": {"models": ["bart-base"], "subjects": ["s"]}})
    assert max(config.seqlen_grid("bart-base")) == 500  # capped preset
    assert max(config.seqlen_grid("bigbird-base")) == 1000
    config_fig3 = Config({"sweep": {"seqlen_preset": "fig3_grid"}})
    assert config_fig3.seqlen_grid("longt5") == [20, 100, 200, 300, 400, 500]


def test_run_produces_records_and_manifest(workspace, tmp_path):
    config = Config.load(workspace / "config.json")
    out = tmp_path / "out"
    statuses = run(config, out)
    assert all(s["fit"] == "ok" and s["eval"] == "ok" for s in statuses.values())
    records = load_all_records(config, out)
    assert len(records) == 24 * 4  # cells x folds
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_hash"] == config.hash
    assert len(manifest["cells"]) == 24
    assert all(c == {"fit": "ok", "eval": "ok"} for c in manifest["cells"].values())


def test_rerun_is_cached_and_byte_identical(workspace, tmp_path):
    config = Config.load(workspace / "config.json")
    out = tmp_path / "out"
    run(config, out)
    before = hash_tree(out)
    statuses = run(config, out)
    assert all(s == {"fit": "cached", "eval": "cached"} for s in statuses.values())
    assert hash_tree(out) == before
    forced = run(config, out, force=True)
    assert all(s == {"fit": "ok", "eval": "ok"} for s in forced.values())
    assert hash_tree(out) == before  # identical bytes even when recomputed


def test_corrupt_cell_fails_in_isolation(workspace, tmp_path):
    config = Config.load(workspace / "config.json")
    victim = workspace / "feats" / "decoy_L2_S20.fmat"
    original = victim.read_bytes()
    victim.write_bytes(b"garbage")
    try:
        out = tmp_path / "out"
        statuses = run(config, out)
        failed = [cid for cid, s in statuses.items() if s["fit"] == "failed"]
        assert len(failed) == 3  # one per subject
        assert all("decoy_L2_S20" in cid for cid in failed)
        ok = [cid for cid, s in statuses.items() if s["fit"] == "ok"]
        assert len(ok) == 21
        manifest = json.loads((out / "manifest.json").read_text())
        assert "fit_error" in manifest["cells"][failed[0]]
        records = load_all_records(config, out)
        assert len(records) == 21 * 4
    finally:
        victim.write_bytes(original)


def test_aggregate_records_means_and_blank_sem(workspace, tmp_path):
    config = Config.load(workspace / "config.json")
    out = tmp_path / "out"
    run(config, out)
    records = load_all_records(config, out)
    rows = aggregate_records(records, group_by=("model",))
    assert [row["model"] for row in rows] == ["decoy", "good"]
    good = next(row for row in rows if row["model"] == "good")
    decoy = next(row for row in rows if row["model"] == "decoy")
    assert good["acc_20v20_mean"] > decoy["acc_20v20_mean"]
    single = aggregate_records(records[:1], group_by=("model", "subject"))
    assert single[0]["acc_20v20_sem"] == ""
    with pytest.raises(ValueError, match="empty"):
        aggregate_records([])


def test_stats_table_paired_outcome(workspace, tmp_path):
    config = Config.load(workspace / "config.json")
    out = tmp_path / "out"
    run(config, out)
    records = load_all_records(config, out)
    rows = stats_table(records, [["decoy", "good"]], pairing="subject")
    assert {row["metric"] for row in rows} == {"acc_20v20", "pearson_mean"}
    for row in rows:
        assert row["n_units"] == 3
        assert row["significant"] == (row["p_adj"] <= 0.05)
        assert row["t"] > 0  # good model beats the decoy on every subject
    with pytest.raises(ValueError, match="empty group"):
        stats_table(records, [["missing_a", "missing_b"]])


def test_significance_grid_shape(workspace, tmp_path):
    config = Config.load(workspace / "config.json")
    out = tmp_path / "out"
    run(config, out)
    records = load_all_records(config, out)
    grid = significance_grid(records, "decoy", "good")
    assert grid["layers"] == [1, 2]
    assert grid["seqlens"] == [5, 20]
    assert len(grid["p_adj"]) == 2 and len(grid["p_adj"][0]) == 2
    assert all(isinstance(x, bool) for row in grid["significant"] for x in row)


def _fake_records(subject, model, values_by_record):
    out = []
    for i, values in enumerate(values_by_record):
        out.append(
            ResultRecord(
                model=model,
                layer=1,
                seqlen=1,
                subject=subject,
                fold=i,
                pearson=np.asarray(values, dtype=np.float32),
                acc_20v20=0.5,
                lambda_chosen=np.ones(len(values), dtype=np.float32),
            )
        )
    return out


def test_emit_voxel_table_identical_sides():
    rng = np.random.default_rng(0)
    values = [rng.uniform(-0.2, 0.8, 6) for _ in range(5)]
    a = _fake_records("s", "m1", values)
    b = _fake_records("s", "m2", values)
    rows = emit_voxel_table(a, b)
    assert all(row["r_diff"] == 0.0 for row in rows)
    assert not any(row["significant_diff"] for row in rows)


def test_emit_voxel_table_planted_signal_detected():
    # BH admits occasional false positives by design, so exact-set recovery
    # is checked at a pinned seed; the rate properties live in acceptance.
    rng = np.random.default_rng(0)
    n_records, v = 12, 40
    signal_voxels = np.arange(10)
    a_values = []
    for _ in range(n_records):
        row = rng.normal(0.0, 0.05, v)
        row[signal_voxels] += 0.4
        a_values.append(row)
    b_values = [rng.normal(0.0, 0.05, v) for _ in range(n_records)]
    rows = emit_voxel_table(_fake_records("s", "a", a_values), _fake_records("s", "b", b_values))
    detected = {row["voxel"] for row in rows if row["significant"]}
    assert detected == set(signal_voxels.tolist())


def test_emit_voxel_table_roi_columns_and_checks():
    values = [np.full(3, 0.2) for _ in range(4)]
    a = _fake_records("s", "a", values)
    b = _fake_records("s", "b", values)
    masks = RoiMaskSet(masks={"lang": np.array([True, False, True])}, n_voxels=3)
    rows = emit_voxel_table(a, b, roi_masks=masks)
    assert [row["roi_lang"] for row in rows] == [True, False, True]
    with pytest.raises(ValueError, match="subject"):
        emit_voxel_table(a, _fake_records("other", "b", values))


def test_write_table_deterministic(tmp_path):
    rows = [{"a": 1, "b": 0.1}, {"a": 2, "b": float(np.float64(1) / 3)}]
    write_table(tmp_path / "x.csv", rows)
    write_table(tmp_path / "y.csv", rows)
    assert (tmp_path / "x.csv").read_bytes() == (tmp_path / "y.csv").read_bytes()
    text = (tmp_path / "x.csv").read_text()
    assert "0.3333333333333333" in text  # repr round-trip, no precision loss


# ---------------------------------------------------------------------------
# CLI


def test_cli_full_workflow(tmp_path):
    out = tmp_path / "run"
    synth_conf = tmp_path / "synth.json"
    synth_conf.write_text(json.dumps({
        "synth": {
            "words": 1600, "dims": 24, "runs": 4, "voxels": 10, "noise_sigma": 0.6,
            "signal_rank": 8, "feature_snr": {"Characters": 2.0, "Motion": 1.0},
            "feature_fraction": 0.2, "subjects": 3, "seed": 0,
        },
        "encoder": {"trim": 5},
        "metrics": {"block_len": 5, "reps": 50},
        "discourse": {"sample_count": 30, "balanced": {"train_trs": 80, "test_trs": 100, "sample_count": 20}},
        "noiseceiling": {"reducer_k": 8},
    }))
    assert cli.main(["simulate", "--config", str(synth_conf), "--out", str(out)]) == 0
    config_path = out / "config.json"
    assert config_path.exists()

    assert cli.main(["preprocess", "--config", str(config_path), "--out", str(out)]) == 0
    assert (out / "designs").exists()

    assert cli.main(["fit", "--config", str(config_path), "--out", str(out)]) == 0
    assert cli.main(["eval", "--config", str(config_path), "--out", str(out)]) == 0
    config = Config.load(config_path)
    records = load_all_records(config, out)
    assert len(records) == 3 * 4  # subjects x folds

    assert cli.main(["aggregate", "--config", str(config_path), "--out", str(out)]) == 0
    assert (out / "summary.csv").exists()

    assert cli.main(["discourse", "--config", str(config_path), "--out", str(out)]) == 0
    discourse_files = list((out / "discourse").glob("*_cv.csv"))
    assert len(discourse_files) == 3

    assert cli.main(["noiseceiling", "--config", str(config_path), "--out", str(out)]) == 0
    assert (out / "noise_ceiling_pairs.csv").exists()
    pairs = (out / "noise_ceiling_pairs.csv").read_text().splitlines()
    assert len(pairs) == 1 + 3 * 2


def test_cli_stats_requires_pairs(tmp_path):
    out = tmp_path / "run"
    synth_conf = tmp_path / "synth.json"
    synth_conf.write_text(json.dumps({
        "synth": {"words": 800, "dims": 16, "runs": 4, "voxels": 6, "signal_rank": 4, "subjects": 2, "seed": 1},
        "encoder": {"trim": 3},
        "metrics": {"block_len": 4, "reps": 30},
    }))
    assert cli.main(["simulate", "--config", str(synth_conf), "--out", str(out)]) == 0
    config_path = str(out / "config.json")
    assert cli.main(["fit", "--config", config_path, "--out", str(out)]) == 0
    assert cli.main(["eval", "--config", config_path, "--out", str(out)]) == 0
    assert cli.main(["stats", "--config", config_path, "--out", str(out)]) == 1  # no pairs configured


def test_cli_exit_code_on_failed_cell(workspace, tmp_path):
    victim = workspace / "feats" / "good_L1_S5.fmat"
    original = victim.read_bytes()
    victim.write_bytes(b"broken")
    try:
        code = cli.main([
            "fit", "--config", str(workspace / "config.json"), "--out", str(tmp_path / "out"),
        ])
        assert code == 1
    finally:
        victim.write_bytes(original)


def test_cli_seed_override_changes_hash(workspace, tmp_path):
    config_path = str(workspace / "config.json")
    out = tmp_path / "out"
    assert cli.main(["fit", "--config", config_path, "--out", str(out), "--seed", "7"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    base = Config.load(workspace / "config.json")
    assert manifest["config_hash"] != base.hash
    assert manifest["seed"] == 7


def test_cli_workers_parallel_matches_serial(workspace, tmp_path):
    config_path = str(workspace / "config.json")
    serial, parallel = tmp_path / "serial", tmp_path / "parallel"
    assert cli.main(["fit", "--config", config_path, "--out", str(serial)]) == 0
    assert cli.main(["eval", "--config", config_path, "--out", str(serial)]) == 0
    assert cli.main(["fit", "--config", config_path, "--out", str(parallel), "--workers", "3"]) == 0
    assert cli.main(["eval", "--config", config_path, "--out", str(parallel), "--workers", "3"]) == 0
    assert hash_tree(serial) == hash_tree(parallel)
