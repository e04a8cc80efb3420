"""Sweep orchestration: run encoding cells over (model, layer, seqlen,
subject), evaluate metrics, and aggregate plot-ready tables.

Everything is driven by one JSON config. Outputs are plain files under the
chosen directory; a manifest records the config hash and per-cell status,
and completed cells are skipped on rerun unless forced. All writes use
write-temp-then-rename, and nothing in any output depends on wall time, so
identical configs produce byte-identical result directories.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import ingest
from .datamodel import DesignMatrix, ResultRecord, RoiMaskSet, VoxelSeries
from .discourse import BalancedConfig, balanced_protocol, discourse_analysis
from .encoder import DEFAULT_LAMBDA_GRID, fit_predict_cv, make_fold_plan
from .metrics import (
    TwentyVTwentyConfig,
    noise_ceiling_grid,
    pearson_per_voxel,
    twenty_v_twenty,
)
from .preprocess import apply_pca, build_lagged, downsample_to_trs, fit_pca, word_tr_index
from .stats import fdr_bh, one_sample_ttest, paired_ttest, significant_mask

__version__ = "0.1.0"

# Sequence-length presets; the wider one starts at 1, the narrower at 20.
FIG1_GRID = (1, 5, 20, 100, 200, 300, 400, 500, 700, 1000)
FIG3_GRID = (20, 100, 200, 300, 400, 500)

_DEFAULTS = {
    "seed": 0,
    "dataset": {
        "features": "features/{model}_L{layer}_S{seqlen}.fmat",
        "subjects": {},
        "timing": "timing.tsv",
        "labels": None,
        "roi_masks": None,
    },
    "sweep": {
        "models": [],
        "layers": {},
        "seqlens": {},
        "seqlen_preset": "fig1_grid",
        "subjects": [],
    },
    "preprocess": {"pca_components": 10, "lag_count": 4, "pca_strict": False},
    "encoder": {"lambda_grid": list(DEFAULT_LAMBDA_GRID), "trim": 10},
    "metrics": {"block_len": 20, "reps": 1000, "distance": "euclidean"},
    "stats": {"alpha": 0.05, "pairing": "subject", "model_pairs": []},
    "discourse": {
        "sample_count": 160,
        "include_random": True,
        "balanced": {"train_trs": 500, "test_trs": 700, "sample_count": 74},
    },
    "noiseceiling": {"reducer_k": 40},
}

# Encoder-limited models take the capped grid by default.
_SHORT_INPUT_MODELS = ("bart", "led")


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


class Config:
    """Merged experiment configuration with a stable content hash."""

    def __init__(self, doc: dict | None = None, base_dir: str | Path = "."):
        self.doc = _merge(_DEFAULTS, doc or {})
        self.base_dir = Path(base_dir)

    @classmethod
    def load(cls, path: str | Path) -> "Config":
        path = Path(path)
        return cls(json.loads(path.read_text(encoding="utf-8")), base_dir=path.parent)

    def canonical(self) -> str:
        return json.dumps(self.doc, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()[:16]

    def __getitem__(self, key):
        return self.doc[key]

    def path(self, template: str, **fields) -> Path:
        p = Path(template.format(**fields))
        return p if p.is_absolute() else self.base_dir / p

    def seqlen_grid(self, model: str) -> list[int]:
        explicit = self["sweep"]["seqlens"].get(model)
        if explicit:
            return list(explicit)
        preset = FIG3_GRID if self["sweep"]["seqlen_preset"] == "fig3_grid" else FIG1_GRID
        if any(model.lower().startswith(m) for m in _SHORT_INPUT_MODELS):
            return [s for s in preset if s <= 500]
        return list(preset)

    def cells(self) -> list[tuple[str, int, int, str]]:
        sweep = self["sweep"]
        out = []
        for model in sweep["models"]:
            for layer in sweep["layers"].get(model, [1]):
                for seqlen in self.seqlen_grid(model):
                    for subject in sweep["subjects"]:
                        out.append((model, int(layer), int(seqlen), subject))
        return out

    def metric_config(self, seed: int | None = None) -> TwentyVTwentyConfig:
        m = self["metrics"]
        return TwentyVTwentyConfig(
            block_len=int(m["block_len"]),
            reps=int(m["reps"]),
            seed=int(self["seed"] if seed is None else seed),
            distance=m["distance"],
        )


def cell_id(model: str, layer: int, seqlen: int, subject: str) -> str:
    return f"{model}_L{layer}_S{seqlen}_{subject}"


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_marker(path: Path, config_hash: str, status: str, error: str | None = None) -> None:
    doc = {"config_hash": config_hash, "status": status}
    if error:
        doc["error"] = error
    _atomic_write_text(path, json.dumps(doc, sort_keys=True) + "\n")


def _marker_ok(path: Path, config_hash: str) -> bool:
    if not path.exists():
        return False
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return False
    return doc.get("status") == "ok" and doc.get("config_hash") == config_hash


# ---------------------------------------------------------------------------
# Fit phase: per-cell design, cross-validated ridge, stored predictions


def _load_subject(config: Config, subject: str) -> VoxelSeries:
    sub = config["dataset"]["subjects"][subject]
    return ingest.load_voxel_series(config.path(sub["voxels"]), config.path(sub["runs"]))


def _build_designs(config: Config, model: str, layer: int, seqlen: int, series: VoxelSeries, plan):
    """One design for the paper-faithful order, or one per fold when PCA is
    restricted to training-fold words."""
    pre = config["preprocess"]
    features = ingest.load_feature_matrix(
        config.path(config["dataset"]["features"], model=model, layer=layer, seqlen=seqlen)
    )
    timing = ingest.load_word_timing(config.path(config["dataset"]["timing"]))
    k, lags = int(pre["pca_components"]), int(pre["lag_count"])

    def design_from(pca) -> DesignMatrix:
        reduced = apply_pca(pca, features)
        tr_level = downsample_to_trs(reduced, timing, series.runs, series.tr_seconds)
        return build_lagged(tr_level, series.runs, lags)

    if not pre["pca_strict"]:
        return design_from(fit_pca(features, k)), timing
    word_trs = word_tr_index(timing, series.runs, series.tr_seconds)
    designs = []
    for fold in plan.folds:
        train_words = np.isin(word_trs, fold.train)
        designs.append(design_from(fit_pca(features.values[train_words], k)))
    return designs, timing


def fit_cell(config: Config, out_dir: Path, model: str, layer: int, seqlen: int, subject: str) -> None:
    cdir = out_dir / "cells" / cell_id(model, layer, seqlen, subject)
    cdir.mkdir(parents=True, exist_ok=True)
    series = _load_subject(config, subject)
    plan = make_fold_plan(series, trim=int(config["encoder"]["trim"]))
    design, _ = _build_designs(config, model, layer, seqlen, series, plan)
    cv = fit_predict_cv(design, series, plan, grid=config["encoder"]["lambda_grid"])
    ingest.save_fold_plan(cdir / "plan.json", plan)
    lam = np.stack([fr.fit.lam for fr in cv.folds])
    ingest.write_fmat(cdir / "lambda.fmat", lam, meta={"rows_are": "folds"})
    for fr in cv.folds:
        meta = {"fold": fr.fold, "test_start": int(fr.test_idx[0]), "test_len": int(fr.test_idx.size)}
        ingest.write_fmat(cdir / f"pred_fold{fr.fold}.fmat", fr.pred, meta=meta)
        ingest.write_fmat(cdir / f"truth_fold{fr.fold}.fmat", fr.truth, meta=meta)


def eval_cell(config: Config, out_dir: Path, model: str, layer: int, seqlen: int, subject: str) -> list[ResultRecord]:
    cdir = out_dir / "cells" / cell_id(model, layer, seqlen, subject)
    plan = ingest.load_fold_plan(cdir / "plan.json")
    lam, _ = ingest.read_fmat(cdir / "lambda.fmat")
    preds, truths = [], []
    for f in range(len(plan.folds)):
        pred, _ = ingest.read_fmat(cdir / f"pred_fold{f}.fmat")
        truth, _ = ingest.read_fmat(cdir / f"truth_fold{f}.fmat")
        preds.append(pred)
        truths.append(truth)
    n = max(int(fold.test.max()) for fold in plan.folds) + 1
    v = preds[0].shape[1]
    truth_full = np.full((n, v), np.nan)
    for f, fold in enumerate(plan.folds):
        truth_full[fold.test] = truths[f]
    cfg = config.metric_config()
    _, acc_folds = twenty_v_twenty(preds, truth_full, plan, cfg, return_per_fold=True)
    records = []
    for f, fold in enumerate(plan.folds):
        records.append(
            ResultRecord(
                model=model,
                layer=layer,
                seqlen=seqlen,
                subject=subject,
                fold=f,
                pearson=pearson_per_voxel(preds[f], truths[f]).astype(np.float32),
                acc_20v20=float(acc_folds[f]),
                lambda_chosen=lam[f],
            )
        )
    ingest.write_results(records, cdir / "results.csv")
    return records


def _run_phase(config: Config, out_dir: str | Path, phase: str, force: bool = False, workers: int = 1) -> dict:
    """Execute fit or eval over every cell; failures are recorded, not fatal."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    statuses: dict[str, dict] = {}
    todo = []
    for cell in config.cells():
        cid = cell_id(*cell)
        marker = out_dir / "cells" / cid / f"{phase}.json"
        if not force and _marker_ok(marker, config.hash):
            statuses[cid] = {"status": "cached"}
        else:
            todo.append(cell)
    runner = fit_cell if phase == "fit" else eval_cell
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_phase_worker, config.doc, str(config.base_dir), str(out_dir), phase, cell): cell for cell in todo}
            for future, cell in futures.items():
                statuses[cell_id(*cell)] = future.result()
    else:
        for cell in todo:
            statuses[cell_id(*cell)] = _phase_worker(config.doc, str(config.base_dir), str(out_dir), phase, cell)
    _write_manifest(config, out_dir)
    return statuses


def _phase_worker(doc: dict, base_dir: str, out_dir: str, phase: str, cell: tuple) -> dict:
    config = Config(doc, base_dir=base_dir)
    out = Path(out_dir)
    cdir = out / "cells" / cell_id(*cell)
    cdir.mkdir(parents=True, exist_ok=True)
    marker = cdir / f"{phase}.json"
    try:
        if phase == "fit":
            fit_cell(config, out, *cell)
        else:
            eval_cell(config, out, *cell)
    except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
        _write_marker(marker, config.hash, "failed", error=f"{type(exc).__name__}: {exc}")
        return {"status": "failed", "error": str(exc)}
    _write_marker(marker, config.hash, "ok")
    return {"status": "ok"}


def _write_manifest(config: Config, out_dir: Path) -> None:
    cells = {}
    for cell in config.cells():
        cid = cell_id(*cell)
        entry = {}
        for phase in ("fit", "eval"):
            marker = out_dir / "cells" / cid / f"{phase}.json"
            if marker.exists():
                doc = json.loads(marker.read_text(encoding="utf-8"))
                entry[phase] = doc.get("status")
                if doc.get("error"):
                    entry[f"{phase}_error"] = doc["error"]
        cells[cid] = entry
    manifest = {
        "config_hash": config.hash,
        "version": __version__,
        "seed": config["seed"],
        "cells": cells,
    }
    _atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, sort_keys=True, indent=1) + "\n")


def run(config: Config, out_dir: str | Path, force: bool = False, workers: int = 1) -> dict:
    """Fit then evaluate every cell; returns per-cell per-phase status."""
    fit_status = _run_phase(config, out_dir, "fit", force=force, workers=workers)
    eval_status = _run_phase(config, out_dir, "eval", force=force, workers=workers)
    return {cid: {"fit": fit_status[cid]["status"], "eval": eval_status[cid]["status"]} for cid in fit_status}


def load_all_records(config: Config, out_dir: str | Path) -> list[ResultRecord]:
    records: list[ResultRecord] = []
    for cell in config.cells():
        csv_path = Path(out_dir) / "cells" / cell_id(*cell) / "results.csv"
        if csv_path.exists():
            records.extend(ingest.load_results(csv_path))
    return records


# ---------------------------------------------------------------------------
# Aggregation and statistics tables

_METRICS = ("acc_20v20", "pearson_mean")


def _metric_value(record: ResultRecord, metric: str) -> float:
    return record.acc_20v20 if metric == "acc_20v20" else record.pearson_mean


def aggregate_records(
    records: Sequence[ResultRecord],
    group_by: Sequence[str] = ("model",),
) -> list[dict]:
    """Grouped mean and standard error for each metric.

    The sem cell is blank for singleton groups. Rows come back sorted by
    the group key, so the emitted table is order-independent.
    """
    if not records:
        raise ValueError("aggregate_records: empty group")
    groups: dict[tuple, list[ResultRecord]] = {}
    for rec in records:
        key = tuple(getattr(rec, field) for field in group_by)
        groups.setdefault(key, []).append(rec)
    rows = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        row: dict = dict(zip(group_by, key))
        row["n_records"] = len(groups[key])
        for metric in _METRICS:
            values = np.array([_metric_value(r, metric) for r in groups[key]])
            row[f"{metric}_mean"] = float(values.mean())
            row[f"{metric}_sem"] = (
                float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else ""
            )
        rows.append(row)
    return rows


def _pairing_values(records: Sequence[ResultRecord], model: str, metric: str, pairing: str) -> dict:
    units: dict[str, list[float]] = {}
    for rec in records:
        if rec.model == model:
            units.setdefault(getattr(rec, pairing), []).append(_metric_value(rec, metric))
    return {unit: float(np.mean(vals)) for unit, vals in units.items()}


def stats_table(
    records: Sequence[ResultRecord],
    model_pairs: Sequence[Sequence[str]],
    pairing: str = "subject",
    alternative: str = "greater",
    alpha: float = 0.05,
) -> list[dict]:
    """Paired tests per (model pair, metric), BH-adjusted across the table.

    Each pair is (reference, candidate); the test is candidate > reference
    after averaging within the pairing unit (subject by default).
    """
    rows = []
    for base, cand in model_pairs:
        for metric in _METRICS:
            base_vals = _pairing_values(records, base, metric, pairing)
            cand_vals = _pairing_values(records, cand, metric, pairing)
            units = sorted(set(base_vals) & set(cand_vals))
            if not units:
                raise ValueError(f"stats_table: empty group for pair ({base}, {cand})")
            outcome = paired_ttest(
                [cand_vals[u] for u in units], [base_vals[u] for u in units], alternative=alternative
            )
            rows.append(
                {
                    "base": base,
                    "candidate": cand,
                    "metric": metric,
                    "n_units": len(units),
                    "t": outcome.statistic,
                    "p": outcome.p,
                }
            )
    adjusted = fdr_bh([row["p"] for row in rows])
    significant = significant_mask(adjusted, alpha)
    for row, p_adj, sig in zip(rows, adjusted, significant):
        row["p_adj"] = float(p_adj)
        row["significant"] = bool(sig)
    return rows


def significance_grid(
    records: Sequence[ResultRecord],
    base: str,
    candidate: str,
    metric: str = "acc_20v20",
    pairing: str = "subject",
    alpha: float = 0.05,
) -> dict:
    """Per-(layer, seqlen) paired tests, BH-adjusted over the whole grid.

    Returns layer/seqlen axes plus aligned p_adj and boolean significance
    matrices (lists of lists), the shape of a black-cell significance map.
    """
    cells: dict[tuple[int, int], dict[str, dict[str, list[float]]]] = {}
    for rec in records:
        if rec.model not in (base, candidate):
            continue
        cell = cells.setdefault((rec.layer, rec.seqlen), {base: {}, candidate: {}})
        cell[rec.model].setdefault(getattr(rec, pairing), []).append(_metric_value(rec, metric))
    layers = sorted({layer for layer, _ in cells})
    seqlens = sorted({seqlen for _, seqlen in cells})
    pvals, keys = [], []
    for layer, seqlen in sorted(cells):
        sides = cells[(layer, seqlen)]
        units = sorted(set(sides[base]) & set(sides[candidate]))
        if not units:
            continue
        outcome = paired_ttest(
            [float(np.mean(sides[candidate][u])) for u in units],
            [float(np.mean(sides[base][u])) for u in units],
        )
        pvals.append(outcome.p)
        keys.append((layer, seqlen))
    adjusted = fdr_bh(pvals)
    adj_map = dict(zip(keys, adjusted))
    p_grid = [[adj_map.get((layer, s)) for s in seqlens] for layer in layers]
    sig_grid = [
        [bool(adj_map.get((layer, s), 1.0) <= alpha) for s in seqlens] for layer in layers
    ]
    return {"layers": layers, "seqlens": seqlens, "p_adj": p_grid, "significant": sig_grid}


def emit_voxel_table(
    records_a: Sequence[ResultRecord],
    records_b: Sequence[ResultRecord],
    roi_masks: RoiMaskSet | None = None,
    alpha: float = 0.05,
) -> list[dict]:
    """Per-voxel contrast table for surface plotting.

    Side a is tested against zero (one-sample, greater) and against side b
    (paired, greater), each BH-adjusted across voxels. All records must
    share one subject and voxel count.
    """
    if not records_a or not records_b:
        raise ValueError("emit_voxel_table: both sides need records")
    subjects = {r.subject for r in list(records_a) + list(records_b)}
    if len(subjects) != 1:
        raise ValueError("emit_voxel_table: records span multiple subjects")
    v = records_a[0].pearson.size
    if any(r.pearson.size != v for r in list(records_a) + list(records_b)):
        raise ValueError("emit_voxel_table: voxel counts differ")
    a = np.stack([r.pearson for r in records_a]).astype(np.float64)
    b = np.stack([r.pearson for r in records_b]).astype(np.float64)
    r_mean = a.mean(axis=0)
    r_diff = r_mean - b.mean(axis=0)
    p_zero = np.array([one_sample_ttest(a[:, j], 0.0, "greater").p for j in range(v)])
    p_diff = np.array([paired_ttest(a[:, j], b[:, j], "greater").p for j in range(v)])
    adj_zero = fdr_bh(p_zero)
    adj_diff = fdr_bh(p_diff)
    sig_zero = significant_mask(adj_zero, alpha)
    sig_diff = significant_mask(adj_diff, alpha)
    rows = []
    for j in range(v):
        row = {
            "voxel": j,
            "r_mean": float(r_mean[j]),
            "r_diff": float(r_diff[j]),
            "p_adj": float(adj_zero[j]),
            "significant": bool(sig_zero[j]),
            "p_adj_diff": float(adj_diff[j]),
            "significant_diff": bool(sig_diff[j]),
        }
        if roi_masks is not None:
            for name in sorted(roi_masks.masks):
                row[f"roi_{name}"] = bool(roi_masks.masks[name][j])
        rows.append(row)
    return rows


def write_table(path: str | Path, rows: Sequence[dict]) -> None:
    """CSV writer with stable column order and repr-exact floats."""
    import csv as _csv

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        raise ValueError("write_table: no rows")
    columns = list(rows[0])
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Discourse and noise-ceiling drivers (file-level, used by the CLI)


def run_discourse(config: Config, out_dir: str | Path, balanced: bool = False) -> dict[str, list[dict]]:
    """Per-cell discourse tables from stored predictions (or the balanced
    split protocol refit when ``balanced``)."""
    out_dir = Path(out_dir)
    labels_path = config["dataset"]["labels"]
    if labels_path is None:
        raise ValueError("run_discourse: no labels file configured")
    timing = ingest.load_word_timing(config.path(config["dataset"]["timing"]))
    disc = config["discourse"]
    tables: dict[str, list[dict]] = {}
    for cell in config.cells():
        model, layer, seqlen, subject = cell
        cid = cell_id(*cell)
        series = _load_subject(config, subject)
        labels = ingest.load_labels(config.path(labels_path), timing.n_words)
        if balanced:
            bal = disc["balanced"]
            plan = make_fold_plan(series, trim=int(config["encoder"]["trim"]))
            design, _ = _build_designs(config, model, layer, seqlen, series, plan)
            if isinstance(design, list):
                design = design[0]
            result = balanced_protocol(
                design,
                series,
                labels,
                timing,
                BalancedConfig(
                    train_trs=int(bal["train_trs"]),
                    test_trs=int(bal["test_trs"]),
                    sample_count=int(bal["sample_count"]),
                    grid=tuple(config["encoder"]["lambda_grid"]),
                    seed=int(config["seed"]),
                    include_random=bool(disc["include_random"]),
                ),
            )
            scores = result.per_feature
        else:
            cdir = out_dir / "cells" / cid
            plan = ingest.load_fold_plan(cdir / "plan.json")
            pred = np.full((series.n, series.v), np.nan)
            truth = np.full((series.n, series.v), np.nan)
            for f, fold in enumerate(plan.folds):
                pred[fold.test] = ingest.read_fmat(cdir / f"pred_fold{f}.fmat")[0]
                truth[fold.test] = ingest.read_fmat(cdir / f"truth_fold{f}.fmat")[0]
            scores = discourse_analysis(
                pred,
                truth,
                labels,
                timing,
                series.runs,
                series.tr_seconds,
                count=int(disc["sample_count"]),
                seed=int(config["seed"]),
                include_random=bool(disc["include_random"]),
            )
        rows = [
            {
                "model": model,
                "layer": layer,
                "seqlen": seqlen,
                "subject": subject,
                "feature": name,
                "r_mean": fa.mean,
                "n_labeled": fa.n_labeled,
                "n_sampled": int(fa.sampled_trs.size),
            }
            for name, fa in sorted(scores.items())
        ]
        tables[cid] = rows
        mode = "balanced" if balanced else "cv"
        write_table(out_dir / "discourse" / f"{cid}_{mode}.csv", rows)
    return tables


def run_noise_ceiling(config: Config, out_dir: str | Path) -> dict:
    """Subject-pair ceiling grid written as tables plus a summary line."""
    out_dir = Path(out_dir)
    subjects = {name: _load_subject(config, name) for name in config["sweep"]["subjects"]}
    if len(subjects) < 2:
        raise ValueError("run_noise_ceiling: need at least 2 subjects")
    first = next(iter(subjects.values()))
    plan = make_fold_plan(first, trim=int(config["encoder"]["trim"]))
    result = noise_ceiling_grid(
        subjects,
        plan,
        grid=config["encoder"]["lambda_grid"],
        reducer_k=int(config["noiseceiling"]["reducer_k"]),
        cfg=config.metric_config(),
    )
    pair_rows = [
        {"target": t, "source": s, "acc_20v20": acc} for (t, s), acc in sorted(result["pairs"].items())
    ]
    target_rows = [
        {"target": t, "ceiling": c} for t, c in sorted(result["per_target"].items())
    ]
    write_table(out_dir / "noise_ceiling_pairs.csv", pair_rows)
    write_table(out_dir / "noise_ceiling_targets.csv", target_rows)
    _atomic_write_text(
        Path(out_dir) / "noise_ceiling_summary.json",
        json.dumps(
            {"mean": result["mean"], "sem": result["sem"], "summary": result["summary"]},
            sort_keys=True,
        )
        + "\n",
    )
    return result
