"""File formats and loaders for every input and output.

Dense matrices travel in a single binary container (magic ``FMAT0001``):

    bytes 0..8    magic, ASCII "FMAT0001"
    bytes 8..12   header length, unsigned 32-bit little-endian
    header        UTF-8 JSON: {"dtype": "f32", "order": "row",
                               "rows": R, "cols": C, "meta": {...}}
    payload       R*C little-endian float32 values, row-major

Sparse or labeled data travels as TSV with a header row. All writers are
deterministic: identical inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .datamodel import (
    DiscourseLabels,
    FeatureMatrix,
    Fold,
    FoldPlan,
    ResultRecord,
    RoiMaskSet,
    Run,
    VoxelSeries,
    WordTiming,
    validate,
)

FMAT_MAGIC = b"FMAT0001"


class IngestError(ValueError):
    """Raised when a file is malformed or violates a domain invariant."""


def _raise_if_invalid(obj, **kwargs) -> None:
    violations = validate(obj, **kwargs)
    if violations:
        raise IngestError("; ".join(violations))


# ---------------------------------------------------------------------------
# FMAT container


def write_fmat(path: str | Path, values: np.ndarray, meta: dict | None = None) -> None:
    """Write a 2-d array as an FMAT0001 file (float32, row-major)."""
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2:
        raise IngestError(f"write_fmat: expected 2-d array, got {values.ndim}-d")
    header = {
        "dtype": "f32",
        "order": "row",
        "rows": int(values.shape[0]),
        "cols": int(values.shape[1]),
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(FMAT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(values.tobytes(order="C"))


def read_fmat(path: str | Path) -> tuple[np.ndarray, dict]:
    """Read an FMAT0001 file; returns (float32 array, meta dict)."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != FMAT_MAGIC:
            raise IngestError(f"{path}: not an fmat file")
        (header_len,) = struct.unpack("<I", fh.read(4))
        try:
            header = json.loads(fh.read(header_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise IngestError(f"{path}: bad header ({exc})") from exc
        if header.get("dtype") != "f32" or header.get("order") != "row":
            raise IngestError(f"{path}: unsupported dtype/order in header")
        rows, cols = int(header["rows"]), int(header["cols"])
        payload = fh.read(rows * cols * 4 + 1)
    if len(payload) != rows * cols * 4:
        raise IngestError(f"{path}: truncated payload")
    values = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    return values, header.get("meta", {})


# ---------------------------------------------------------------------------
# TSV helpers


def _read_tsv(path: str | Path, columns: Sequence[str]) -> list[dict[str, str]]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if reader.fieldnames is None or list(reader.fieldnames) != list(columns):
            raise IngestError(f"{path}: expected columns {list(columns)}, got {reader.fieldnames}")
        return list(reader)


def _write_tsv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Domain loaders / writers


def load_feature_matrix(path: str | Path) -> FeatureMatrix:
    """Load per-word activations; meta keys model/layer/sequence_length propagate."""
    values, meta = read_fmat(path)
    fm = FeatureMatrix(
        values=values,
        model=str(meta.get("model", "unknown")),
        layer=int(meta.get("layer", 0)),
        sequence_length=int(meta.get("sequence_length", 1)),
    )
    _raise_if_invalid(fm)
    return fm


def write_feature_matrix(path: str | Path, fm: FeatureMatrix) -> None:
    write_fmat(path, fm.values, meta=fm.meta)


def load_runs_table(path: str | Path) -> tuple[Run, ...]:
    rows = _read_tsv(path, ("run_index", "start_tr", "end_tr"))
    indexed = sorted((int(r["run_index"]), int(r["start_tr"]), int(r["end_tr"])) for r in rows)
    if [i for i, _, _ in indexed] != list(range(len(indexed))):
        raise IngestError(f"{path}: run_index must be 0..{len(indexed) - 1}")
    return tuple((s, e) for _, s, e in indexed)


def write_runs_table(path: str | Path, runs: Sequence[Run]) -> None:
    _write_tsv(path, ("run_index", "start_tr", "end_tr"), ((i, s, e) for i, (s, e) in enumerate(runs)))


def load_voxel_series(path: str | Path, runs_path: str | Path, tr_seconds: float = 2.0) -> VoxelSeries:
    """Load a voxel series and its run table; the runs must partition [0, n)."""
    values, meta = read_fmat(path)
    runs = load_runs_table(runs_path)
    series = VoxelSeries(values=values, runs=runs, tr_seconds=float(meta.get("tr_seconds", tr_seconds)))
    _raise_if_invalid(series)
    return series


def write_voxel_series(path: str | Path, runs_path: str | Path, series: VoxelSeries) -> None:
    write_fmat(path, series.values, meta={"tr_seconds": series.tr_seconds})
    write_runs_table(runs_path, series.runs)


def load_word_timing(path: str | Path, word_interval: float | None = None) -> WordTiming:
    """Load word onsets (seconds from run start). The presentation interval is
    inferred from consecutive within-run onsets unless given explicitly."""
    rows = _read_tsv(path, ("word_index", "run", "onset_s"))
    parsed = sorted((int(r["word_index"]), int(r["run"]), float(r["onset_s"])) for r in rows)
    if [w for w, _, _ in parsed] != list(range(len(parsed))):
        raise IngestError(f"{path}: word_index must be 0..{len(parsed) - 1} with no duplicates")
    onsets = np.array([o for _, _, o in parsed], dtype=np.float64)
    run_of_word = np.array([r for _, r, _ in parsed], dtype=np.int64)
    if word_interval is None:
        same_run = run_of_word[1:] == run_of_word[:-1]
        diffs = np.diff(onsets)[same_run]
        word_interval = float(diffs[0]) if diffs.size else 0.5
    timing = WordTiming(onsets=onsets, run_of_word=run_of_word, word_interval=word_interval)
    _raise_if_invalid(timing)
    return timing


def write_word_timing(path: str | Path, timing: WordTiming) -> None:
    _write_tsv(
        path,
        ("word_index", "run", "onset_s"),
        ((i, int(timing.run_of_word[i]), repr(float(timing.onsets[i]))) for i in range(timing.n_words)),
    )


def load_labels(path: str | Path, n_words: int) -> DiscourseLabels:
    """Load word-level discourse labels; unlisted (word, feature) pairs are 0."""
    rows = _read_tsv(path, ("word_index", "feature", "flag"))
    features: dict[str, np.ndarray] = {}
    seen: set[tuple[int, str]] = set()
    for r in rows:
        word, feature, flag = int(r["word_index"]), r["feature"], int(r["flag"])
        if not 0 <= word < n_words:
            raise IngestError(f"{path}: word_index {word} outside [0, {n_words})")
        if (word, feature) in seen:
            raise IngestError(f"{path}: duplicate row for word {word}, feature {feature!r}")
        seen.add((word, feature))
        if feature not in features:
            features[feature] = np.zeros(n_words, dtype=np.uint8)
        features[feature][word] = 1 if flag else 0
    labels = DiscourseLabels(features=features, n_words=n_words)
    _raise_if_invalid(labels)
    return labels


def write_labels(path: str | Path, labels: DiscourseLabels) -> None:
    rows = []
    for feature in sorted(labels.features):
        for word in np.flatnonzero(labels.features[feature]):
            rows.append((int(word), feature, 1))
    rows.sort()
    _write_tsv(path, ("word_index", "feature", "flag"), rows)


def load_roi_masks(path: str | Path, n_voxels: int) -> RoiMaskSet:
    rows = _read_tsv(path, ("voxel_index", "roi", "flag"))
    masks: dict[str, np.ndarray] = {}
    for r in rows:
        voxel, roi, flag = int(r["voxel_index"]), r["roi"], int(r["flag"])
        if not 0 <= voxel < n_voxels:
            raise IngestError(f"{path}: voxel_index {voxel} outside [0, {n_voxels})")
        if roi not in masks:
            masks[roi] = np.zeros(n_voxels, dtype=bool)
        masks[roi][voxel] = bool(flag)
    mask_set = RoiMaskSet(masks=masks, n_voxels=n_voxels)
    _raise_if_invalid(mask_set)
    return mask_set


def write_roi_masks(path: str | Path, mask_set: RoiMaskSet) -> None:
    rows = []
    for roi in sorted(mask_set.masks):
        for voxel in np.flatnonzero(mask_set.masks[roi]):
            rows.append((int(voxel), roi, 1))
    rows.sort()
    _write_tsv(path, ("voxel_index", "roi", "flag"), rows)


def save_fold_plan(path: str | Path, plan: FoldPlan) -> None:
    doc = {
        "trim": plan.trim,
        "folds": [
            {"train": fold.train.tolist(), "test": fold.test.tolist()} for fold in plan.folds
        ],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8")


def load_fold_plan(path: str | Path) -> FoldPlan:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    folds = tuple(
        Fold(
            train=np.asarray(f["train"], dtype=np.int64),
            test=np.asarray(f["test"], dtype=np.int64),
        )
        for f in doc["folds"]
    )
    return FoldPlan(folds=folds, trim=int(doc["trim"]))


# ---------------------------------------------------------------------------
# Results

_RESULT_COLUMNS = ("model", "layer", "seqlen", "subject", "fold", "metric", "value")


def _record_stem(record: ResultRecord) -> str:
    return f"{record.model}_L{record.layer}_S{record.seqlen}_{record.subject}_fold{record.fold}"


def write_results(records: Sequence[ResultRecord], path: str | Path) -> None:
    """Write a tidy results CSV plus per-voxel sidecar matrices.

    One CSV row per record per summary statistic; per-voxel Pearson and
    lambda vectors go to FMAT sidecars next to the CSV. Output bytes depend
    only on the records, never on wall time or dict order.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ordered = sorted(records, key=lambda r: r.key)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_RESULT_COLUMNS)
        for rec in ordered:
            base = [rec.model, rec.layer, rec.seqlen, rec.subject, rec.fold]
            writer.writerow(base + ["acc_20v20", repr(float(rec.acc_20v20))])
            writer.writerow(base + ["pearson_mean", repr(rec.pearson_mean)])
    for rec in ordered:
        stem = path.parent / _record_stem(rec)
        meta = {
            "model": rec.model,
            "layer": rec.layer,
            "sequence_length": rec.seqlen,
            "subject": rec.subject,
            "fold": rec.fold,
        }
        write_fmat(f"{stem}__pearson.fmat", rec.pearson.reshape(1, -1), meta=meta)
        write_fmat(f"{stem}__lambda.fmat", rec.lambda_chosen.reshape(1, -1), meta=meta)


def load_results(path: str | Path) -> list[ResultRecord]:
    """Load records written by :func:`write_results` (CSV plus sidecars)."""
    path = Path(path)
    rows = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != _RESULT_COLUMNS:
            raise IngestError(f"{path}: expected columns {_RESULT_COLUMNS}, got {reader.fieldnames}")
        for r in reader:
            key = (r["model"], int(r["layer"]), int(r["seqlen"]), r["subject"], int(r["fold"]))
            rows.setdefault(key, {})[r["metric"]] = float(r["value"])
    records = []
    for key, metrics in sorted(rows.items()):
        model, layer, seqlen, subject, fold = key
        stem = path.parent / f"{model}_L{layer}_S{seqlen}_{subject}_fold{fold}"
        pearson, _ = read_fmat(f"{stem}__pearson.fmat")
        lam, _ = read_fmat(f"{stem}__lambda.fmat")
        records.append(
            ResultRecord(
                model=model,
                layer=layer,
                seqlen=seqlen,
                subject=subject,
                fold=fold,
                pearson=pearson.ravel(),
                acc_20v20=metrics["acc_20v20"],
                lambda_chosen=lam.ravel(),
            )
        )
    return records
