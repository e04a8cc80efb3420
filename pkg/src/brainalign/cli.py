"""Command-line entry points.

Every subcommand reads and writes files only, so sweep cells can run as
independent batch jobs and the output directory is the checkpoint:

    simulate      write a synthetic dataset plus a ready experiment config
    preprocess    write design matrices per (model, layer, seqlen, subject)
    fit           cross-validated ridge per cell; stores predictions
    eval          metrics from stored predictions; stores result records
    stats         paired tests, significance grids, per-voxel tables
    discourse     per-feature alignment tables (add --balanced for the
                  split-retrain variant)
    noiseceiling  subject-to-subject ceiling grid
    aggregate     grouped mean/sem summary tables

Exit status is 0 only when every cell succeeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path

from . import ingest
from .experiment import (
    Config,
    _run_phase,
    aggregate_records,
    cell_id,
    emit_voxel_table,
    load_all_records,
    run_discourse,
    run_noise_ceiling,
    significance_grid,
    stats_table,
    write_table,
)
from .synth import SynthConfig, generate, save_dataset, subject_series


def _load_doc(path: str | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _config(args) -> Config:
    config = Config.load(args.config)
    if args.seed is not None:
        config.doc["seed"] = args.seed
    return config


def cmd_simulate(args) -> int:
    doc = _load_doc(args.config)
    synth_doc = dict(doc.get("synth", {}))
    n_subjects = int(synth_doc.pop("subjects", 1))
    if args.seed is not None:
        synth_doc["seed"] = args.seed
    known = {f.name for f in dataclass_fields(SynthConfig)}
    unknown = set(synth_doc) - known
    if unknown:
        raise SystemExit(f"simulate: unknown synth fields {sorted(unknown)}")
    if "lag_profile" in synth_doc:
        synth_doc["lag_profile"] = tuple(synth_doc["lag_profile"])
    cfg = SynthConfig(**synth_doc)
    data = generate(cfg)
    out = Path(args.out)
    dataset = out / "dataset"
    paths = save_dataset(data, dataset)
    subjects = {}
    for i in range(n_subjects):
        name = f"sub{i:02d}"
        series = subject_series(data, i)
        voxels = dataset / f"voxels_{name}.fmat"
        runs = dataset / f"runs_{name}.tsv"
        ingest.write_voxel_series(voxels, runs, series)
        subjects[name] = {"voxels": str(voxels), "runs": str(runs)}
    exp_doc = {k: v for k, v in doc.items() if k != "synth"}
    exp_doc.setdefault("seed", cfg.seed)
    exp_doc["dataset"] = {
        "features": str(dataset / "features.fmat"),
        "subjects": subjects,
        "timing": paths["timing"],
        "labels": paths["labels"],
        "roi_masks": None,
    }
    exp_doc["sweep"] = {
        "models": ["synth"],
        "layers": {"synth": [1]},
        "seqlens": {"synth": [1]},
        "subjects": sorted(subjects),
    }
    config_path = out / "config.json"
    out.mkdir(parents=True, exist_ok=True)
    config_path.write_text(json.dumps(exp_doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    print(f"simulate: {data.series.n} TRs x {data.series.v} voxels, {n_subjects} subject(s)")
    print(f"simulate: dataset under {dataset}, experiment config at {config_path}")
    return 0


def cmd_preprocess(args) -> int:
    from .encoder import make_fold_plan
    from .experiment import _build_designs, _load_subject

    config = _config(args)
    out = Path(args.out)
    (out / "designs").mkdir(parents=True, exist_ok=True)
    for cell in config.cells():
        model, layer, seqlen, subject = cell
        series = _load_subject(config, subject)
        plan = make_fold_plan(series, trim=int(config["encoder"]["trim"]))
        design, _ = _build_designs(config, model, layer, seqlen, series, plan)
        designs = design if isinstance(design, list) else [design]
        for f, d in enumerate(designs):
            suffix = f"_fold{f}" if len(designs) > 1 else ""
            ingest.write_fmat(
                out / "designs" / f"{cell_id(*cell)}{suffix}.fmat",
                d.values,
                meta={"lag_count": d.lag_count, "n_components": d.n_components},
            )
    print(f"preprocess: wrote designs for {len(config.cells())} cell(s) under {out / 'designs'}")
    return 0


def _phase_command(args, phase: str) -> int:
    config = _config(args)
    statuses = _run_phase(config, args.out, phase, force=args.force, workers=args.workers)
    failed = {cid: s for cid, s in statuses.items() if s["status"] == "failed"}
    for cid, status in sorted(statuses.items()):
        line = f"{phase} {cid}: {status['status']}"
        if "error" in status:
            line += f" ({status['error']})"
        print(line)
    return 1 if failed else 0


def cmd_fit(args) -> int:
    return _phase_command(args, "fit")


def cmd_eval(args) -> int:
    return _phase_command(args, "eval")


def cmd_stats(args) -> int:
    config = _config(args)
    out = Path(args.out)
    records = load_all_records(config, out)
    if not records:
        print("stats: no records found; run fit and eval first", file=sys.stderr)
        return 1
    pairs = config["stats"]["model_pairs"]
    alpha = float(config["stats"]["alpha"])
    pairing = config["stats"]["pairing"]
    if pairs:
        rows = stats_table(records, pairs, pairing=pairing, alpha=alpha)
        write_table(out / "stats_pairs.csv", rows)
        for base, cand in pairs:
            grid = significance_grid(records, base, cand, pairing=pairing, alpha=alpha)
            grid_rows = []
            for i, layer in enumerate(grid["layers"]):
                row = {"layer": layer}
                for j, seqlen in enumerate(grid["seqlens"]):
                    row[f"S{seqlen}"] = grid["significant"][i][j]
                grid_rows.append(row)
            write_table(out / f"significance_grid_{base}_vs_{cand}.csv", grid_rows)
        mask_set = None
        if config["dataset"]["roi_masks"]:
            v = records[0].pearson.size
            mask_set = ingest.load_roi_masks(config.path(config["dataset"]["roi_masks"]), v)
        for base, cand in pairs:
            for subject in config["sweep"]["subjects"]:
                side_a = [r for r in records if r.model == cand and r.subject == subject]
                side_b = [r for r in records if r.model == base and r.subject == subject]
                if side_a and side_b:
                    rows = emit_voxel_table(side_a, side_b, roi_masks=mask_set, alpha=alpha)
                    write_table(out / f"voxels_{cand}_vs_{base}_{subject}.csv", rows)
        print(f"stats: wrote pair tests, grids and voxel tables under {out}")
    else:
        print("stats: no model_pairs configured; nothing to test", file=sys.stderr)
        return 1
    return 0


def cmd_aggregate(args) -> int:
    config = _config(args)
    out = Path(args.out)
    records = load_all_records(config, out)
    if not records:
        print("aggregate: no records found; run fit and eval first", file=sys.stderr)
        return 1
    group_by = tuple(config.doc.get("aggregate", {}).get("group_by", ["model"]))
    rows = aggregate_records(records, group_by=group_by)
    write_table(out / "summary.csv", rows)
    print(f"aggregate: {len(rows)} group(s) -> {out / 'summary.csv'}")
    return 0


def cmd_discourse(args) -> int:
    config = _config(args)
    tables = run_discourse(config, args.out, balanced=args.balanced)
    mode = "balanced" if args.balanced else "cv"
    print(f"discourse ({mode}): wrote {len(tables)} table(s) under {Path(args.out) / 'discourse'}")
    return 0


def cmd_noiseceiling(args) -> int:
    config = _config(args)
    result = run_noise_ceiling(config, args.out)
    print(f"noiseceiling: {result['summary']}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="brainalign", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "simulate": cmd_simulate,
        "preprocess": cmd_preprocess,
        "fit": cmd_fit,
        "eval": cmd_eval,
        "stats": cmd_stats,
        "discourse": cmd_discourse,
        "noiseceiling": cmd_noiseceiling,
        "aggregate": cmd_aggregate,
    }
    for name, handler in commands.items():
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "simulate", help="experiment config JSON")
        p.add_argument("--out", required=True, help="result directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--force", action="store_true", help="recompute cached cells")
        p.add_argument("--workers", type=int, default=1, help="parallel cells")
        if name == "discourse":
            p.add_argument("--balanced", action="store_true", help="use the split-retrain protocol")
        p.set_defaults(handler=handler)
    args = parser.parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
