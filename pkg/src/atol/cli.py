"""Command line: ``atol <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace

from . import bench
from .measures import MeasureFormatError, atomic_write, load_measures, save_measures
from .orbits import OrbitDatasetSpec, generate_dataset, write_manifest
from .quantize import BATCH_LLOYD, MINIBATCH_MACQUEEN, QuantizerConfig
from .vectorize import VectorizationMap, calibrate, calibration_subset


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _write_json(path, obj):
    atomic_write(path, json.dumps(obj, indent=2) + "\n")


def features_csv(features, ids=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["measure_id"] + [f"v{j + 1}" for j in range(features.shape[1])])
    ids = range(len(features)) if ids is None else ids
    for i, row in zip(ids, features):
        w.writerow([i] + [repr(float(v)) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_calibrate(args):
    data = load_measures(args.measures)
    n_cal = len(calibration_subset(len(data), args.fraction, args.seed)) if len(data) else 0
    mode = args.mode
    if mode == "auto":
        mode = MINIBATCH_MACQUEEN if n_cal >= bench.MINIBATCH_THRESHOLD else BATCH_LLOYD
    qcfg = QuantizerConfig(budget=args.budget, seed=args.seed, max_iterations=args.max_iterations,
                           mode=mode, minibatch_size=args.minibatch_size, n_init=args.n_init)
    vmap = calibrate(data, qcfg, args.family, args.fraction, args.bandwidth)
    vmap.save(args.out)
    print(f"wrote {args.out}: b={vmap.size} d={vmap.dim} family={vmap.family.value} "
          f"mode={mode} seed={args.seed}")


def cmd_transform(args):
    vmap = VectorizationMap.load(args.map)
    data = load_measures(args.measures)
    feats = vmap.transform_batch(data)
    atomic_write(args.out, features_csv(feats))
    print(f"wrote {args.out}: {feats.shape[0]} measures x {feats.shape[1]} features")


def _default_sidecar(path, suffix):
    stem, _ = os.path.splitext(path)
    return f"{stem}{suffix}"


def cmd_orbits_gen(args):
    spec = OrbitDatasetSpec(parameters=tuple(args.classes), orbits_per_class=args.per_class,
                            n_iterations=args.iters, master_seed=args.seed)
    data = generate_dataset(spec)
    labels_out = args.labels_out or _default_sidecar(args.out, "_labels.csv")
    manifest_out = args.manifest or _default_sidecar(args.out, "_manifest.json")
    save_measures(data, args.out, labels_out)
    write_manifest(spec, manifest_out, measures=os.path.basename(args.out),
                   labels=os.path.basename(labels_out))
    print(f"wrote {args.out}: {len(data)} orbits of {spec.n_iterations} points "
          f"(labels {labels_out}, manifest {manifest_out}, seed {spec.master_seed})")


def _experiment_config(args) -> bench.ExperimentConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                cfg = bench.ExperimentConfig.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{args.config}: invalid JSON: {exc}") from None
    elif args.measures:
        if not args.labels:
            raise UsageError("--measures needs --labels")
        cfg = bench.ExperimentConfig(measures_path=args.measures, labels_path=args.labels)
    else:
        cfg = bench.ExperimentConfig.preset(args.preset)
    overrides = {
        "budget": args.budget, "family": args.family, "calibration_fraction": args.fraction,
        "n_repetitions": args.reps, "baseline": args.baseline, "bandwidth": args.bandwidth,
        "quantizer_mode": args.mode, "master_seed": args.seed, "threads": args.threads,
        "split_ratio": args.split,
    }
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    if args.trees is not None:
        cfg = replace(cfg, forest=replace(cfg.forest, n_trees=args.trees))
    return cfg


def cmd_experiment(args):
    cfg = _experiment_config(args)
    report = bench.run_experiment(cfg)
    _write_json(args.out, report.to_dict())
    if args.csv:
        rows = ["repetition,accuracy,vectorization_time_s"] + [
            f"{i},{a!r},{t!r}" for i, (a, t) in enumerate(zip(report.accuracies, report.vectorization_times))]
        atomic_write(args.csv, "\n".join(rows) + "\n")
    print(f"accuracy {report.summary_line()}  over {cfg.n_repetitions} repetitions "
          f"(b={cfg.budget}, {cfg.family}, {cfg.baseline}, seed {cfg.master_seed})")


def cmd_ablation(args):
    cfg = _experiment_config(args)
    table = bench.run_ablation(cfg, budgets=tuple(args.budgets))
    _write_json(args.out, {"table": table.to_dict(), "base_config": cfg.to_dict()})
    print(table.format())


def cmd_sweep(args):
    cfg = _experiment_config(args)
    report = bench.run_bandwidth_sweep(cfg, tuple(args.exponents))
    _write_json(args.out, report.to_dict())
    print(report.format())


def cmd_separation(args):
    trials = []
    for t in range(args.trials):
        res = bench.separation_probe(n_per_source=args.per_source, noise=args.noise,
                                     budget=args.budget, seed=args.seed + t, family=args.family)
        trials.append({"seed": args.seed + t, **res.to_dict()})
    ok = sum(r["separated"] for r in trials)
    _write_json(args.out, {"noise": args.noise, "per_source": args.per_source, "trials": trials,
                           "separated_trials": ok})
    for r in trials:
        print(f"seed {r['seed']}: max intra {r['max_intra_gap']:.4f}  min inter {r['min_inter_gap']:.4f}"
              f"  {'separated' if r['separated'] else 'NOT separated'}")
    print(f"{ok}/{len(trials)} trials separated")


# ---------------------------------------------------------------------------


def _add_experiment_flags(p, out_default):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", default="orbit-desk", choices=sorted(bench.PRESETS))
    src.add_argument("--config", help="experiment config JSON")
    src.add_argument("--measures", help="measures CSV (needs --labels)")
    p.add_argument("--labels", help="labels sidecar CSV")
    p.add_argument("--budget", type=int)
    p.add_argument("--family", choices=["laplacian", "gaussian"])
    p.add_argument("--fraction", type=float, help="calibration fraction of training measures")
    p.add_argument("--reps", type=int, help="number of train/test repetitions")
    p.add_argument("--split", type=float, help="training fraction")
    p.add_argument("--baseline", choices=["atol", "grid"])
    p.add_argument("--bandwidth", type=float, help="constant bandwidth instead of adaptive")
    p.add_argument("--mode", choices=["auto", BATCH_LLOYD, MINIBATCH_MACQUEEN])
    p.add_argument("--trees", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker threads for repetitions")
    p.add_argument("--out", default=out_default)


def build_parser():
    parser = _Parser(prog="atol", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("calibrate", help="fit a vectorization map on a measures CSV")
    p.add_argument("--measures", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--family", default="laplacian", choices=["laplacian", "gaussian"])
    p.add_argument("--fraction", type=float, default=1.0)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--mode", default="auto", choices=["auto", BATCH_LLOYD, MINIBATCH_MACQUEEN])
    p.add_argument("--max-iterations", type=int, default=300)
    p.add_argument("--minibatch-size", type=int, default=1024)
    p.add_argument("--n-init", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("transform", help="vectorize measures with a saved map")
    p.add_argument("--map", required=True)
    p.add_argument("--measures", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("orbits-gen", help="generate a labelled orbit dataset")
    p.add_argument("--classes", type=_floats, default=list(OrbitDatasetSpec().parameters))
    p.add_argument("--per-class", type=int, default=1000)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="orbits.csv")
    p.add_argument("--labels-out")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_orbits_gen)

    p = sub.add_parser("experiment", help="one configuration, repeated splits")
    _add_experiment_flags(p, "report.json")
    p.add_argument("--csv", help="per-repetition accuracies CSV")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("ablation", help="one-parameter-at-a-time ablation table")
    _add_experiment_flags(p, "ablation.json")
    p.add_argument("--budgets", type=_ints, default=[4, 16, 36, 100])
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("sweep", help="constant-bandwidth sweep against adaptive bandwidths")
    _add_experiment_flags(p, "sweep.json")
    p.add_argument("--exponents", type=_floats, default=list(bench.SWEEP_EXPONENTS))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("separation", help="separation probe on two noisy sources")
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--per-source", type=int, default=50)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--budget", type=int)
    p.add_argument("--family", default="laplacian", choices=["laplacian", "gaussian"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="separation.json")
    p.set_defaults(func=cmd_separation)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"atol {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (MeasureFormatError, ValueError, OSError, KeyError, RuntimeError) as exc:
        print(f"atol {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
