"""
Command-line entry point.

    python -m src.cli.main gen-data --classes 20 --dim 32 --per-class 1563 --out runs/data
    python -m src.cli.main train-teacher --data runs/data/dataset.csv --out runs/teacher
    python -m src.cli.main distill --spec experiment.ini --budget 100 200 --method CE-only KD CKD
    python -m src.cli.main ablate-k --spec experiment.ini --k 2 3 4 6
    python -m src.cli.main analyze --spec experiment.ini --mode corr --checkpoints a.ckpt b.ckpt
    python -m src.cli.main report --logs runs/run_log.jsonl --out runs/report

Every command writes under --out and records its artifacts with their
SHA-256 in manifest.json. Failures print one line 'error: <Class>: <message>'
and exit with status 1.
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Mapping, Optional, Sequence

import pandas as pd

from src.analysis.aggregate import aggregate_runs, correlation_table, results_table, write_table
from src.analysis.representation_analysis import correlation_gap, flatness_curve, write_curve
from src.cli.experiment_spec import ExperimentSpec
from src.data.binary_envelope import sha256_file
from src.data.dataset_manager import SPLITS, Dataset, DatasetManager
from src.data.synthetic import MixtureSpec, generate_gaussian_mixture
from src.errors import FtiDistillError, InvalidInput
from src.logging_setup import configure_logging
from src.numerics.core_math import COMPARISON_MODES
from src.standard_formats import RunResult, SweepResult
from src.teacher_oracle.base_teacher import BaseTeacher
from src.teacher_oracle.lookup_teacher import LookupTableTeacher
from src.teacher_oracle.mlp_teacher import MlpTeacher
from src.training.checkpoints import load_checkpoint, save_checkpoint
from src.training.config import METHODS
from src.training.run_inputs import RunInputs, prepare_run_inputs
from src.training.run_log import RunLog, final_results
from src.training.sweep import select_learning_rate, group_runs_by_lr, train_sweep
from src.training.teacher_training import train_teacher

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


# --- Helpers ---

def write_manifest(out_dir: str, artifacts: Sequence[str]) -> str:
    """Adds the artifacts (paths under out_dir) to the directory's manifest with their SHA-256."""
    path = os.path.join(out_dir, MANIFEST_NAME)
    entries: Dict[str, str] = {}
    if os.path.exists(path):
        with open(path, "r", encoding="utf-8") as f:
            entries = {e["path"]: e["sha256"] for e in json.load(f).get("artifacts", [])}
    for artifact in artifacts:
        entries[os.path.relpath(artifact, out_dir)] = sha256_file(artifact)
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"artifacts": [{"path": p, "sha256": entries[p]} for p in sorted(entries)]},
                  f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _write_json(path: str, payload: Any) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    return path


def _reportable(run: RunResult) -> Dict[str, Any]:
    """Run summary without per-epoch records."""
    return {k: v for k, v in run.items() if k != "epochs"}


def load_spec(path: Optional[str], **overrides: Any) -> ExperimentSpec:
    if path:
        return ExperimentSpec.from_file(path, **overrides)
    return ExperimentSpec(**{k: v for k, v in overrides.items() if v is not None})


def load_dataset(spec: ExperimentSpec) -> Dataset:
    if spec.dataset_path:
        return DatasetManager(spec.dataset_path).dataset
    logger.info("No dataset path given; generating the synthetic mixture from the [dataset] settings")
    return generate_gaussian_mixture(spec.mixture())


def load_teacher(spec: ExperimentSpec, dataset: Dataset) -> BaseTeacher:
    if spec.teacher_table:
        teacher: BaseTeacher = LookupTableTeacher.from_csv(spec.teacher_table)
    elif spec.teacher_checkpoint:
        model, _, _ = load_checkpoint(spec.teacher_checkpoint, expected_classes=dataset.num_classes)
        teacher = MlpTeacher(model)
    else:
        raise InvalidInput("No teacher given: run 'train-teacher' and pass --teacher, "
                           "or set checkpoint/table in [teacher]")
    if teacher.num_classes != dataset.num_classes:
        raise InvalidInput(f"Teacher has {teacher.num_classes} classes, dataset has {dataset.num_classes}")
    return teacher


def _spec_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    def tup(name: str):
        value = getattr(args, name, None)
        return tuple(value) if value else None

    return {
        "dataset_path": getattr(args, "data", None),
        "teacher_checkpoint": getattr(args, "teacher", None),
        "methods": tup("method"),
        "budgets": tup("budget"),
        "seeds": tup("seeds"),
        "comparison": getattr(args, "comparison", None),
        "beta": getattr(args, "beta", None),
        "temperature": getattr(args, "temperature", None),
        "ckd_temperature": getattr(args, "ckd_temperature", None),
        "white_box": True if getattr(args, "white_box", False) else None,
        "jobs": getattr(args, "jobs", None),
        "out": getattr(args, "out", None),
    }


def _prepare_seeds(spec: ExperimentSpec, dataset: Dataset, teacher: BaseTeacher, n: int,
                   cache_dir: str, allow_mismatch: bool) -> Dict[int, RunInputs]:
    """One warmed oracle per seed for budget n, shared by every method and learning rate."""
    train_size = len(dataset.ids("train"))
    if n > train_size:
        raise InvalidInput(f"Budget n={n} exceeds the training split ({train_size} samples)")
    suffix = "-wb" if spec.white_box else ""
    return {
        seed: prepare_run_inputs(dataset, teacher, n, seed, white_box=spec.white_box,
                                 cache_path=os.path.join(cache_dir, f"teacher-n{n}-s{seed}{suffix}.ftic"),
                                 allow_mismatch=allow_mismatch)
        for seed in spec.seeds
    }


def _best_runs_frame(sweeps: Sequence[SweepResult]) -> pd.DataFrame:
    rows = [{"method": s["method"], "n": s["n"], "seed": r["seed"], "lr": r["lr"],
             "best_val_acc": r["best_val_acc"], "test_acc": r["test_acc"]}
            for s in sweeps for r in s["runs"]]
    return pd.DataFrame(rows)


# --- Commands ---

def cmd_gen_data(args: argparse.Namespace) -> int:
    spec = MixtureSpec(classes=args.classes, dim=args.dim, per_class=args.per_class,
                       noise=args.noise, scale=args.scale, seed=args.seed)
    dataset = generate_gaussian_mixture(spec)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "dataset.csv")
    DatasetManager.write_dataset(dataset, path)
    counts = {s: int((dataset.splits == s).sum()) for s in SPLITS}
    params = _write_json(os.path.join(args.out, "dataset_spec.json"), {**vars(spec), "split_counts": counts})
    write_manifest(args.out, [path, params])
    print(f"Wrote {len(dataset.sample_ids)} samples ({counts}) to {path}")
    return 0


def cmd_train_teacher(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec, dataset_path=args.data, out=args.out,
                     teacher_widths=tuple(args.widths) if args.widths else None,
                     teacher_seed=args.seed)
    spec.check_paths()
    dataset = load_dataset(spec)
    os.makedirs(spec.out, exist_ok=True)
    run_log = RunLog(os.path.join(spec.out, "teacher_log.jsonl"), truncate=True)
    model, result = train_teacher(dataset, spec.teacher_widths, seed=spec.teacher_seed,
                                  lr=spec.teacher_lr, patience=spec.teacher_patience, run_log=run_log)
    ckpt = os.path.join(spec.out, "teacher.ckpt")
    save_checkpoint(ckpt, model, metadata={"role": "teacher", "seed": spec.teacher_seed,
                                           "test_acc": result["test_acc"]})
    summary = _write_json(os.path.join(spec.out, "teacher_result.json"), _reportable(result))
    write_manifest(spec.out, [ckpt, summary, run_log.path])
    print(f"Teacher {list(model.widths)}: test accuracy {result['test_acc']:.4f} -> {ckpt}")
    return 0


def cmd_distill(args: argparse.Namespace) -> int:
    overrides = _spec_overrides(args)
    overrides["k"] = args.k
    spec = load_spec(args.spec, **overrides)
    spec.check_paths()
    dataset = load_dataset(spec)
    teacher = load_teacher(spec, dataset)
    os.makedirs(spec.out, exist_ok=True)
    cache_dir = args.teacher_cache or os.path.join(spec.out, "teacher_cache")
    run_log = RunLog(os.path.join(spec.out, "run_log.jsonl"), truncate=True)
    checkpoint_dir = os.path.join(spec.out, "checkpoints")
    os.makedirs(checkpoint_dir, exist_ok=True)

    sweeps: List[SweepResult] = []
    for n in spec.budgets:
        inputs = _prepare_seeds(spec, dataset, teacher, n, cache_dir, args.allow_teacher_mismatch)
        for method in spec.methods:
            cfg = spec.train_config(method, n)
            sweeps.append(train_sweep(cfg, inputs, jobs=spec.jobs, run_log=run_log,
                                      checkpoint_dir=checkpoint_dir))

    aggregated = aggregate_runs(_best_runs_frame(sweeps).to_dict("records"))
    results_csv = os.path.join(spec.out, "results.csv")
    table_txt = os.path.join(spec.out, "table.txt")
    write_table(aggregated, results_csv, index=False)
    write_table(results_table(aggregated, row_order=spec.methods), table_txt)
    summary = _write_json(os.path.join(spec.out, "sweeps.json"), [
        {**{k: v for k, v in s.items() if k not in ("runs", "all_runs")},
         "runs": [_reportable(r) for r in s["runs"]]}
        for s in sweeps
    ])
    write_manifest(spec.out, [results_csv, table_txt, summary, run_log.path])
    with open(table_txt, "r", encoding="utf-8") as f:
        print(f.read(), end="")
    return 0


def cmd_ablate_k(args: argparse.Namespace) -> int:
    overrides = _spec_overrides(args)
    overrides["k_values"] = tuple(args.k) if args.k else None
    spec = load_spec(args.spec, **overrides)
    spec.check_paths()
    dataset = load_dataset(spec)
    teacher = load_teacher(spec, dataset)
    os.makedirs(spec.out, exist_ok=True)
    cache_dir = args.teacher_cache or os.path.join(spec.out, "teacher_cache")
    run_log = RunLog(os.path.join(spec.out, "ablate_k_log.jsonl"), truncate=True)

    rows: List[Dict[str, Any]] = []
    for n in spec.budgets:
        inputs = _prepare_seeds(spec, dataset, teacher, n, cache_dir, args.allow_teacher_mismatch)
        for k in spec.k_values:
            if k > n:
                logger.warning("Skipping k=%d: it exceeds the budget n=%d", k, n)
                continue
            sweep = train_sweep(spec.train_config("CKD", n, k=k), inputs, jobs=spec.jobs, run_log=run_log)
            rows.append({"n": n, "k": k, "mean": sweep["test_mean"], "std": sweep["test_std"],
                         "count": len(sweep["runs"]), "best_lr": sweep["best_lr"]})
    if not rows:
        raise InvalidInput("Every k value exceeded every budget; nothing was trained")

    curve = pd.DataFrame(rows, columns=["n", "k", "mean", "std", "count", "best_lr"])
    curve_csv = os.path.join(spec.out, "ablate_k.csv")
    write_table(curve, curve_csv, index=False)
    write_manifest(spec.out, [curve_csv, run_log.path])
    print(curve.to_string(index=False))
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec, dataset_path=args.data, teacher_checkpoint=args.teacher, out=args.out)
    spec.check_paths()
    for path in args.checkpoints:
        if not os.path.exists(path):
            raise InvalidInput(f"Checkpoint '{path}' does not exist")
    labels = args.labels or [os.path.splitext(os.path.basename(p))[0] for p in args.checkpoints]
    if len(labels) != len(args.checkpoints):
        raise InvalidInput("Give one label per checkpoint")
    dataset = load_dataset(spec)
    ids = dataset.ids(args.split)
    x, y = dataset.take(ids)
    models = {label: load_checkpoint(path, expected_classes=dataset.num_classes)[0]
              for label, path in zip(labels, args.checkpoints)}
    os.makedirs(spec.out, exist_ok=True)
    artifacts: List[str] = []

    if args.mode == "corr":
        teacher = load_teacher(spec, dataset)
        if isinstance(teacher, MlpTeacher):
            teacher = teacher.model
        reports = {}
        for label, model in models.items():
            reports[label] = correlation_gap(model, teacher, ids, x, m=args.m, seed=args.seed)
            artifacts.append(_write_json(os.path.join(spec.out, f"corr_{label}.json"), reports[label]))
        table = correlation_table(reports)
        name = "corr_table"
    else:
        curves = {}
        for label, model in models.items():
            curves[label] = flatness_curve(model, ids, x, y, per_class=not args.pooled,
                                           normalize=not args.raw)
            curve_path = os.path.join(spec.out, f"flatness_{label}.txt")
            write_curve(curve_path, curves[label]["values"])
            artifacts.append(curve_path)
        table = pd.DataFrame({label: c["values"] for label, c in curves.items()}).T
        table.columns = [f"s{i + 1}" for i in range(table.shape[1])]
        table.index.name = "model"
        table = table.reset_index()
        name = "flatness_table"

    table_csv = os.path.join(spec.out, f"{name}.csv")
    table_txt = os.path.join(spec.out, f"{name}.txt")
    write_table(table, table_csv, index=False)
    write_table(table, table_txt, index=False)
    write_manifest(spec.out, artifacts + [table_csv, table_txt])
    print(table.to_string(index=False))
    return 0


def variant_label(method: str, config: Mapping[str, Any]) -> str:
    """Method name, extended with k and the comparison mode for comparative methods."""
    if method in ("CKD", "FitNets+CKD") and "ckd" in config:
        ckd = config["ckd"]
        return f"{method}(k={ckd['k']},{ckd['comparison']['mode']})"
    return method


def cmd_report(args: argparse.Namespace) -> int:
    finals: Dict[str, Dict[str, Any]] = {}
    for path in args.logs:
        if not os.path.exists(path):
            raise InvalidInput(f"Run log '{path}' does not exist")
        for summary in final_results(path):
            finals[summary["run_id"]] = summary    # a re-run replaces the earlier record
    if not finals:
        raise InvalidInput("The run logs hold no finished runs")

    by_variant: Dict[tuple, List[Dict[str, Any]]] = {}
    for summary in finals.values():
        key = (variant_label(summary["method"], summary.get("config", {})), summary["n"])
        by_variant.setdefault(key, []).append(summary)

    rows: List[Dict[str, Any]] = []
    for (label, n), runs in sorted(by_variant.items()):
        best_lr, _ = select_learning_rate(group_runs_by_lr(runs))
        rows.extend({"method": label, "n": n, "seed": r["seed"], "lr": r["lr"], "test_acc": r["test_acc"]}
                    for r in runs if r["lr"] == best_lr)

    aggregated = aggregate_runs(rows)
    os.makedirs(args.out, exist_ok=True)
    results_csv = os.path.join(args.out, "results.csv")
    table_txt = os.path.join(args.out, "table.txt")
    write_table(aggregated, results_csv, index=False)
    write_table(results_table(aggregated, row_order=METHODS), table_txt)
    write_manifest(args.out, [results_csv, table_txt])
    with open(table_txt, "r", encoding="utf-8") as f:
        print(f.read(), end="")
    return 0


# --- Parser ---

def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec", type=str, help="Experiment INI file.")
    p.add_argument("--data", type=str, help="Dataset CSV (overrides [dataset]).")
    p.add_argument("--teacher", type=str, help="Teacher checkpoint (overrides [teacher] checkpoint).")
    p.add_argument("--budget", type=int, nargs="+", help="Teacher-call budgets n.")
    p.add_argument("--method", type=str, nargs="+", choices=METHODS, help="Methods to train.")
    p.add_argument("--comparison", type=str, choices=COMPARISON_MODES, help="CKD comparison function.")
    p.add_argument("--beta", type=float, help="Weight of the comparative loss.")
    p.add_argument("--temperature", type=float, help="KD and Mixup temperature.")
    p.add_argument("--ckd-temperature", type=float, help="Temperature of the comparative loss.")
    p.add_argument("--white-box", action="store_true", help="Allow hint queries (FitNets methods).")
    p.add_argument("--seeds", type=int, nargs="+", help="Run seeds.")
    p.add_argument("--jobs", type=int, help="Concurrent runs per sweep.")
    p.add_argument("--out", type=str, help="Output directory.")
    p.add_argument("--teacher-cache", type=str, help="Directory of persisted teacher caches.")
    p.add_argument("--allow-teacher-mismatch", action="store_true",
                   help="Reuse caches built by a different teacher (warns instead of failing).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Knowledge distillation under a teacher-inference budget."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="Generate a seeded Gaussian-mixture dataset.")
    p.add_argument("--classes", type=int, default=20)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--per-class", type=int, default=1563)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--scale", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default="runs/data")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-teacher", help="Train the teacher MLP on the full training split.")
    p.add_argument("--spec", type=str)
    p.add_argument("--data", type=str)
    p.add_argument("--widths", type=int, nargs="+", help="Teacher layer widths, input first.")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_train_teacher)

    p = sub.add_parser("distill", help="Sweep methods and budgets; emit the results table.")
    _add_experiment_flags(p)
    p.add_argument("--k", type=int, help="CKD group size.")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("ablate-k", help="CKD test accuracy as a function of the group size k.")
    _add_experiment_flags(p)
    p.add_argument("--k", type=int, nargs="+", help="Group sizes to try.")
    p.set_defaults(func=cmd_ablate_k)

    p = sub.add_parser("analyze", help="Correlation-gap or flatness analysis of checkpoints.")
    p.add_argument("--spec", type=str)
    p.add_argument("--data", type=str)
    p.add_argument("--teacher", type=str)
    p.add_argument("--checkpoints", type=str, nargs="+", required=True)
    p.add_argument("--labels", type=str, nargs="+")
    p.add_argument("--mode", choices=("corr", "flatness"), default="corr")
    p.add_argument("--split", choices=SPLITS, default="test")
    p.add_argument("--m", type=int, default=100, help="Samples drawn for the correlation gap.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pooled", action="store_true", help="One SVD over all samples instead of per class.")
    p.add_argument("--raw", action="store_true", help="Do not divide curves by the leading singular value.")
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="Re-aggregate run logs into a results table.")
    p.add_argument("--logs", type=str, nargs="+", required=True)
    p.add_argument("--out", type=str, default="runs/report")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FtiDistillError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
