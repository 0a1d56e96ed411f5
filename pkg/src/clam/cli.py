"""Command line interface: ``clam <command> [options]``.

Commands: train, infer, eval, basin-map, synth, grid, baseline.  Every
command exits 0 on success and 1 with a one-line ``clam: error:`` diagnostic
otherwise (argparse usage errors exit 2).
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from contextlib import nullcontext
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import SoftAssignConfig, lloyd_kmeans, soft_kmeans
from .basins import compute_basins, write_grid_csv, write_memories_csv, write_ppm
from .config import FIELD_NAMES, PRESETS, RunConfig, build, dataset_key
from .datasets import BUNDLED, Dataset, gen_elongated, load_bundled, load_csv, standardize, write_csv
from .dynamics import DynamicsConfig, PrototypeSet
from .inference import entropy_profile, infer
from .metrics import cluster_sizes, report
from .persistence import ModelFile
from .training import train

THREADS_ENV = "CLAM_NUM_THREADS"


class CLIError(Exception):
    pass


# -- helpers ------------------------------------------------------------------

def _thread_limit():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return nullcontext()
    try:
        n = int(value)
    except ValueError:
        raise CLIError(f"{THREADS_ENV} must be an integer, got {value!r}") from None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=max(n, 1))


def _want_standardize(flag: str, data: str) -> bool:
    if flag == "auto":
        return dataset_key(data) is not None
    return flag == "on"


def load_data(spec: str, label_column=None, standardize_flag="auto") -> Dataset:
    """A bundled dataset name (``zoo``, ``ecoli``) or a CSV path."""
    path = Path(spec)
    key = dataset_key(spec)
    if path.exists():
        if label_column is None and key is not None:
            # a copy of a bundled file keeps its label column
            try:
                data = load_csv(path, BUNDLED[key][1])
            except ValueError:
                data = load_csv(path)
        else:
            data = load_csv(path, label_column)
    elif key is not None and path.suffix in ("", ".csv"):
        data = load_bundled(key, standardized=False)
    else:
        raise CLIError(f"data file not found: {spec}")
    if _want_standardize(standardize_flag, spec):
        data = standardize(data)
    return data


def _apply_model_scaling(model: ModelFile, data: Dataset) -> Dataset:
    std = model.standardization
    if std is None:
        return data
    if data.d != len(std[0]):
        raise CLIError(f"data has d={data.d} but the model expects d={len(std[0])}")
    mean, scale = std
    return Dataset((data.points - mean) / scale, data.labels, data.feature_names, data.label_names, (mean, scale))


def _load_model(path) -> ModelFile:
    if not Path(path).exists():
        raise CLIError(f"model file not found: {path}")
    return ModelFile.load(path)


def _write_labels(path, labels, residuals=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] if residuals is None else ["label", "residual"])
        for i, lab in enumerate(labels):
            writer.writerow([int(lab)] if residuals is None else [int(lab), repr(float(residuals[i]))])


def _read_labels(path) -> np.ndarray:
    if not Path(path).exists():
        raise CLIError(f"labels file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if rows and rows[0] and not rows[0][0].strip().lstrip("-").isdigit():
        rows = rows[1:]
    try:
        return np.array([int(r[0]) for r in rows if r], dtype=np.int64)
    except ValueError as exc:
        raise CLIError(f"{path}: labels must be integers ({exc})") from None


def _emit(doc: dict, path=None):
    text = json.dumps(doc, indent=2, sort_keys=True, default=_json_default)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    print(text)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _floats(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _memories(text: str) -> np.ndarray:
    try:
        rows = [[float(v) for v in row.split(",")] for row in text.split(";") if row.strip()]
        arr = np.array(rows, dtype=np.float64)
    except ValueError:
        raise argparse.ArgumentTypeError("memories look like 'x1,y1;x2,y2;...'") from None
    if arr.ndim != 2:
        raise argparse.ArgumentTypeError("every memory needs the same number of coordinates")
    return arr


# -- train --------------------------------------------------------------------

def _run_options(p: argparse.ArgumentParser):
    """Flags mirroring RunConfig; defaults are None so presets and TOML apply."""
    p.add_argument("--config", help="TOML file with run settings (flags override it)")
    p.add_argument("--data", help="CSV path or bundled name (zoo, ecoli)")
    p.add_argument("--label-column", help="name or index of the ground-truth column")
    p.add_argument("--standardize", choices=["auto", "on", "off"],
                   help="standardize features (auto: only for bundled datasets)")
    p.add_argument("--k", type=int, help="number of clusters")
    p.add_argument("--beta", type=float, help="inverse temperature")
    p.add_argument("--steps", type=int, help="recursion depth")
    p.add_argument("--step-factor", type=float, help="recursion step size (default 1/steps)")
    p.add_argument("--metric", choices=["euclidean", "spherical"])
    p.add_argument("--lr", type=float, help="initial learning rate")
    p.add_argument("--batch", type=int, help="batch size")
    p.add_argument("--epochs", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--mask-prob", type=float)
    p.add_argument("--mask-fill", choices=["mean", "min", "max", "zero"])
    p.add_argument("--variant", choices=["masked", "unmasked"])
    p.add_argument("--train-weights", action="store_true", default=None)
    p.add_argument("--lr-factor", type=float)
    p.add_argument("--lr-patience", type=int)
    p.add_argument("--min-lr", type=float)
    p.add_argument("--lr-threshold", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")


def _run_config(args) -> RunConfig:
    overrides = {name: getattr(args, name, None) for name in FIELD_NAMES}
    cfg = build(overrides, args.config)
    if cfg.data is None:
        raise CLIError("no dataset given (--data or 'data' in the config file)")
    if cfg.k is None:
        raise CLIError("number of clusters not given (--k)")
    return cfg


def fit_run(cfg: RunConfig, log_path=None):
    """Train one configuration; returns (model, data, assignment, train_report)."""
    data = load_data(cfg.data, cfg.label_column, cfg.standardize)
    dyn = cfg.dynamics()
    if log_path is not None:
        Path(log_path).parent.mkdir(parents=True, exist_ok=True)
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        def on_epoch(rec):
            if log_fh is not None:
                log_fh.write(json.dumps({"restart": rec.restart, "epoch": rec.epoch,
                                         "loss": rec.loss, "lr": rec.lr}) + "\n")
        rep = train(data, cfg.k, dyn, cfg.mask_spec(), cfg.train_config(), callback=on_epoch)
    finally:
        if log_fh is not None:
            log_fh.close()
    provenance = {
        "dataset": cfg.data,
        "dataset_sha256": data.fingerprint(),
        "seed": cfg.seed,
        "run_config": cfg.to_dict(),
        "chosen_restart": rep.chosen_restart,
        "final_loss": rep.final_loss,
        "failed_restarts": {str(r): msg for r, msg in rep.failures.items()},
        "standardization": None if data.standardization is None else {
            "mean": data.standardization[0].tolist(), "scale": data.standardization[1].tolist()},
    }
    model = ModelFile(rep.best_protos, dyn, provenance)
    return model, data, infer(data, rep.best_protos, dyn), rep


def cmd_train(args) -> int:
    cfg = _run_config(args)
    out = Path(cfg.out)
    model, data, assignment, rep = fit_run(cfg, out / "train_log.jsonl")
    model.save(out / "model.json")
    _write_labels(out / "labels.csv", assignment.labels, assignment.residuals)
    summary = {"model": str(out / "model.json"), "chosen_restart": rep.chosen_restart,
               "final_loss": rep.final_loss, "failed_restarts": len(rep.failures),
               "max_last_step_norm": assignment.max_step_norm}
    summary.update(report(data, assignment.labels, data.labels))
    _emit(summary, out / "train_summary.json")
    return 0


# -- infer / eval -------------------------------------------------------------

def cmd_infer(args) -> int:
    model = _load_model(args.model)
    data = load_data(args.data, args.label_column, "off")
    data = _apply_model_scaling(model, data)
    if data.d != model.d:
        raise CLIError(f"data has d={data.d} but the model has d={model.d}")
    assignment = infer(data, model.protos, model.dynamics)
    _write_labels(args.out, assignment.labels, assignment.residuals)
    print(json.dumps({"labels": args.out, "n": data.n, "max_last_step_norm": assignment.max_step_norm}))
    return 0


def cmd_eval(args) -> int:
    labels = _read_labels(args.labels)
    model = _load_model(args.model) if args.model else None
    if model is not None:
        data = _apply_model_scaling(model, load_data(args.data, args.label_column, "off"))
    else:
        data = load_data(args.data, args.label_column, args.standardize)
    if labels.shape[0] != data.n:
        raise CLIError(f"{args.labels} has {labels.shape[0]} labels but the data has {data.n} points")
    truth = _read_labels(args.truth) if args.truth else data.labels
    if truth is not None and truth.shape[0] != data.n:
        raise CLIError("ground truth length does not match the data")
    n_labels = np.unique(labels).size
    if n_labels < 2:
        raise CLIError("silhouette is undefined: every point is in one cluster")
    doc = report(data, labels, truth)
    k = model.k if model is not None else int(labels.max()) + 1
    doc["cluster_sizes"] = cluster_sizes(labels, k).tolist()
    if n_labels == data.n:
        doc["note"] = "every cluster is a singleton; silhouette set to 0 by convention"
    if model is not None:
        prof = entropy_profile(data, model.protos, model.dynamics.beta, bins=args.bins)
        doc["entropy"] = {"mean": float(prof.entropies.mean()), "bin_edges": prof.bin_edges.tolist(),
                          "counts": prof.counts.tolist()}
    _emit(doc, args.out)
    return 0


# -- basin map ----------------------------------------------------------------

def cmd_basin_map(args) -> int:
    if args.model:
        model = _load_model(args.model)
        protos, dyn = model.protos, model.dynamics
        if args.beta is not None or args.steps is not None:
            dyn = DynamicsConfig(args.beta or dyn.beta, args.steps or dyn.steps, None, dyn.metric)
    elif args.memories is not None:
        protos = PrototypeSet(args.memories)
        dyn = DynamicsConfig(args.beta if args.beta is not None else 1.0, args.steps or 10)
    else:
        raise CLIError("give --model or --memories")
    grid = compute_basins(protos, dyn, args.bounds, tuple(args.resolution))
    prefix = Path(args.out)
    if prefix.parent != Path("."):
        prefix.parent.mkdir(parents=True, exist_ok=True)
    write_ppm(f"{prefix}.ppm", grid.basin_labels)
    write_ppm(f"{prefix}_voronoi.ppm", grid.voronoi_labels)
    write_grid_csv(f"{prefix}.csv", grid)
    write_memories_csv(f"{prefix}_memories.csv", grid.memories)
    print(json.dumps({"agreement": grid.agreement, "beta": dyn.beta, "steps": dyn.steps,
                      "bounds": list(grid.bounds), "resolution": list(grid.resolution)}))
    return 0


# -- synth --------------------------------------------------------------------

def cmd_synth(args) -> int:
    data = gen_elongated(args.n_per_cluster, args.clusters, args.seed, args.long_sd,
                         args.short_sd, args.spacing, args.stagger)
    write_csv(args.out, data.points, data.labels, header=data.feature_names)
    print(json.dumps({"out": args.out, "n": data.n, "d": data.d, "clusters": args.clusters}))
    return 0


# -- grid ---------------------------------------------------------------------

GRID_AXES = {"beta": float, "steps": int, "lr": float, "batch": int, "mask_prob": float}


def cmd_grid(args) -> int:
    base = _run_config(args)
    axes = {name: getattr(args, f"grid_{name}") for name in GRID_AXES if getattr(args, f"grid_{name}")}
    names = list(axes)
    combos = list(itertools.product(*axes.values())) or [()]
    out = open(args.table, "w", newline="", encoding="utf-8") if args.table else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(names + ["final_loss", "sc", "nmi", "ari", "clusters_used"])
        for combo in combos:
            cfg = replace(base, **dict(zip(names, combo)))
            _, data, assignment, rep = fit_run(cfg)
            m = report(data, assignment.labels, data.labels)
            writer.writerow(list(combo) + [rep.final_loss, m["sc"], m.get("nmi", ""), m.get("ari", ""),
                                           m["clusters_used"]])
            out.flush()
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


# -- baseline -----------------------------------------------------------------

def cmd_baseline(args) -> int:
    data = load_data(args.data, args.label_column, args.standardize)
    if args.k is None:
        key = dataset_key(args.data)
        if key is None:
            raise CLIError("number of clusters not given (--k)")
        args.k = PRESETS[key]["k"]
    if args.method == "lloyd":
        model = lloyd_kmeans(data, args.k, args.n_init, args.seed)
        labels, extra = model.labels, {"inertia": model.inertia, "n_init": model.n_init}
        centers = model.centers
    else:
        protos = soft_kmeans(data, args.k, SoftAssignConfig(args.gamma, args.epochs, args.lr, args.seed))
        centers = protos.memories
        diff = data.points[:, None, :] - centers[None]
        labels = np.argmin(np.einsum("nkd,nkd->nk", diff, diff), axis=1)
        extra = {"gamma": args.gamma}
    doc = {"method": args.method, **extra, **report(data, labels, data.labels),
           "cluster_sizes": cluster_sizes(labels, args.k).tolist(), "centers": centers.tolist()}
    if args.labels_out:
        _write_labels(args.labels_out, labels)
    _emit(doc, args.out)
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clam", description="Clustering with associative memories.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model; writes model.json, labels.csv, train_log.jsonl")
    _run_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="assign points with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-column")
    p.add_argument("--out", default="labels.csv")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="metrics JSON for a labelling")
    p.add_argument("--labels", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-column")
    p.add_argument("--truth", help="ground-truth labels CSV (default: labels in the data)")
    p.add_argument("--model", help="model file; enables the entropy histogram and its scaling")
    p.add_argument("--standardize", choices=["auto", "on", "off"], default="auto")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--out", help="also write the JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("basin-map", help="rasterize basins of attraction of 2-D memories")
    p.add_argument("--model")
    p.add_argument("--memories", type=_memories, help="literal memories 'x1,y1;x2,y2;...'")
    p.add_argument("--beta", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--resolution", type=int, nargs=2, default=[200, 200], metavar=("W", "H"))
    p.add_argument("--bounds", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    p.add_argument("--out", default="basins", help="output prefix")
    p.set_defaults(func=cmd_basin_map)

    p = sub.add_parser("synth", help="write the elongated-cluster synthetic dataset")
    p.add_argument("--clusters", type=int, choices=[2, 3], default=2)
    p.add_argument("--n-per-cluster", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--long-sd", type=float, default=3.0)
    p.add_argument("--short-sd", type=float, default=0.3)
    p.add_argument("--spacing", type=float, default=3.0)
    p.add_argument("--stagger", type=float, default=1.5)
    p.add_argument("--out", default="elongated.csv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("grid", help="train every combination of the listed values")
    _run_options(p)
    p.add_argument("--grid-beta", type=_floats, metavar="B1,B2,...")
    p.add_argument("--grid-steps", type=_ints, metavar="T1,T2,...")
    p.add_argument("--grid-lr", type=_floats)
    p.add_argument("--grid-batch", type=_ints)
    p.add_argument("--grid-mask-prob", type=_floats)
    p.add_argument("--table", help="CSV results file (default: stdout)")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("baseline", help="Lloyd's k-means or soft k-means")
    p.add_argument("--data", required=True)
    p.add_argument("--label-column")
    p.add_argument("--standardize", choices=["auto", "on", "off"], default="auto")
    p.add_argument("--k", type=int)
    p.add_argument("--method", choices=["lloyd", "soft"], default="lloyd")
    p.add_argument("--n-init", type=int, default=1000)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--labels-out")
    p.add_argument("--out")
    p.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with _thread_limit():
            return args.func(args)
    except (CLIError, ValueError, OSError, FloatingPointError) as exc:
        print(f"clam: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
