"""Command-line entry point: data generation, training, evaluation, and the
experiment harnesses (player sweep, ablation, sensitivity, graph export).

Exit codes: 0 success, 1 usage or IO failure, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, fields, replace

import numpy as np

from . import evaluation, training
from .data import PlantedWorld, generate_synthetic, load_dataset, save_dataset
from .errors import CapacityError, DatasetError, DimensionError, NumericalError
from .graph import export_dot

ABLATION_FLAGS = ("cgm", "ccr", "cil", "mpd", "rle")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_world(path) -> PlantedWorld:
    with open(path) as fh:
        return PlantedWorld.from_json(json.load(fh))


def _write(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def build_config(args) -> training.TrainConfig:
    cfg = training.TrainConfig()
    if getattr(args, "config", None):
        with open(args.config) as fh:
            raw = json.load(fh)
        known = {f.name for f in fields(training.TrainConfig)}
        bad = set(raw) - known
        if bad:
            raise DatasetError(f"unknown config keys: {sorted(bad)}")
        cfg = replace(cfg, **raw)
    overrides = {}
    for flag, name in (("seed", "seed"), ("epochs", "max_epochs"),
                       ("players", "n_players"), ("topk", "k_topk"),
                       ("warmup", "warmup_epochs"), ("m_envs", "m_envs"),
                       ("gamma", "gamma"), ("eta", "eta"),
                       ("gamma_r_peak", "gamma_r_t")):
        val = getattr(args, flag, None)
        if val is not None:
            overrides[name] = val
    if overrides:
        cfg = replace(cfg, **overrides)
    return apply_ablations(cfg, getattr(args, "ablate", None))


def apply_ablations(cfg: training.TrainConfig, flags) -> training.TrainConfig:
    """Map ablation flags onto config semantics (one flag set per run)."""
    if not flags:
        return cfg
    for flag in flags:
        if flag not in ABLATION_FLAGS:
            raise DatasetError(f"unknown ablation flag '{flag}'")
        if flag == "cgm":
            cfg = replace(cfg, lambda_graph=0.0, partition_source="cooccur")
        elif flag == "ccr":
            cfg = replace(cfg, lambda_rwd=0.0)
        elif flag == "cil":
            cfg = replace(cfg, lambda_inv=0.0, lambda_env=0.0, m_envs=1)
        elif flag == "mpd":
            cfg = replace(cfg, n_players=1)
        elif flag == "rle":
            cfg = replace(cfg, lambda_rare=0.0, uniform_alpha=True)
    return cfg


def _train_one(data_path, cfg, world_path=None, extra_env_paths=None):
    ds = load_dataset(data_path)
    planted = _load_world(world_path) if world_path else None
    extra = [load_dataset(p) for p in extra_env_paths] if extra_env_paths else None
    return training.train(ds, cfg, planted=planted, extra_envs=extra), ds


def cmd_gen(args) -> int:
    datasets, world = generate_synthetic(args.labels, args.dim, args.samples,
                                         args.envs, args.seed,
                                         edge_density=args.edge_density)
    os.makedirs(args.out, exist_ok=True)
    for env, ds in enumerate(datasets):
        save_dataset(ds, os.path.join(args.out, f"env{env}.jsonl"))
    with open(os.path.join(args.out, "world.json"), "w") as fh:
        json.dump(world.to_json(), fh, sort_keys=True)
    print(f"wrote {len(datasets)} environment datasets to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = build_config(args)
    result, _ = _train_one(args.data, cfg, args.world, args.extra_envs)
    training.save_run(args.out, result)
    if result.aborted:
        print("training aborted on numerical error; last checkpoint retained",
              file=sys.stderr)
        return 2
    print(f"model written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    model, _, partition, masks, graph, stats, _ = training.load_run(args.model)
    ds = load_dataset(args.data)
    if ds.d != model.d or ds.L != model.L:
        raise DimensionError("model/data dimension mismatch")
    ds_ood = load_dataset(args.ood) if args.ood else None
    planted = _load_world(args.world) if args.world else None
    p_list = [float(p) for p in args.rare_pcts.split(",")]
    report = evaluation.evaluate(model, partition, masks, ds, ds_ood, stats,
                                 p_list, learned_graph=graph, planted=planted)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
    _write(os.path.join(args.out, "report.csv"), report.to_csv())
    print(f"report written to {args.out}")
    return 0


def _eval_after_train(result, test_path, rare_pct):
    """mAP / rare-F1 for a finished run, on a test file when given."""
    if test_path:
        ds = load_dataset(test_path)
        union = result.masks.union() if result.masks else None
        probs = evaluation.predict_dataset(result.model, ds, union)
        return (evaluation.mean_average_precision(probs, ds.Y),
                evaluation.rare_f1(probs, ds.Y, result.stats, rare_pct))
    last = result.log[-1] if result.log else {"val_map": 0.0, "val_rare_f1": 0.0}
    return last["val_map"], last["val_rare_f1"]


def cmd_sweep_players(args) -> int:
    cfg0 = build_config(args)
    rows = ["n_players,map,rare_f1"]
    for N in [int(x) for x in args.ns.split(",")]:
        cfg = replace(cfg0, n_players=N)
        result, _ = _train_one(args.data, cfg, args.world)
        m, f1 = _eval_after_train(result, args.test, cfg.rare_pct)
        rows.append(f"{N},{m},{f1}")
    _write(args.out, "\n".join(rows) + "\n")
    print(f"sweep written to {args.out}")
    return 0


def cmd_ablate(args) -> int:
    cfg0 = build_config(args)
    variants = [("full", None)]
    only = args.only.split(",") if args.only else list(ABLATION_FLAGS)
    variants += [(f"w/o {f.upper()}", f) for f in only]
    rows = ["variant,map,rare_f1"]
    for name, flag in variants:
        cfg = apply_ablations(cfg0, [flag] if flag else None)
        result, _ = _train_one(args.data, cfg, args.world)
        m, f1 = _eval_after_train(result, args.test, cfg.rare_pct)
        rows.append(f"{name},{m},{f1}")
    _write(args.out, "\n".join(rows) + "\n")
    print(f"ablation table written to {args.out}")
    return 0


SENSITIVITY_GRID = {
    "gamma": [0.2, 0.5, 0.8],
    "eta": [1.0, 1.5, 2.0, 2.5],
    "gamma_r": [0.5, 1.0, 1.5],
    "m_envs": [1, 3, 5],
}


def cmd_sensitivity(args) -> int:
    cfg0 = build_config(args)
    if args.param not in SENSITIVITY_GRID:
        raise DatasetError(f"unknown sensitivity parameter '{args.param}'")
    values = ([float(v) for v in args.values.split(",")] if args.values
              else SENSITIVITY_GRID[args.param])
    rows = [f"{args.param},map,rare_f1"]
    for v in values:
        if args.param == "m_envs":
            cfg = replace(cfg0, m_envs=int(v))
        elif args.param == "gamma_r":
            cfg = replace(cfg0, gamma_r_t=v)
        else:
            cfg = replace(cfg0, **{args.param: v})
        result, _ = _train_one(args.data, cfg, args.world)
        m, f1 = _eval_after_train(result, args.test, cfg.rare_pct)
        rows.append(f"{v},{m},{f1}")
    _write(args.out, "\n".join(rows) + "\n")
    print(f"sensitivity sweep written to {args.out}")
    return 0


def cmd_export_graph(args) -> int:
    _, _, _, _, graph, _, _ = training.load_run(args.model)
    if graph is None:
        raise DatasetError("run directory has no graph.json")
    names = None
    if args.names:
        names = args.names.split(",")
    _write(args.out, export_dot(graph, names))
    print(f"DOT graph written to {args.out}")
    return 0


def _add_train_opts(p, with_ablate=True):
    p.add_argument("--config", help="flat JSON config (TrainConfig fields)")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--players", type=int)
    p.add_argument("--topk", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--m-envs", dest="m_envs", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--gamma-r-peak", dest="gamma_r_peak", type=float)
    p.add_argument("--world", help="planted-world JSON for env-view generation")
    if with_ablate:
        p.add_argument("--ablate", action="append",
                       help=f"ablation flag, one of {ABLATION_FLAGS}")


def make_parser() -> _Parser:
    parser = _Parser(prog="ccg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic planted-world benchmark")
    p.add_argument("--labels", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--envs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--edge-density", dest="edge_density", type=float, default=0.15)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", required=True)
    p.add_argument("--extra-envs", dest="extra_envs", nargs="*")
    p.add_argument("--out", required=True)
    _add_train_opts(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--ood")
    p.add_argument("--world")
    p.add_argument("--rare-pcts", dest="rare_pcts", default="20,30,40,50")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-players", help="train/eval over player counts")
    p.add_argument("--data", required=True)
    p.add_argument("--test")
    p.add_argument("--ns", default="1,2,3,4,5,6,8,10")
    p.add_argument("--out", required=True)
    _add_train_opts(p, with_ablate=False)
    p.set_defaults(func=cmd_sweep_players)

    p = sub.add_parser("ablate", help="one-at-a-time component ablations")
    p.add_argument("--data", required=True)
    p.add_argument("--test")
    p.add_argument("--only", help="comma list of flags to ablate")
    p.add_argument("--out", required=True)
    _add_train_opts(p, with_ablate=False)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sensitivity", help="single-hyperparameter sweep")
    p.add_argument("--data", required=True)
    p.add_argument("--test")
    p.add_argument("--param", required=True,
                   choices=sorted(SENSITIVITY_GRID))
    p.add_argument("--values")
    p.add_argument("--out", required=True)
    _add_train_opts(p, with_ablate=False)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("export-graph", help="export the learned graph as DOT")
    p.add_argument("--model", required=True)
    p.add_argument("--names", help="comma-separated label names")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_graph)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, CapacityError, DimensionError, FileNotFoundError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
