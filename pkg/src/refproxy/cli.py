"""Command-line entry point: ``refproxy <command> [options]``.

Settings come from built-in defaults, then an optional JSON ``--config``
file, then explicit flags (flags win).  Every command writes the merged
settings to ``effective_config.json`` in its output directory.

Exit codes: 0 success, 1 runtime or numeric failure, 2 bad configuration or input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation as ev
from . import tree as tr
from .canonical import atomic_write_text, canonical_json, write_json
from .data import CLASSIFICATION, REGRESSION, DataError, SplitSpec, load_bundled, load_csv, split, synth_smooth_1d
from .projection import NeighborhoodSpec, explain_global, explain_local
from .reference import EnsembleConfig, GpConfig, fit_reference, reference_from_dict

OUT_ENV = "REFPROXY_OUT"

DEFAULTS = {
    "data": None,  # CSV path
    "bundled": None,  # "diabetes" | "wine"
    "synthetic_n": None,  # smooth 1-d generator size
    "noise_sd": 0.1,
    "target": None,
    "task": REGRESSION,
    "train_fraction": 0.75,
    "seed": 0,
    "reference": "gp",
    "kernel": "matern52",
    "n_trees": 100,
    "cv_folds": 5,
    "min_leaf": 5,
    "max_depth": None,
    "size": None,
    "cv": False,
    "folds": 5,
    "mode": "global",
    "center_row": None,
    "center": None,
    "nb_sd": 1.0,
    "nb_samples": 200,
    "sizes": [2, 4, 8, 16],
    "runs": 20,
    "B": 10,
    "reuse_reference": False,
    "test_points": None,
    "level": 0.95,
    "resamples": 2000,
    "model": None,
    "explanation": None,
    "jobs": 1,
    "out": None,
}


class ConfigError(ValueError):
    """Inconsistent or missing settings."""


# -------------------------------------------------------------- settings


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common(p: argparse.ArgumentParser, data=True, reference=False, proxy=False):
    p.add_argument("--config", help="JSON file with settings; flags override it")
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./refproxy_out)")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    if data:
        g = p.add_argument_group("data")
        g.add_argument("--data", help="CSV file")
        g.add_argument("--bundled", choices=["diabetes", "wine"])
        g.add_argument("--synthetic-n", type=int, help="use the smooth 1-d generator with this many rows")
        g.add_argument("--noise-sd", type=float)
        g.add_argument("--target", help="target column of --data")
        g.add_argument("--task", choices=[REGRESSION, CLASSIFICATION])
        g.add_argument("--train-fraction", type=float)
    if reference:
        g = p.add_argument_group("reference model")
        g.add_argument("--reference", choices=["gp", "ensemble"])
        g.add_argument("--kernel", choices=["matern52", "rbf"])
        g.add_argument("--n-trees", type=int)
        g.add_argument("--cv-folds", type=int, help="folds for GP hyperparameter search")
    if proxy:
        g = p.add_argument_group("proxy tree")
        g.add_argument("--min-leaf", type=int)
        g.add_argument("--max-depth", type=int)
        g.add_argument("--folds", type=int, help="folds for pruning-strength selection")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="refproxy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-reference", help="fit and save a reference model")
    _common(p, reference=True)

    p = sub.add_parser("explain", help="global or local tree explanation of a saved model")
    _common(p, proxy=True)
    p.add_argument("--model", help="model.json written by fit-reference")
    p.add_argument("--mode", choices=["global", "local"])
    size = p.add_mutually_exclusive_group()
    size.add_argument("--size", type=int, help="fixed number of leaves")
    size.add_argument("--cv", action="store_true", default=None, help="choose the size by cross-validation")
    center = p.add_mutually_exclusive_group()
    center.add_argument("--center-row", type=int, help="row of the test split to explain")
    center.add_argument("--center", type=_float_list, help='explicit point "v1,v2,..."')
    p.add_argument("--nb-sd", type=float)
    p.add_argument("--nb-samples", type=int)

    p = sub.add_parser("sweep", help="test RMSE of projected vs directly fit trees across sizes")
    _common(p, reference=True, proxy=True)
    p.add_argument("--sizes", type=_int_list)
    p.add_argument("--runs", type=int)
    p.add_argument("--level", type=float)
    p.add_argument("--resamples", type=int)

    p = sub.add_parser("stability", help="bootstrap dissimilarity of projected vs directly fit trees")
    _common(p, reference=True, proxy=True)
    p.add_argument("--B", type=int, dest="B")
    p.add_argument("--size", type=int)
    p.add_argument("--reuse-reference", action="store_true", default=None)

    p = sub.add_parser("fidelity", help="local fidelity of projected vs nearby-data trees")
    _common(p, proxy=True)
    p.add_argument("--model", help="model.json written by fit-reference")
    p.add_argument("--size", type=int)
    p.add_argument("--nb-sd", type=float)
    p.add_argument("--nb-samples", type=int)
    p.add_argument("--test-points", type=int, help="use only the first N test rows")
    p.add_argument("--level", type=float)
    p.add_argument("--resamples", type=int)

    p = sub.add_parser("export-dot", help="write the tree of an explanation as Graphviz DOT")
    _common(p, data=False)
    p.add_argument("--explanation", help="explanation.json written by explain")
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(loaded)
    for key, val in vars(args).items():
        if key in DEFAULTS and val is not None:
            cfg[key] = val
    if cfg["out"] is None:
        cfg["out"] = os.environ.get(OUT_ENV, "refproxy_out")
    if cfg["jobs"] < 1:
        raise ConfigError("--jobs must be >= 1")
    return cfg


# ------------------------------------------------------------- helpers


def _load_dataset(cfg: dict):
    sources = [k for k in ("data", "bundled", "synthetic_n") if cfg[k] is not None]
    if len(sources) != 1:
        raise ConfigError("specify exactly one of --data, --bundled, --synthetic-n")
    if cfg["bundled"]:
        return load_bundled(cfg["bundled"])
    if cfg["synthetic_n"] is not None:
        return synth_smooth_1d(cfg["synthetic_n"], cfg["noise_sd"], cfg["seed"])[0]
    if not cfg["target"]:
        raise ConfigError("--data needs --target")
    return load_csv(cfg["data"], cfg["target"], cfg["task"])


def _reference_cfg(cfg: dict, seed: int):
    if cfg["reference"] == "gp":
        return GpConfig(kernel=cfg["kernel"], cv_folds=cfg["cv_folds"], seed=seed)
    if cfg["reference"] == "ensemble":
        return EnsembleConfig(n_trees=cfg["n_trees"], min_leaf=cfg["min_leaf"], bootstrap_seed=seed)
    raise ConfigError(f"unknown reference kind {cfg['reference']!r}")


def _grow_cfg(cfg: dict, local: bool = False) -> tr.GrowConfig:
    depth = cfg["max_depth"] if cfg["max_depth"] is not None else (3 if local else None)
    return tr.GrowConfig(min_leaf=cfg["min_leaf"], max_depth=depth)


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "effective_config.json", cfg)
    return out


def _score(model, ds) -> dict:
    if ds.n == 0:
        return {}
    s = model.predict_summary(ds.features)
    if ds.task == REGRESSION:
        return {"rmse": ev.rmse(s.means, ds.target)}
    return {"accuracy": float(np.mean(np.argmax(s.class_probs, axis=1) + 1 == ds.target))}


def _load_model(cfg: dict):
    if not cfg["model"]:
        raise ConfigError("--model is required")
    path = Path(cfg["model"])
    if not path.is_file():
        raise ConfigError(f"model file not found: {path}")
    bundle = json.loads(path.read_text())
    if bundle.get("schema") != "refproxy.model_bundle":
        raise ConfigError(f"{path} is not a model file written by fit-reference")
    return bundle, reference_from_dict(bundle["reference"])


def _bundle_split(cfg: dict, bundle: dict):
    """Rebuild the train/test split the model was fitted on."""
    data_cfg = dict(cfg)
    data_cfg.update(bundle["data"])
    ds = _load_dataset(data_cfg)
    return ds, *split(ds, SplitSpec(bundle["data"]["train_fraction"], bundle["data"]["seed"]))


# ------------------------------------------------------------- commands


def cmd_fit_reference(cfg: dict) -> Path:
    ds = _load_dataset(cfg)
    train, test = split(ds, SplitSpec(cfg["train_fraction"], cfg["seed"]))
    model = fit_reference(train, _reference_cfg(cfg, cfg["seed"]))
    out = _out_dir(cfg)
    data_keys = ("data", "bundled", "synthetic_n", "noise_sd", "target", "task", "train_fraction", "seed")
    bundle = {"schema": "refproxy.model_bundle", "data": {k: cfg[k] for k in data_keys},
              "feature_names": list(ds.feature_names), "label_mapping": ds.label_mapping,
              "reference": model.to_dict()}
    write_json(out / "model.json", bundle)
    ref = model.to_dict()
    hyper = {k: ref[k] for k in ("kernel", "variance", "lengthscale", "noise", "cv_mse") if k in ref}
    if ref["kind"] == "ensemble":
        hyper = {"n_trees": len(ref["trees"])}
    report = {"kind": ref["kind"], "task": ds.task, "n_train": train.n, "n_test": test.n,
              "hyperparameters": hyper, "train": _score(model, train), "test": _score(model, test),
              "fingerprint": model.fingerprint()}
    write_json(out / "fit_report.json", report)
    return out


def cmd_explain(cfg: dict) -> Path:
    bundle, model = _load_model(cfg)
    ds, train, test = _bundle_split(cfg, bundle)
    size = None if cfg["cv"] else cfg["size"]
    if size is None and not cfg["cv"]:
        raise ConfigError("explain needs --size N or --cv")
    if cfg["mode"] == "global":
        report = explain_global(model, train, size, _grow_cfg(cfg), cfg["folds"], cfg["seed"])
    elif cfg["mode"] == "local":
        if cfg["center"] is not None:
            center = np.asarray(cfg["center"], dtype=float)
            if center.size != ds.d:
                raise ConfigError(f"--center has {center.size} values, data has {ds.d} features")
        elif cfg["center_row"] is not None:
            if not 0 <= cfg["center_row"] < test.n:
                raise ConfigError(f"--center-row must lie in 0..{test.n - 1}")
            center = test.features[cfg["center_row"]]
        else:
            raise ConfigError("local mode needs --center-row or --center")
        nb = NeighborhoodSpec(center, cfg["nb_sd"], cfg["nb_samples"], cfg["seed"])
        report = explain_local(model, nb, size, _grow_cfg(cfg, local=True), cfg["folds"], ds.feature_names)
    else:
        raise ConfigError(f"unknown mode {cfg['mode']!r}")
    out = _out_dir(cfg)
    write_json(out / "explanation.json", report.to_dict())
    atomic_write_text(out / "tree.dot", tr.to_dot(report.proxy))
    return out


def cmd_sweep(cfg: dict) -> Path:
    ds = _load_dataset(cfg)
    res = ev.sweep(ds, _reference_cfg(cfg, cfg["seed"]), cfg["sizes"], cfg["runs"], cfg["seed"],
                   _grow_cfg(cfg), cfg["train_fraction"], cfg["jobs"])
    out = _out_dir(cfg)
    rows = res.rows(cfg["level"], cfg["resamples"], cfg["seed"])
    atomic_write_text(out / "sweep.csv", ev.rows_to_csv(rows))
    runs = [{"run": r, "seed": s, "size": b, "utility": res.utility[r, j], "prior": res.prior[r, j],
             "reference": res.reference[r]}
            for r, s in enumerate(res.seeds) for j, b in enumerate(res.sizes)]
    atomic_write_text(out / "sweep_runs.csv", ev.rows_to_csv(runs))
    write_json(out / "sweep_summary.json", {"runs": res.runs, "seeds": res.seeds, "sizes": res.sizes,
                                            "per_size": rows})
    return out


def cmd_stability(cfg: dict) -> Path:
    ds = _load_dataset(cfg)
    scfg = ev.StabilityConfig(grow=_grow_cfg(cfg), size=cfg["size"], reference=_reference_cfg(cfg, cfg["seed"]),
                              reuse_reference=bool(cfg["reuse_reference"]), folds=cfg["folds"])
    prior = ev.stability("prior", ds, scfg, cfg["B"], cfg["seed"], cfg["jobs"])
    util = ev.stability("utility", ds, scfg, cfg["B"], cfg["seed"], cfg["jobs"])
    out = _out_dir(cfg)
    rows = [{"i": i, "j": j, "d_prior": dp, "d_utility": du}
            for (i, j), dp, du in zip(prior.pairs, prior.pairwise_d, util.pairwise_d)]
    atomic_write_text(out / "stability_pairs.csv", ev.rows_to_csv(rows))
    write_json(out / "stability_summary.json", {
        "B": cfg["B"], "pairs": len(rows), "dissimilarity": "symmetrised, internal-node weighting",
        "prior": {"mean": prior.mean, "sd": prior.sd, "sizes": [t.n_leaves for t in prior.trees]},
        "utility": {"mean": util.mean, "sd": util.sd, "sizes": [t.n_leaves for t in util.trees]},
    })
    return out


def cmd_fidelity(cfg: dict) -> Path:
    bundle, model = _load_model(cfg)
    if model.task != REGRESSION:
        raise ConfigError("fidelity needs a regression model")
    _, train, test = _bundle_split(cfg, bundle)
    points = test.features if cfg["test_points"] is None else test.features[: cfg["test_points"]]
    if len(points) < 1:
        raise ConfigError("no test points; lower --train-fraction when fitting")
    nb = NeighborhoodSpec(np.zeros(train.d), cfg["nb_sd"], cfg["nb_samples"], cfg["seed"])
    cmp = ev.compare_local_fidelity(model, train, points, nb, cfg["size"], _grow_cfg(cfg, local=True), cfg["folds"])
    rows = [{"row": i, "kind": "point", "utility": u, "direct": d, "size": int(b)}
            for i, (u, d, b) in enumerate(zip(cmp.utility, cmp.direct, cmp.sizes))]
    rows.append({"row": "", "kind": "mean", "utility": float(cmp.utility.mean()),
                 "direct": float(cmp.direct.mean()), "size": ""})
    out = _out_dir(cfg)
    atomic_write_text(out / "fidelity.csv", ev.rows_to_csv(rows))
    summary = {"n_points": len(points), "utility_mean": float(cmp.utility.mean()),
               "direct_mean": float(cmp.direct.mean())}
    if len(points) >= 2:
        diff, lo, hi = ev.paired_bootstrap_ci(cmp.direct, cmp.utility, cfg["level"], cfg["resamples"], cfg["seed"])
        summary.update(diff_direct_minus_utility=diff, ci_lo=lo, ci_hi=hi, significant=bool(lo > 0 or hi < 0))
    write_json(out / "fidelity_summary.json", summary)
    return out


def cmd_export_dot(cfg: dict) -> Path:
    if not cfg["explanation"]:
        raise ConfigError("--explanation is required")
    path = Path(cfg["explanation"])
    if not path.is_file():
        raise ConfigError(f"explanation file not found: {path}")
    doc = json.loads(path.read_text())
    if doc.get("proxy", {}).get("schema") != "refproxy.tree":
        raise ConfigError(f"{path} does not contain a tree proxy")
    out = _out_dir(cfg)
    atomic_write_text(out / "tree.dot", tr.to_dot(tr.tree_from_dict(doc["proxy"])))
    return out


COMMANDS = {
    "fit-reference": cmd_fit_reference,
    "explain": cmd_explain,
    "sweep": cmd_sweep,
    "stability": cmd_stability,
    "fidelity": cmd_fidelity,
    "export-dot": cmd_export_dot,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = resolve_settings(args)
        out = COMMANDS[args.command](cfg)
    except (ConfigError, DataError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"refproxy {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # numeric or fitting failure
        print(f"refproxy {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(canonical_json({"command": args.command, "out": str(out)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
