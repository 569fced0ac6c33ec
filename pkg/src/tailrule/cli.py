"""Experiment runner and command-line interface.

Subcommands:
  simulate   run a replicated scenario x method study, write reports
  fit        fit one method to a CSV, persist the model, report held-out metrics
  evaluate   score a persisted model on a CSV under the package criteria
  tune       cross-validate a method's grid on a CSV, write the CV table
  version    print package version and kernel backend

Config files are YAML (JSON works too); every key has a default and unknown
keys are rejected. Flags override config keys. All randomness flows from one
master seed through per-replication streams, so enlarging the replication
count never perturbs earlier replications, and every output file embeds the
package version, the config hash, and the master seed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from ._kernels import BACKEND
from .criteria import evaluate_m0, evaluate_m1, evaluate_quantile, evaluate_value
from .data import CsvSchema, RandomSource, TrialDataset, load_csv
from .dca import DcaConfig, dca_fit
from .errors import SchemaError
from .models import load_model, model_to_dict, save_model
from .pls import pls_fit
from .simlab import (
    EvaluationReport,
    ScenarioSpec,
    delta_function,
    generate,
    misclassification,
    value_metrics,
)
from .tuning import cv_select, default_bandwidth_grid, default_lambda_grid

# Stream slots per replication; methods share them so replications stay
# paired across methods.
_SLOT_DATA = 0
_SLOT_FOLDS = 1
_SLOT_FIT = 2
_SLOT_MIS = 3
_SLOT_VALUE = 4
_STRIDE = 8

_METHODS = {
    "l1-dc-cvar": {"kind": "dc", "form": "linear", "penalty": "l1"},
    "l2-dc-cvar": {"kind": "dc", "form": "linear", "penalty": "l2"},
    "gk-dc-cvar": {"kind": "dc", "form": "kernel", "penalty": "rkhs"},
    "l1-pls": {"kind": "pls"},
}

_DC_METHOD_DEFAULTS = {
    "name": None,
    "label": None,
    "criterion": "m0",
    "tune": True,
    "cv_folds": 10,
    "lam": None,
    "lambda_grid": None,
    "bandwidth": None,
    "bandwidth_grid": None,
    "delta": 1.0,
    "epsilon": None,
    "kappa": 1e-6,
    "max_iter": 200,
    "inner_tol": 1e-8,
    "inner_max_iter": 2000,
}

_PLS_METHOD_DEFAULTS = {
    "name": None,
    "label": None,
    "tune": True,
    "cv_folds": 10,
    "lam": None,
    "lambda_grid": None,
    "cd_tol": 1e-8,
    "max_sweeps": 10000,
}

DEFAULT_CONFIG = {
    "seed": 0,
    "outdir": "out",
    "reps": 50,
    "jobs": 1,
    "scenario": {
        "id": "s1",
        "n": 200,
        "p": 20,
        "gamma": 0.5,
        "n_test": 10000,
    },
    "evaluation": {
        "quantiles": [0.5, 0.25],
    },
    "methods": [{"name": "l1-dc-cvar"}, {"name": "l1-pls"}],
}


# -- config handling ----------------------------------------------------------


def _check_unknown(user: dict, defaults: dict, path: str) -> None:
    for key in user:
        if key not in defaults:
            raise SchemaError(f"unknown config key {path}{key!r}")


def _merge_section(user: dict, defaults: dict, path: str) -> dict:
    if not isinstance(user, dict):
        raise SchemaError(f"config section {path or 'top level'} must be a mapping")
    _check_unknown(user, defaults, path)
    out = dict(defaults)
    out.update(user)
    return out


def _resolve_method(entry: dict, index: int) -> dict:
    path = f"methods[{index}]."
    if not isinstance(entry, dict) or "name" not in entry:
        raise SchemaError(f"methods[{index}] must be a mapping with a 'name'")
    name = entry["name"]
    if name not in _METHODS:
        raise SchemaError(
            f"{path}name: unknown method {name!r}; known: {', '.join(sorted(_METHODS))}"
        )
    kind = _METHODS[name]["kind"]
    defaults = _DC_METHOD_DEFAULTS if kind == "dc" else _PLS_METHOD_DEFAULTS
    merged = _merge_section(entry, defaults, path)
    if merged["label"] is None:
        merged["label"] = name
    if kind == "dc" and merged["criterion"] not in ("m0", "m1"):
        raise SchemaError(f"{path}criterion: must be 'm0' or 'm1', got {merged['criterion']!r}")
    if not merged["tune"] and merged["lam"] is None:
        raise SchemaError(f"{path}lam: required when tune is false")
    if merged["tune"] and merged["cv_folds"] < 2:
        raise SchemaError(f"{path}cv_folds: need at least 2 folds")
    if name != "gk-dc-cvar" and kind == "dc":
        for k in ("bandwidth", "bandwidth_grid"):
            if merged[k] is not None:
                raise SchemaError(f"{path}{k}: only meaningful for gk-dc-cvar")
    return merged


def resolve_config(user: Optional[dict]) -> dict:
    """Fill defaults, reject unknown keys, normalize method entries."""
    user = user or {}
    cfg = _merge_section(user, DEFAULT_CONFIG, "")
    cfg["scenario"] = _merge_section(user.get("scenario", {}), DEFAULT_CONFIG["scenario"], "scenario.")
    cfg["evaluation"] = _merge_section(
        user.get("evaluation", {}), DEFAULT_CONFIG["evaluation"], "evaluation."
    )
    methods = cfg["methods"]
    if not isinstance(methods, list) or not methods:
        raise SchemaError("methods must be a non-empty list")
    cfg["methods"] = [_resolve_method(m, i) for i, m in enumerate(methods)]
    labels = [m["label"] for m in cfg["methods"]]
    if len(set(labels)) != len(labels):
        raise SchemaError("method labels must be unique; set 'label' on duplicates")
    if not isinstance(cfg["reps"], int) or cfg["reps"] < 1:
        raise SchemaError("reps must be a positive integer")
    if not isinstance(cfg["jobs"], int) or cfg["jobs"] < 1:
        raise SchemaError("jobs must be a positive integer")
    if not isinstance(cfg["seed"], int):
        raise SchemaError("seed must be an integer")
    quant = cfg["evaluation"]["quantiles"]
    if not isinstance(quant, (list, tuple)) or not quant or not all(
        isinstance(q, (int, float)) and 0.0 < q < 1.0 for q in quant
    ):
        raise SchemaError("evaluation.quantiles must be a non-empty list of levels in (0, 1)")
    cfg["evaluation"]["quantiles"] = [float(q) for q in quant]
    # Fail fast on a bad scenario block.
    _scenario_from(cfg)
    return cfg


def _scenario_from(cfg: dict) -> ScenarioSpec:
    sc = cfg["scenario"]
    try:
        return ScenarioSpec(id=sc["id"], n=sc["n"], p=sc["p"], gamma=sc["gamma"])
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"scenario: {exc}") from None


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _provenance(cfg: dict) -> dict:
    return {
        "package_version": __version__,
        "config_hash": config_hash(cfg),
        "master_seed": cfg["seed"],
    }


# -- method adapters -----------------------------------------------------------


@dataclass(frozen=True)
class PlsCandidate:
    lam: float
    cd_tol: float = 1e-8
    max_sweeps: int = 10000
    bandwidth: Optional[float] = None  # keeps the tuning tie-break uniform


def _dc_config(mcfg: dict, gamma: float, lam: float, bandwidth) -> DcaConfig:
    shape = _METHODS[mcfg["name"]]
    return DcaConfig(
        gamma=gamma,
        lam=float(lam),
        penalty=shape["penalty"],
        form=shape["form"],
        bandwidth=bandwidth,
        criterion=mcfg["criterion"],
        delta=mcfg["delta"],
        epsilon=mcfg["epsilon"],
        kappa=mcfg["kappa"],
        max_iter=mcfg["max_iter"],
        inner_tol=mcfg["inner_tol"],
        inner_max_iter=mcfg["inner_max_iter"],
    )


def _candidates(mcfg: dict, gamma: float, data: TrialDataset):
    kind = _METHODS[mcfg["name"]]["kind"]
    if mcfg["tune"]:
        lam_grid = mcfg["lambda_grid"] if mcfg["lambda_grid"] else [float(v) for v in default_lambda_grid()]
    else:
        lam_grid = [mcfg["lam"]]
    if kind == "pls":
        return [PlsCandidate(lam=float(l), cd_tol=mcfg["cd_tol"], max_sweeps=mcfg["max_sweeps"]) for l in lam_grid]
    if mcfg["name"] == "gk-dc-cvar":
        if mcfg["bandwidth"] is not None:
            bw_grid = [mcfg["bandwidth"]]
        elif mcfg["bandwidth_grid"]:
            bw_grid = [float(b) for b in mcfg["bandwidth_grid"]]
        else:
            bw_grid = [float(b) for b in default_bandwidth_grid(data.X)]
        if not mcfg["tune"]:
            bw_grid = bw_grid[:1] if mcfg["bandwidth"] is not None else [None]
    else:
        bw_grid = [None]
    return [
        _dc_config(mcfg, gamma, lam, bw) for lam in lam_grid for bw in bw_grid
    ]


def _fit_candidate(train: TrialDataset, cand, rng: RandomSource):
    if isinstance(cand, PlsCandidate):
        return pls_fit(train, cand.lam, tol=cand.cd_tol, max_sweeps=cand.max_sweeps)
    model, _state = dca_fit(train, cand, rng)
    return model


def _fit_final(data: TrialDataset, cand, rng: RandomSource):
    """Full-data fit returning (rule, fit metadata, trace rows)."""
    if isinstance(cand, PlsCandidate):
        model = pls_fit(data, cand.lam, tol=cand.cd_tol, max_sweeps=cand.max_sweeps)
        meta = {
            "lam": model.lam,
            "converged": model.converged,
            "sweeps": model.sweeps,
        }
        trace = [{"sweeps": model.sweeps, "converged": model.converged}]
        return model, meta, trace
    model, state = dca_fit(data, cand, rng)
    meta = {
        "lam": cand.lam,
        "bandwidth": model.bandwidth,
        "criterion": cand.criterion,
        "converged": state.converged,
        "degenerate": state.degenerate,
        "iterations": state.iterations,
    }
    trace = [
        {
            "iteration": i + 1,
            "knot": int(state.knot_trace[i]),
            "objective": state.objective_trace[i + 1],
            "inner_iterations": int(state.inner_iterations[i]),
            "inner_converged": bool(state.inner_converged[i]),
        }
        for i in range(state.iterations)
    ]
    trace.insert(0, {"iteration": 0, "objective": state.objective_trace[0]})
    return model, meta, trace


def _tune_criterion(mcfg: dict) -> str:
    # Every method scores validation folds with the tail criterion, the
    # baseline included, so grid winners are comparable across methods.
    return "m0"


def run_replication(cfg: dict, mcfg: dict, rep: int):
    """One (method, replication) cell. Returns (row dict, trace rows)."""
    spec = _scenario_from(cfg)
    seed = cfg["seed"]
    n_test = cfg["scenario"]["n_test"]
    quantiles = cfg["evaluation"]["quantiles"]
    base = rep * _STRIDE

    trial = generate(spec, RandomSource(seed, base + _SLOT_DATA))
    data = trial.dataset
    cands = _candidates(mcfg, spec.gamma, data)
    selected = cands[0]
    if mcfg["tune"] and len(cands) > 1:
        selected, _table = cv_select(
            data,
            cands,
            mcfg["cv_folds"],
            _tune_criterion(mcfg),
            RandomSource(seed, base + _SLOT_FOLDS),
            _fit_candidate,
            gamma=spec.gamma,
        )
    rule, meta, trace = _fit_final(data, selected, RandomSource(seed, base + _SLOT_FIT))

    if delta_function(spec) is not None:
        mis = misclassification(rule, spec, n_test, RandomSource(seed, base + _SLOT_MIS))
    else:
        mis = None
    vm = value_metrics(rule, spec, n_test, RandomSource(seed, base + _SLOT_VALUE), quantiles)
    row = {
        "rep": rep,
        "misclass": mis,
        "value_mean": vm.mean,
        "quantiles": vm.quantiles,
        "fit": meta,
    }
    return row, trace


def _replication_task(args):
    cfg, mcfg, rep = args
    try:
        row, trace = run_replication(cfg, mcfg, rep)
        return rep, row, trace, None
    except Exception as exc:  # recorded per-replication, run continues
        return rep, None, None, f"{type(exc).__name__}: {exc}"


# -- reporting -----------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _quantile_col(level: float) -> str:
    pct = level * 100.0
    return f"q{pct:g}_mean".replace(".", "_")


def _write_summary(path: Path, cfg: dict, results: list) -> None:
    prov = _provenance(cfg)
    quantiles = cfg["evaluation"]["quantiles"]
    cols = (
        ["scenario", "method", "misclass_mean", "misclass_sd", "value_mean"]
        + [_quantile_col(q) for q in quantiles]
        + ["reps_completed"]
    )
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# tailrule {prov['package_version']} config={prov['config_hash']} "
            f"seed={prov['master_seed']}\n"
        )
        writer = csv.writer(fh)
        writer.writerow(cols)
        for res in results:
            rep_report = res["report"]
            writer.writerow(
                [
                    cfg["scenario"]["id"],
                    res["method"],
                    _fmt(rep_report.misclass_mean),
                    _fmt(rep_report.misclass_sd),
                    _fmt(rep_report.value_mean),
                ]
                + [_fmt(rep_report.quantile_means.get(q)) for q in quantiles]
                + [rep_report.reps]
            )


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def run_experiment(config: Optional[dict], outdir: Optional[str] = None) -> int:
    """Execute the replicated study described by `config`.

    Writes <outdir>/summary.csv, detail.json, and traces/*.jsonl. Returns the
    process exit code: 0 when every replication of every method completed.
    """
    cfg = resolve_config(config)
    out = Path(outdir if outdir is not None else cfg["outdir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "traces").mkdir(exist_ok=True)
    prov = _provenance(cfg)
    scenario_id = cfg["scenario"]["id"]

    t0 = time.time()
    results = []
    any_failure = False
    for mcfg in cfg["methods"]:
        tasks = [(cfg, mcfg, rep) for rep in range(cfg["reps"])]
        if cfg["jobs"] > 1:
            with ProcessPoolExecutor(max_workers=cfg["jobs"]) as pool:
                outcomes = list(pool.map(_replication_task, tasks))
        else:
            outcomes = [_replication_task(t) for t in tasks]
        outcomes.sort(key=lambda o: o[0])

        rows, errors = [], []
        for rep, row, trace, err in outcomes:
            run_id = f"{scenario_id}-{mcfg['label']}-rep{rep:03d}"
            if err is not None:
                errors.append({"rep": rep, "error": err})
                continue
            rows.append(row)
            with open(out / "traces" / f"{run_id}.jsonl", "w") as fh:
                head = dict(prov)
                head.update({"scenario": scenario_id, "method": mcfg["label"], "rep": rep})
                fh.write(json.dumps(_jsonable(head), sort_keys=True) + "\n")
                for entry in trace:
                    fh.write(json.dumps(_jsonable(entry), sort_keys=True) + "\n")
        if not rows:
            any_failure = True
            results.append(
                {
                    "method": mcfg["label"],
                    "report": None,
                    "rows": rows,
                    "errors": errors,
                    "completeness": 0.0,
                }
            )
            continue
        report = EvaluationReport.aggregate(rows)
        if errors:
            any_failure = True
        results.append(
            {
                "method": mcfg["label"],
                "report": report,
                "rows": rows,
                "errors": errors,
                "completeness": len(rows) / cfg["reps"],
            }
        )
        print(
            f"[{scenario_id}/{mcfg['label']}] {len(rows)}/{cfg['reps']} replications, "
            f"value_mean={report.value_mean:.4f}"
            + (f", misclass={report.misclass_mean:.4f}" if report.misclass_mean is not None else "")
            + f", elapsed {time.time() - t0:.1f}s",
            file=sys.stderr,
        )

    _write_summary(out / "summary.csv", cfg, [r for r in results if r["report"] is not None])
    detail = {
        **prov,
        "config": cfg,
        "results": [
            {
                "scenario": scenario_id,
                "method": r["method"],
                "completeness": r["completeness"],
                "aggregate": None
                if r["report"] is None
                else {
                    "misclass_mean": r["report"].misclass_mean,
                    "misclass_sd": r["report"].misclass_sd,
                    "value_mean": r["report"].value_mean,
                    "quantile_means": r["report"].quantile_means,
                    "reps": r["report"].reps,
                },
                "replications": r["rows"],
                "errors": r["errors"],
            }
            for r in results
        ],
    }
    with open(out / "detail.json", "w") as fh:
        json.dump(_jsonable(detail), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 1 if any_failure else 0


# -- CSV workflow helpers --------------------------------------------------------


def _schema_from_args(args) -> CsvSchema:
    covs = [c.strip() for c in args.covariates.split(",") if c.strip()]
    scale_cols: tuple = ()
    if getattr(args, "scale", None):
        scale_cols = tuple(covs) if args.scale == "all" else tuple(
            c.strip() for c in args.scale.split(",") if c.strip()
        )
    return CsvSchema(
        covariates=covs,
        action_col=args.action_col,
        outcome_col=args.outcome_col,
        propensity_col=args.propensity_col if args.propensity is None else None,
        propensity=args.propensity,
        action_coding=args.action_coding,
        scale_cols=scale_cols,
    )


def _method_cfg_from_args(args) -> dict:
    entry = {"name": args.method}
    if args.criterion is not None and _METHODS[args.method]["kind"] == "dc":
        entry["criterion"] = args.criterion
    if args.lam is not None:
        entry["lam"] = args.lam
        entry["tune"] = False
    if args.no_tune:
        entry["tune"] = False
        if args.lam is None:
            raise SchemaError("--lam is required with --no-tune")
    if args.cv_folds is not None:
        entry["cv_folds"] = args.cv_folds
    if getattr(args, "delta", None) is not None and _METHODS[args.method]["kind"] == "dc":
        entry["delta"] = args.delta
    return _resolve_method(entry, 0)


def cmd_fit(args) -> int:
    if not (0.0 < args.train_frac < 1.0):
        raise ValueError(f"--train-frac must lie strictly in (0, 1), got {args.train_frac}")
    schema = _schema_from_args(args)
    data = load_csv(args.data, schema)
    mcfg = _method_cfg_from_args(args)
    gamma = args.gamma

    gen = RandomSource(args.seed, 0).generator()
    perm = gen.permutation(data.n)
    n_train = int(round(args.train_frac * data.n))
    if n_train < 2 or n_train >= data.n:
        raise ValueError(f"--train-frac {args.train_frac} leaves no usable split for n={data.n}")
    train = data.subset(np.sort(perm[:n_train]))
    holdout = data.subset(np.sort(perm[n_train:]))

    cands = _candidates(mcfg, gamma, train)
    selected = cands[0]
    if mcfg["tune"] and len(cands) > 1:
        selected, _ = cv_select(
            train, cands, mcfg["cv_folds"], _tune_criterion(mcfg),
            RandomSource(args.seed, 1), _fit_candidate, gamma=gamma,
        )
    rule, meta, _trace = _fit_final(train, selected, RandomSource(args.seed, 2))

    decisions = rule.decide_batch(holdout.X)
    quantiles = _parse_quantiles(args.quantiles)
    evaluation = {
        "value_mean": evaluate_value(holdout, decisions).value,
        "m0": evaluate_m0(holdout, decisions, gamma).value,
        "quantiles": {
            str(q): evaluate_quantile(holdout, decisions, q).value for q in quantiles
        },
        "n_train": train.n,
        "n_holdout": holdout.n,
        "gamma": gamma,
        "fit": meta,
        "method": mcfg["label"],
        "package_version": __version__,
        "master_seed": args.seed,
    }
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / "model.json"
    save_model(rule, model_path)
    with open(out / "evaluation.json", "w") as fh:
        json.dump(_jsonable(evaluation), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(_jsonable(evaluation), indent=2, sort_keys=True))
    print(f"model written to {model_path}", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    schema = _schema_from_args(args)
    data = load_csv(args.data, schema)
    model = load_model(args.model)
    # decide_raw applies any scaling stored in the model, so pass the CSV
    # unscaled here (leave --scale off when the model embeds a transform).
    decisions = model.decide_raw(data.X)
    gamma = args.gamma
    report = {
        "value_mean": evaluate_value(data, decisions).value,
        "m0": evaluate_m0(data, decisions, gamma).value,
        "m1": evaluate_m1(data, decisions, gamma).value,
        "quantile": evaluate_quantile(data, decisions, gamma).value,
        "gamma": gamma,
        "n": data.n,
        "package_version": __version__,
    }
    print(json.dumps(_jsonable(report), indent=2, sort_keys=True))
    return 0


def cmd_tune(args) -> int:
    schema = _schema_from_args(args)
    data = load_csv(args.data, schema)
    entry = {"name": args.method}
    if args.criterion is not None and _METHODS[args.method]["kind"] == "dc":
        entry["criterion"] = args.criterion
    if args.cv_folds is not None:
        entry["cv_folds"] = args.cv_folds
    if args.lambda_grid:
        entry["lambda_grid"] = [float(v) for v in args.lambda_grid.split(",")]
    mcfg = _resolve_method(entry, 0)
    cands = _candidates(mcfg, args.gamma, data)
    best, table = cv_select(
        data, cands, mcfg["cv_folds"], _tune_criterion(mcfg),
        RandomSource(args.seed, 1), _fit_candidate, gamma=args.gamma,
    )
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    table_path = out / "cv_table.csv"
    table.write_csv(
        table_path,
        header_comment=f"tailrule {__version__} seed={args.seed} method={mcfg['label']}",
    )
    result = {
        "method": mcfg["label"],
        "criterion": table.criterion,
        "best_lam": table.best_row.lam,
        "best_bandwidth": table.best_row.bandwidth,
        "best_score": table.best_row.score,
        "package_version": __version__,
        "master_seed": args.seed,
    }
    print(json.dumps(_jsonable(result), indent=2, sort_keys=True))
    print(f"cv table written to {table_path}", file=sys.stderr)
    return 0


def _parse_quantiles(raw: str):
    out = []
    for tok in raw.split(","):
        tok = tok.strip()
        if tok:
            q = float(tok)
            if not (0.0 < q < 1.0):
                raise ValueError(f"quantile level {q} outside (0, 1)")
            out.append(q)
    if not out:
        raise ValueError("no quantile levels given")
    return out


def cmd_simulate(args) -> int:
    if args.config:
        with open(args.config) as fh:
            user_cfg = yaml.safe_load(fh) or {}
        if not isinstance(user_cfg, dict):
            raise SchemaError("config file must hold a mapping at top level")
    else:
        user_cfg = {}

    # Flag overrides.
    if args.scenario is not None:
        user_cfg.setdefault("scenario", {})["id"] = args.scenario
    for key, val in (("n", args.n), ("p", args.p), ("gamma", args.gamma), ("n_test", args.n_test)):
        if val is not None:
            user_cfg.setdefault("scenario", {})[key] = val
    if args.method:
        user_cfg["methods"] = [{"name": m} for m in args.method]
    if args.delta is not None:
        methods = user_cfg.get("methods")
        if methods is None:
            methods = [dict(m) for m in DEFAULT_CONFIG["methods"]]
            user_cfg["methods"] = methods
        for m in methods:
            if _METHODS.get(m.get("name"), {}).get("kind") == "dc":
                m["delta"] = args.delta
    for key, val in (("reps", args.reps), ("seed", args.seed), ("jobs", args.jobs), ("outdir", args.outdir)):
        if val is not None:
            user_cfg[key] = val
    return run_experiment(user_cfg)


def cmd_version(_args) -> int:
    print(f"tailrule {__version__} (kernel backend: {BACKEND})")
    return 0


# -- argument parsing -----------------------------------------------------------


def _add_schema_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--covariates", required=True, help="comma-separated covariate column names")
    p.add_argument("--action-col", default="action")
    p.add_argument("--outcome-col", default="outcome")
    p.add_argument("--propensity-col", default="propensity")
    p.add_argument("--propensity", type=float, default=None,
                   help="constant propensity; overrides --propensity-col")
    p.add_argument("--action-coding", choices=("pm1", "01"), default="pm1")
    p.add_argument("--scale", default=None,
                   help="covariate columns to center/scale: 'all' or a comma list")


def _add_method_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", required=True, choices=sorted(_METHODS))
    p.add_argument("--criterion", choices=("m0", "m1"), default=None)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--lam", type=float, default=None, help="fixed penalty weight (skips tuning)")
    p.add_argument("--no-tune", action="store_true")
    p.add_argument("--cv-folds", type=int, default=None)
    p.add_argument("--delta", type=float, default=None, help="surrogate half-width")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tailrule", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a replicated simulation study")
    sim.add_argument("--config", default=None, help="YAML/JSON config file")
    sim.add_argument("--scenario", default=None)
    sim.add_argument("--method", action="append", default=None,
                     help="repeatable; replaces the config's method list")
    sim.add_argument("--reps", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--jobs", type=int, default=None)
    sim.add_argument("--outdir", default=None)
    sim.add_argument("--gamma", type=float, default=None)
    sim.add_argument("--delta", type=float, default=None)
    sim.add_argument("--n", type=int, default=None)
    sim.add_argument("--p", type=int, default=None)
    sim.add_argument("--n-test", type=int, default=None)
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit a method to a CSV and persist the model")
    fit.add_argument("data")
    _add_schema_flags(fit)
    _add_method_flags(fit)
    fit.add_argument("--train-frac", type=float, default=0.8)
    fit.add_argument("--quantiles", default="0.25,0.10")
    fit.add_argument("--outdir", default="out")
    fit.set_defaults(func=cmd_fit)

    ev = sub.add_parser("evaluate", help="score a persisted model on a CSV")
    ev.add_argument("model")
    ev.add_argument("data")
    _add_schema_flags(ev)
    ev.add_argument("--gamma", type=float, default=0.5)
    ev.set_defaults(func=cmd_evaluate)

    tune = sub.add_parser("tune", help="cross-validate a method's grid on a CSV")
    tune.add_argument("data")
    _add_schema_flags(tune)
    _add_method_flags(tune)
    tune.add_argument("--lambda-grid", default=None, help="comma-separated penalty weights")
    tune.add_argument("--outdir", default="out")
    tune.set_defaults(func=cmd_tune)

    ver = sub.add_parser("version", help="print version and kernel backend")
    ver.set_defaults(func=cmd_version)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure: machine-readable report
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
