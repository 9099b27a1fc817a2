"""Command-line entry point.

Pipeline stages share a workspace directory created by ``ingest``::

    robustrec ingest --config paper-ml100k --out work/
    robustrec train --workspace work/
    robustrec estimate-cov --workspace work/
    robustrec solve-user --workspace work/ --user 13 --gamma-mu 5
    robustrec export-mps --workspace work/ --user 13 --out u13.mps
    robustrec sweep --config paper-ml100k --out sweep.csv

Exit codes: 0 success, 2 usage or invalid config, 3 file I/O, 4 bad data,
5 solver or training failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import data as rdata
from .covariance import estimate_covariance, load_covariance, save_covariance
from .exceptions import DataError, SolverError, TrainingError
from .harness import EvalConfig, assemble_problem, load_config, load_experiment_data, run_sweep
from .milp import build_milp
from .mf import load_model, rmse, save_model, train_mf
from .mps import export_mps
from .problem_io import problem_from_dict, problem_to_dict
from .robust import UncertaintyModel, build_deltas
from .solver import solve

logger = logging.getLogger("robustrec")

EXIT_OK = 0
BUNDLED_PROBLEMS = ("six_items",)


class UsageError(Exception):
    pass


# (exception types, category, exit code), checked in order
_ERRORS = (
    (UsageError, "usage error", 2),
    (OSError, "I/O error", 3),
    (DataError, "data error", 4),
    ((SolverError, TrainingError), "solver error", 5),
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class _KeyValueFormatter(logging.Formatter):
    def format(self, record):
        msg = record.getMessage()
        return f"level={record.levelname.lower()} logger={record.name} {msg}"


def _parse_override(text):
    if "=" not in text:
        raise UsageError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _config(args) -> EvalConfig:
    overrides = dict(_parse_override(s) for s in args.set or ())
    try:
        return load_config(args.config, overrides)
    except FileNotFoundError as e:
        raise UsageError(str(e)) from None
    except (ValueError, TypeError) as e:
        raise UsageError(f"invalid config: {e}") from None


def _common(p):
    p.add_argument("--config", help="config JSON file or bundled preset name")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field (dotted keys for mf.* and solver.*)")


# workspace layout

def _ws(args) -> Path:
    ws = Path(args.workspace)
    if not (ws / "index.json").is_file():
        raise FileNotFoundError(f"{ws} is not a workspace (missing index.json); run ingest first")
    return ws


def _ws_index(ws):
    d = json.loads((ws / "index.json").read_text(encoding="utf-8"))
    return d["users"], d["items"], tuple(d["scale"])


def _ws_split(ws, name):
    users, items, scale = _ws_index(ws)
    triples = rdata._read_tsv(ws / f"{name}.tsv", 4, scale)
    return rdata.RatingDataset.from_triples(triples, scale, users, items)


def _write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


# subcommands

def cmd_ingest(args):
    cfg = _config(args)
    full, fixed = load_experiment_data(cfg, args.data_root)
    if fixed is None:
        train, test = rdata.split_per_user(
            full, rdata.SplitSpec(cfg.train_fraction, cfg.seed + args.repetition, args.repetition))
    else:
        train, test = fixed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rdata.write_movielens(train, out / "train.tsv")
    rdata.write_movielens(test, out / "test.tsv")
    _write_json({"dataset": cfg.dataset, "repetition": args.repetition, "scale": list(train.scale),
                 "users": list(train.users), "items": list(train.items)}, out / "index.json")
    _write_json(cfg.to_dict(), out / "config.json")
    logger.info("ingest dataset=%s users=%d items=%d train=%d test=%d out=%s",
                cfg.dataset, train.n_users, train.n_items, train.n_ratings, test.n_ratings, out)
    return EXIT_OK


def _ws_config(args, ws):
    if args.config is None and (ws / "config.json").is_file():
        args.config = str(ws / "config.json")
    return _config(args)


def cmd_train(args):
    ws = _ws(args)
    cfg = _ws_config(args, ws)
    train = _ws_split(ws, "train")
    model = train_mf(train, cfg.mf)
    out = Path(args.out) if args.out else ws / "model.json"
    save_model(model, out)
    msg = f"train factors={cfg.mf.n_factors} epochs={cfg.mf.n_epochs} out={out}"
    if (ws / "test.tsv").is_file():
        msg += f" test_rmse={rmse(model, _ws_split(ws, 'test')):.6f}"
    logger.info(msg)
    return EXIT_OK


def cmd_estimate_cov(args):
    ws = _ws(args)
    cfg = _ws_config(args, ws)
    model = load_model(args.model or ws / "model.json")
    est = estimate_covariance(_ws_split(ws, "train"), model, cfg.shrinkage_weight)
    out = Path(args.out) if args.out else ws / "covariance"
    save_covariance(est, out)
    logger.info("estimate-cov items=%d min_eigenvalue=%.6g out=%s", est.n_items, est.min_eigenvalue(), out)
    return EXIT_OK


def _problem(args):
    """Problem from --problem (file or bundled name) or from a workspace user."""
    if args.problem:
        if args.problem in BUNDLED_PROBLEMS and not Path(args.problem).exists():
            text = resources.files("robustrec").joinpath(f"fixtures/{args.problem}.json").read_text()
        else:
            path = Path(args.problem)
            if not path.is_file():
                raise FileNotFoundError(f"no such problem file: {path}")
            text = path.read_text(encoding="utf-8")
        try:
            p = problem_from_dict(json.loads(text))
        except (ValueError, KeyError) as e:
            raise DataError(f"invalid problem document: {e}") from None
        items = None
    else:
        if args.workspace is None or args.user is None:
            raise UsageError("give --problem, or --workspace with --user")
        ws = _ws(args)
        cfg = _ws_config(args, ws)
        test = _ws_split(ws, "test")
        uid = rdata._parse_id(args.user)
        if uid not in test.user_pos:
            raise DataError(f"user {args.user!r} is not in the workspace")
        model = load_model(ws / "model.json")
        cov = load_covariance(ws / "covariance")
        d = build_deltas(cov, cfg.sigma_scale, cfg.negative_covariance)
        d = UncertaintyModel(d.delta_mu, d.delta_sigma, pair_mode=cfg.pair_mode)
        p = assemble_problem(test.user_pos[uid], test, model, cov, d, cfg)
        if p is None:
            raise DataError(f"user {args.user!r} has fewer than n_recommend={cfg.n_recommend} test items")
        items = test.items
    if args.gamma_mu is not None or args.gamma_sigma is not None:
        u = p.uncertainty
        p = p.with_budgets(u.gamma_mu if args.gamma_mu is None else args.gamma_mu,
                           u.gamma_sigma if args.gamma_sigma is None else args.gamma_sigma)
    return p, items


def cmd_solve_user(args):
    cfg = _config(args) if args.problem else None
    p, items = _problem(args)
    if args.save_problem:
        _write_json(problem_to_dict(p), args.save_problem)
    solver_cfg = cfg.solver if cfg is not None else _ws_config(args, _ws(args)).solver
    res = solve(p, solver_cfg)
    chosen = res.selection.items(p)
    if items is not None:
        chosen = tuple(items[k] for k in chosen)
    out = {"selection": list(chosen), "worst_case_value": res.value,
           "nominal_value": res.selection.nominal_value, "bound": res.bound,
           "status": res.status, "nodes": res.nodes_explored,
           "gamma_mu": p.uncertainty.gamma_mu, "gamma_sigma": p.uncertainty.gamma_sigma}
    print(json.dumps(out))
    return EXIT_OK


def cmd_export_mps(args):
    if args.problem:
        _config(args)
    p, _ = _problem(args)
    inst = build_milp(p, args.name)
    export_mps(inst, args.out)
    logger.info("export-mps variables=%d constraints=%d out=%s", inst.n_variables, inst.n_constraints, args.out)
    return EXIT_OK


def cmd_sweep(args):
    cfg = _config(args)
    out = Path(args.out)
    report = run_sweep(cfg, args.data_root, out)
    logger.info("sweep rows=%d mean_rmse=%.6f out=%s", len(report.rows), float(np.mean(report.rmse)), out)
    if args.print:
        sys.stdout.write(report.to_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="robustrec", description="Robust mean-variance top-N recommendation.")
    ap.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="load, filter and split a dataset into a workspace")
    _common(p)
    p.add_argument("--data-root", help="dataset root (default: $ROBUSTREC_DATA or .)")
    p.add_argument("--repetition", type=int, default=0)
    p.add_argument("--out", required=True, help="workspace directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="fit the factor model on the workspace training split")
    _common(p)
    p.add_argument("--workspace", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("estimate-cov", help="estimate the item covariance")
    _common(p)
    p.add_argument("--workspace", required=True)
    p.add_argument("--model")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate_cov)

    for name, func, helptext in (("solve-user", cmd_solve_user, "solve one robust selection problem"),
                                 ("export-mps", cmd_export_mps, "write one problem as fixed-format MPS")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--problem", help=f"problem JSON file or bundled name {BUNDLED_PROBLEMS}")
        p.add_argument("--workspace")
        p.add_argument("--user", help="user id in the workspace")
        p.add_argument("--gamma-mu", type=int)
        p.add_argument("--gamma-sigma", type=int)
        if name == "solve-user":
            p.add_argument("--save-problem", help="also write the problem JSON here")
        else:
            p.add_argument("--out", required=True)
            p.add_argument("--name", default="ROBUSTRS")
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="run the budget sweep and write the CSV report")
    _common(p)
    p.add_argument("--data-root")
    p.add_argument("--out", required=True)
    p.add_argument("--print", action="store_true", help="also print the CSV")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"robustrec: usage error: {e}", file=sys.stderr)
        return 2
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_KeyValueFormatter())
    logger.handlers[:] = [handler]
    logger.setLevel(args.log_level)
    logger.propagate = False
    try:
        return args.func(args)
    except Exception as e:
        for types, category, code in _ERRORS:
            if isinstance(e, types):
                print(f"robustrec: {category}: {e}", file=sys.stderr)
                return code
        raise

if __name__ == "__main__":
    sys.exit(main())
