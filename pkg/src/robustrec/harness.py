"""Budget-sweep experiments: per-user problems, solves, F1/Gini aggregation
and CSV reports."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import data as rdata
from .covariance import CovarianceEstimate, estimate_covariance
from .data import RatingDataset, SplitSpec
from .metrics import f1_score, gini_coefficient
from .mf import FactorModel, MfConfig, predict_many, rmse, train_mf
from .robust import RobustProblem, UncertaintyModel, build_deltas
from .solver import TIME_LIMIT, SolveConfig, solve

logger = logging.getLogger(__name__)

CSV_SCHEMA_VERSION = 1
DATA_ROOT_ENV = "ROBUSTREC_DATA"
DATASETS = ("movielens", "yahoo_r3")
GRID_MODES = ("axes", "product")


@dataclass(frozen=True)
class EvalConfig:
    dataset: str = "movielens"
    movielens_path: str = "ml-100k/u.data"
    yahoo_train_path: str = "yahoo-r3/ydata-ymusic-rating-study-v1_0-train.txt"
    yahoo_test_path: str = "yahoo-r3/ydata-ymusic-rating-study-v1_0-test.txt"
    min_ratings: int = 50
    train_fraction: float = 0.6
    user_sample: int | None = None
    n_recommend: int = 10
    alpha: float = 0.2
    relevance_threshold: float = 4.0
    gamma_mu_grid: tuple = (0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10)
    gamma_sigma_grid: tuple = (0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100)
    grid_mode: str = "axes"
    repetitions: int = 5
    bootstrap_runs: int = 0
    seed: int = 0
    shrinkage_weight: float = 0.5
    sigma_scale: float = 0.2
    negative_covariance: str = "abs"
    pair_mode: str = "ordered"
    count_empty_relevant: bool = True
    n_jobs: int = 1
    mf: MfConfig = field(default_factory=MfConfig)
    solver: SolveConfig = field(default_factory=SolveConfig)

    def __post_init__(self):
        object.__setattr__(self, "gamma_mu_grid", tuple(int(g) for g in self.gamma_mu_grid))
        object.__setattr__(self, "gamma_sigma_grid", tuple(int(g) for g in self.gamma_sigma_grid))
        if self.dataset not in DATASETS:
            raise ValueError(f"dataset must be one of {DATASETS}")
        if not self.gamma_mu_grid or not self.gamma_sigma_grid:
            raise ValueError("budget grids must be non-empty")
        if min(self.gamma_mu_grid + self.gamma_sigma_grid) < 0:
            raise ValueError("budgets must be non-negative")
        if self.grid_mode not in GRID_MODES:
            raise ValueError(f"grid_mode must be one of {GRID_MODES}")
        if self.n_recommend < 1:
            raise ValueError("n_recommend must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 1.0 <= self.relevance_threshold <= 5.0:
            raise ValueError("relevance_threshold must lie within the rating scale")
        if self.repetitions < 1 or self.bootstrap_runs < 0 or self.n_jobs < 1:
            raise ValueError("repetitions and n_jobs must be >= 1, bootstrap_runs >= 0")

    def grid(self) -> list[tuple[int, int]]:
        """Budget pairs to evaluate. ``axes`` varies one budget with the
        other at 0 (each pair once, in grid order); ``product`` takes the
        Cartesian product."""
        if self.grid_mode == "product":
            return [(a, b) for a in self.gamma_mu_grid for b in self.gamma_sigma_grid]
        pts = [(a, 0) for a in self.gamma_mu_grid] + [(0, b) for b in self.gamma_sigma_grid]
        seen, out = set(), []
        for pt in pts:
            if pt not in seen:
                seen.add(pt)
                out.append(pt)
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gamma_mu_grid"] = list(self.gamma_mu_grid)
        d["gamma_sigma_grid"] = list(self.gamma_sigma_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvalConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "mf" in d:
            d["mf"] = _sub(MfConfig, d["mf"], "mf")
        if "solver" in d:
            d["solver"] = _sub(SolveConfig, d["solver"], "solver")
        return cls(**d)


def _sub(cls, value, name):
    if isinstance(value, cls):
        return value
    known = {f.name for f in fields(cls)}
    unknown = set(value) - known
    if unknown:
        raise ValueError(f"unknown {name} config keys: {sorted(unknown)}")
    return cls(**value)


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("robustrec.configs").iterdir()
                  if p.name.endswith(".json"))


def apply_overrides(d: dict, overrides: dict | None) -> dict:
    """Set dotted keys such as ``solver.time_budget`` in a config dict."""
    for key, value in (overrides or {}).items():
        target = d
        *parents, leaf = key.split(".")
        for k in parents:
            target = target.setdefault(k, {})
        target[leaf] = value
    return d


def load_config(name_or_path=None, overrides: dict | None = None) -> EvalConfig:
    """Load a JSON config file, or a bundled preset by name (e.g.
    ``paper-ml100k``), then apply dotted-key ``overrides``. ``None`` starts
    from the defaults."""
    if name_or_path is None:
        d = EvalConfig().to_dict()
    elif Path(name_or_path).is_file():
        d = json.loads(Path(name_or_path).read_text(encoding="utf-8"))
    elif str(name_or_path) in preset_names():
        d = json.loads(resources.files("robustrec.configs").joinpath(f"{name_or_path}.json").read_text())
    else:
        raise FileNotFoundError(f"no config file or preset named {name_or_path!r}")
    return EvalConfig.from_dict(apply_overrides(d, overrides))


@dataclass(frozen=True)
class SweepRow:
    dataset: str
    gamma_mu: int
    gamma_sigma: int
    mean_f1: float
    f1_stderr: float
    gini: float
    gini_stderr: float
    timeout_rate: float
    users_evaluated: int
    users_skipped: int


CSV_FIELDS = tuple(f.name for f in fields(SweepRow))


@dataclass
class SweepReport:
    rows: list = field(default_factory=list)
    rmse: list = field(default_factory=list)

    def row(self, gamma_mu, gamma_sigma) -> SweepRow:
        for r in self.rows:
            if r.gamma_mu == gamma_mu and r.gamma_sigma == gamma_sigma:
                return r
        raise KeyError((gamma_mu, gamma_sigma))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(CSV_FIELDS)
        for r in self.rows:
            w.writerow([_cell(getattr(r, k)) for k in CSV_FIELDS])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read_csv(cls, path) -> "SweepReport":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != CSV_FIELDS:
                raise ValueError("CSV header does not match the sweep report schema")
            rows = []
            for rec in reader:
                vals = dict(zip(header, rec))
                rows.append(SweepRow(
                    vals["dataset"], int(vals["gamma_mu"]), int(vals["gamma_sigma"]),
                    *(float(vals[k]) for k in CSV_FIELDS[3:8]),
                    int(vals["users_evaluated"]), int(vals["users_skipped"])))
        return cls(rows)


def _cell(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def data_root(explicit=None) -> Path:
    if explicit is not None:
        return Path(explicit)
    return Path(os.environ.get(DATA_ROOT_ENV, "."))


def load_experiment_data(cfg: EvalConfig, root=None):
    """Load the configured dataset. Returns ``(full, fixed_split)`` where
    ``fixed_split`` is ``(train, test)`` for datasets shipped pre-split and
    ``None`` otherwise."""
    root = data_root(root)
    rng = np.random.default_rng(cfg.seed)
    if cfg.dataset == "movielens":
        full = rdata.filter_min_ratings(rdata.load_movielens(root / cfg.movielens_path), cfg.min_ratings)
        if cfg.user_sample is not None and cfg.user_sample < full.n_users:
            keep = np.sort(rng.choice(full.n_users, size=cfg.user_sample, replace=False))
            full = _keep_users(full, keep)
        return full, None
    train, test = rdata.load_yahoo_r3(root / cfg.yahoo_train_path, root / cfg.yahoo_test_path)
    if cfg.user_sample is not None and cfg.user_sample < train.n_users:
        keep = np.sort(rng.choice(train.n_users, size=cfg.user_sample, replace=False))
        train, test = _keep_users(train, keep, reindex_items=False), _keep_users(test, keep, reindex_items=False)
    return None, (train, test)


def _keep_users(ds: RatingDataset, keep, reindex_items=True) -> RatingDataset:
    mask = np.zeros(ds.n_users, dtype=bool)
    mask[keep] = True
    rows = np.flatnonzero(mask[ds.user_index])
    umap = np.cumsum(mask) - 1
    sub = RatingDataset([ds.users[k] for k in keep], ds.items, umap[ds.user_index[rows]],
                        ds.item_index[rows], ds.rating[rows], ds.scale)
    return rdata.filter_min_ratings(sub, 1) if reindex_items else sub


def assemble_problem(user: int, test_set: RatingDataset, model: FactorModel,
                     cov: CovarianceEstimate, deltas: UncertaintyModel, cfg: EvalConfig,
                     rows=None):
    """Robust problem for one user over that user's test items, or ``None``
    when the user has fewer than ``n_recommend`` test items.

    Candidates are item indices of ``test_set`` in ascending order.
    """
    if rows is None:
        rows = np.flatnonzero(test_set.user_index == user)
    items = np.sort(test_set.item_index[rows])
    if items.size < cfg.n_recommend:
        logger.debug("skip user=%s test_items=%d n_recommend=%d",
                     test_set.users[user], items.size, cfg.n_recommend)
        return None
    mu = predict_many(model, np.full(items.size, user), items)
    sub = np.ix_(items, items)
    unc = UncertaintyModel(deltas.delta_mu[items], deltas.delta_sigma[sub],
                           deltas.gamma_mu, deltas.gamma_sigma, deltas.pair_mode)
    return RobustProblem(tuple(int(i) for i in items), mu, cov.sigma[sub], unc,
                         cfg.n_recommend, cfg.alpha)


@dataclass
class _UserCase:
    user: int
    problem: RobustProblem
    relevant: frozenset


def prepare_repetition(train: RatingDataset, test: RatingDataset, cfg: EvalConfig, rep: int):
    """Train, estimate and assemble the per-user cases for one repetition.
    Returns ``(cases, n_skipped, rmse)``."""
    model = train_mf(train, replace(cfg.mf, seed=cfg.mf.seed + rep))
    err = rmse(model, test)
    cov = estimate_covariance(train, model, cfg.shrinkage_weight)
    deltas = build_deltas(cov, cfg.sigma_scale, cfg.negative_covariance)
    deltas = UncertaintyModel(deltas.delta_mu, deltas.delta_sigma, pair_mode=cfg.pair_mode)
    cases, skipped = [], 0
    for u, rows in enumerate(test.user_groups()):
        if rows.size == 0:
            continue
        p = assemble_problem(u, test, model, cov, deltas, cfg, rows)
        if p is None:
            skipped += 1
            continue
        rel = frozenset(int(i) for i, r in zip(test.item_index[rows], test.rating[rows])
                        if r >= cfg.relevance_threshold)
        cases.append(_UserCase(u, p, rel))
    logger.info("repetition=%d rmse=%.4f users=%d skipped=%d", rep, err, len(cases), skipped)
    return cases, skipped, err


def _solve_one(args):
    p, solver_cfg = args
    res = solve(p, solver_cfg)
    return res.selection.items(p), res.status == TIME_LIMIT


def solve_cases(cases, gamma_mu, gamma_sigma, solver_cfg: SolveConfig, n_jobs=1):
    """Selected item indices per case and per-case timeout flags."""
    jobs = [(c.problem.with_budgets(gamma_mu, gamma_sigma), solver_cfg) for c in cases]
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            out = list(ex.map(_solve_one, jobs, chunksize=max(1, len(jobs) // (4 * n_jobs))))
    else:
        out = [_solve_one(j) for j in jobs]
    return [o[0] for o in out], [o[1] for o in out]


def _stats(f1s, picks, n_items):
    counts = np.zeros(n_items, dtype=np.int64)
    for items in picks:
        counts[list(items)] += 1
    return float(np.mean(f1s)), gini_coefficient(counts)


def _stderr(values):
    v = np.asarray(values, dtype=np.float64)
    return float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0


def run_sweep(cfg: EvalConfig, root=None, output=None, loaded=None) -> SweepReport:
    """Evaluate every budget pair of ``cfg.grid()``.

    With ``bootstrap_runs == 0`` the error columns are standard errors over
    repetitions (independent splits for MovieLens). Otherwise they are the
    standard deviation of the statistic over user-level bootstrap resamples,
    averaged across repetitions. The Gini is computed per repetition from
    the counts of that repetition's lists and then averaged.

    ``loaded`` may pass the result of :func:`load_experiment_data` to skip
    reading files.
    """
    full, fixed = loaded if loaded is not None else load_experiment_data(cfg, root)
    grid = cfg.grid()
    per_point = {pt: {"f1": [], "gini": [], "f1_bs": [], "gini_bs": [], "timeouts": 0,
                      "solves": 0, "evaluated": 0, "skipped": 0} for pt in grid}
    report = SweepReport()
    for rep in range(cfg.repetitions):
        if fixed is None:
            train, test = rdata.split_per_user(
                full, SplitSpec(cfg.train_fraction, cfg.seed + rep, rep))
        else:
            train, test = fixed
        cases, skipped, err = prepare_repetition(train, test, cfg, rep)
        report.rmse.append(err)
        if not cases:
            raise ValueError("no user has enough test items for the configured n_recommend")
        boot = np.random.default_rng([cfg.seed, rep])
        samples = [boot.integers(0, len(cases), size=len(cases)) for _ in range(cfg.bootstrap_runs)]
        for pt in grid:
            picks, timeouts = solve_cases(cases, *pt, cfg.solver, cfg.n_jobs)
            f1s = []
            for c, items in zip(cases, picks):
                if not c.relevant and not cfg.count_empty_relevant:
                    f1s.append(np.nan)
                else:
                    f1s.append(f1_score(items, c.relevant))
            f1s = np.asarray(f1s)
            keep = ~np.isnan(f1s)
            mean_f1, gini = _stats(f1s[keep], [p for p, k in zip(picks, keep)], test.n_items)
            acc = per_point[pt]
            acc["f1"].append(mean_f1)
            acc["gini"].append(gini)
            if samples:
                bs = [_stats(f1s[s][keep[s]], [picks[k] for k in s], test.n_items) for s in samples]
                acc["f1_bs"].append(float(np.std([b[0] for b in bs], ddof=1)) if len(bs) > 1 else 0.0)
                acc["gini_bs"].append(float(np.std([b[1] for b in bs], ddof=1)) if len(bs) > 1 else 0.0)
            acc["timeouts"] += int(sum(timeouts))
            acc["solves"] += len(cases)
            acc["evaluated"] += len(cases)
            acc["skipped"] += skipped
            logger.info("repetition=%d gamma_mu=%d gamma_sigma=%d f1=%.5f gini=%.5f timeouts=%d",
                        rep, pt[0], pt[1], mean_f1, gini, sum(timeouts))
    for pt in grid:
        acc = per_point[pt]
        if cfg.bootstrap_runs:
            f1_se, gini_se = float(np.mean(acc["f1_bs"])), float(np.mean(acc["gini_bs"]))
        else:
            f1_se, gini_se = _stderr(acc["f1"]), _stderr(acc["gini"])
        report.rows.append(SweepRow(
            cfg.dataset, pt[0], pt[1], float(np.mean(acc["f1"])), f1_se,
            float(np.mean(acc["gini"])), gini_se, acc["timeouts"] / acc["solves"],
            acc["evaluated"], acc["skipped"]))
    if output is not None:
        report.write_csv(output)
    return report
