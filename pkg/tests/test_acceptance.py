"""Acceptance criteria 1-8, each at its stated tolerance.

Every test records a PASS/FAIL/SKIP line that pytest prints in an
"acceptance criteria" section at the end of the run.
"""
import contextlib
import itertools
import json
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, ML_PATH, YAHOO_TEST, YAHOO_TRAIN, needs_movielens, random_problem
from robustrec import data as rdata
from robustrec.covariance import estimate_covariance, save_covariance
from robustrec.harness import EvalConfig, assemble_problem, run_sweep
from robustrec.metrics import f1_score, gini_coefficient
from robustrec.milp import build_milp
from robustrec.mf import MfConfig, rmse, save_model, train_mf
from robustrec.mps import parse_mps, read_mps, to_mps
from robustrec.problem_io import load_problem, save_problem
from robustrec.robust import (build_deltas, dual_solution, nominal_objective, pair_deviations,
                              worst_case_penalty_mu, worst_case_penalty_sigma)
from robustrec.solver import SolveConfig, solve, solve_branch_and_bound, solve_enumerate

FIX = Path(__file__).parent / "fixtures"


@contextlib.contextmanager
def criterion(n, title):
    info = {}
    try:
        yield info
    except pytest.skip.Exception as e:
        ACCEPTANCE_LINES[n] = f"criterion {n} SKIP  {title}: {e.msg if hasattr(e, 'msg') else e}"
        print(ACCEPTANCE_LINES[n])
        raise
    except BaseException as e:
        detail = "; ".join(f"{k}={v}" for k, v in info.items())
        ACCEPTANCE_LINES[n] = f"criterion {n} FAIL  {title}: {detail} ({type(e).__name__}: {str(e).splitlines()[0] if str(e) else ''})"
        print(ACCEPTANCE_LINES[n])
        raise
    detail = "; ".join(f"{k}={v}" for k, v in info.items())
    ACCEPTANCE_LINES[n] = f"criterion {n} PASS  {title}: {detail}"
    print(ACCEPTANCE_LINES[n])


def oracle_instances(count, seed):
    """Seeded instances with |I_u| <= 12, N <= 4, alpha in {0, 0.2, 1} and
    budgets drawn through saturation (up to N + 1 and N^2 + 1)."""
    rng = np.random.default_rng(seed)
    alphas = (0.0, 0.2, 1.0)
    for k in range(count):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(n, 13))
        gm = int(rng.integers(0, n + 2))
        gs = int(rng.integers(0, n * n + 2))
        yield random_problem(rng, m, n, alpha=alphas[k % 3], gamma_mu=gm, gamma_sigma=gs)


def test_criterion_1_oracle_equivalence():
    with criterion(1, "branch-and-bound equals enumeration") as info:
        t0 = time.perf_counter()
        worst, count = 0.0, 0
        for p in oracle_instances(600, 2024):
            ref = solve_enumerate(p)
            got = solve_branch_and_bound(p, SolveConfig(time_budget=60))
            assert got.status == "optimal"
            worst = max(worst, abs(got.value - ref.value))
            count += 1
        elapsed = time.perf_counter() - t0
        info.update(instances=count, max_abs_error=f"{worst:.3g}", seconds=f"{elapsed:.1f}")
        assert count >= 500
        assert worst <= 1e-9
        assert elapsed < 60


def test_criterion_2_duality():
    with criterion(2, "closed-form duals equal worst-case penalties") as info:
        rng = np.random.default_rng(77)
        worst, count = 0.0, 0
        for _ in range(250):
            m = int(rng.integers(2, 13))
            n = int(rng.integers(1, m + 1))
            p = random_problem(rng, m, n, gamma_mu=int(rng.integers(0, n + 3)),
                               gamma_sigma=int(rng.integers(0, n * n + 3)))
            u = p.uncertainty
            x = np.zeros(m)
            chosen = rng.choice(m, size=n, replace=False)
            x[chosen] = 1.0
            # mean budget: minimize gamma*y + sum(p) s.t. delta_i x_i <= y + p_i, y, p >= 0
            a = u.delta_mu * x
            val, y, pv = dual_solution(a, u.gamma_mu)
            assert y >= 0 and (pv >= 0).all() and (a <= y + pv + 1e-12).all()
            assert val == u.gamma_mu * y + pv.sum()
            primal = worst_case_penalty_mu(chosen, u.delta_mu, u.gamma_mu)
            worst = max(worst, abs(val - primal))
            # covariance budget over all ordered pairs of I_u x I_u
            b = (u.delta_sigma * np.outer(x, x)).ravel()
            val, z, qv = dual_solution(b, u.gamma_sigma)
            assert z >= 0 and (qv >= 0).all() and (b <= z + qv + 1e-12).all()
            primal = worst_case_penalty_sigma(chosen, u.delta_sigma, u.gamma_sigma)
            worst = max(worst, abs(val - primal))
            count += 1
        info.update(selections=count, max_abs_error=f"{worst:.3g}")
        # feasible dual value equal to the primal value is optimal by weak duality
        assert count >= 200 and worst <= 1e-12


def test_criterion_3_reduction_and_monotonicity():
    with criterion(3, "reduction, monotonicity, saturation") as info:
        rng = np.random.default_rng(3)
        n_inst = 0
        for _ in range(60):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(n, 11))
            p = random_problem(rng, m, n, alpha=float(rng.choice([0.0, 0.2, 0.5, 1.0])))
            nominal = min(nominal_objective(x, p) for x in itertools.combinations(range(m), n))
            assert solve_enumerate(p.with_budgets(0, 0)).value == nominal
            assert solve_branch_and_bound(p.with_budgets(0, 0)).value == nominal
            mu_vals = [solve_enumerate(p.with_budgets(g, 0)).value for g in range(n + 3)]
            sig_vals = [solve_enumerate(p.with_budgets(0, g)).value for g in range(n * n + 3)]
            assert all(b >= a for a, b in zip(mu_vals, mu_vals[1:]))
            assert all(b >= a for a, b in zip(sig_vals, sig_vals[1:]))
            assert len(set(mu_vals[n:])) == 1
            assert len(set(sig_vals[n * n:])) == 1
            both = [solve_enumerate(p.with_budgets(g, g * g)).value for g in range(n + 3)]
            assert all(b >= a for a, b in zip(both, both[1:])) and len(set(both[n:])) == 1
            n_inst += 1
        info.update(instances=n_inst)


def test_criterion_4_mps_fidelity():
    with criterion(4, "MPS export matches recorded external optima") as info:
        recorded = json.loads((FIX / "mps_optima.json").read_text())
        worst = 0.0
        for name, rec in recorded["instances"].items():
            p = load_problem(FIX / f"{name}.json")
            worst = max(worst, abs(solve_enumerate(p).value - rec["objective"]))
            text = to_mps(build_milp(p, name.upper()[:8]))
            assert to_mps(parse_mps(text)) == text
        assert to_mps(read_mps(FIX / "toy2.mps")) == (FIX / "toy2.mps").read_text()
        info.update(fixtures=len(recorded["instances"]), solver=recorded["solver"], max_abs_error=f"{worst:.3g}")
        assert len(recorded["instances"]) == 3 and worst <= 1e-6


@needs_movielens
def test_criterion_5_rmse_movielens():
    with criterion(5, "MovieLens 100K test RMSE 0.92 +/- 0.03 over 5 splits") as info:
        full = rdata.filter_min_ratings(rdata.load_movielens(ML_PATH), 50)
        assert full.n_users == 568
        errs = []
        for rep in range(5):
            train, test = rdata.split_per_user(full, rdata.SplitSpec(0.6, rep, rep))
            model = train_mf(train, MfConfig(n_factors=100, learning_rate=0.01, regularization=0.1, seed=rep))
            errs.append(rmse(model, test))
        info.update(rmse=" ".join(f"{e:.4f}" for e in errs), mean=f"{np.mean(errs):.4f}")
        assert abs(np.mean(errs) - 0.92) <= 0.03


def test_criterion_5b_rmse_yahoo():
    with criterion("5b", "Yahoo! R3 test RMSE 1.42 +/- 0.05") as info:
        if not (YAHOO_TRAIN.is_file() and YAHOO_TEST.is_file()):
            pytest.skip("Yahoo! R3 requires registration with Yahoo Webscope and is not available locally")
        train, test = rdata.load_yahoo_r3(YAHOO_TRAIN, YAHOO_TEST)
        err = rmse(train_mf(train, MfConfig(n_factors=100, learning_rate=0.01, regularization=0.1)), test)
        info.update(rmse=f"{err:.4f}")
        assert abs(err - 1.42) <= 0.05


@needs_movielens
def test_criterion_6_directional_trends():
    with criterion(6, "F1 rises with Gamma_mu, Gini falls with Gamma_sigma (200-user sample)") as info:
        cfg = EvalConfig(user_sample=200, repetitions=1, alpha=0.2, n_recommend=10,
                         gamma_mu_grid=(0, 10), gamma_sigma_grid=(0, 100), seed=0)
        rep = run_sweep(cfg, root=ML_PATH.parent.parent)
        base, mu, sig = rep.row(0, 0), rep.row(10, 0), rep.row(0, 100)
        info.update(f1_at_0=f"{base.mean_f1:.4f}", f1_at_mu10=f"{mu.mean_f1:.4f}",
                    gini_at_0=f"{base.gini:.4f}", gini_at_sigma100=f"{sig.gini:.4f}",
                    timeout_rates=f"{base.timeout_rate:.2f}/{mu.timeout_rate:.2f}/{sig.timeout_rate:.2f}")
        assert mu.mean_f1 > base.mean_f1, "F1 did not increase with Gamma_mu"
        assert sig.gini < base.gini, "Gini did not decrease with Gamma_sigma"


def test_criterion_7_metric_suite():
    with criterion(7, "F1 and Gini examples and invariances") as info:
        assert f1_score([1, 2, 3], {1, 2, 3}) == 1.0
        assert f1_score([1, 2], {3}) == 0.0
        assert f1_score([1, 2, 3, 4, 5], {1, 2, 9}) == 0.5
        assert f1_score([1, 2], set()) == 0.0
        assert gini_coefficient([3, 3, 3, 3]) == 0.0
        assert gini_coefficient([0, 0, 0, 4]) == 0.75
        assert gini_coefficient([1, 2, 3, 4]) == 0.25
        rng = np.random.default_rng(7)
        for _ in range(1000):
            c = rng.integers(0, 20, size=int(rng.integers(1, 40)))
            if c.sum() == 0:
                continue
            g = gini_coefficient(c)
            assert abs(gini_coefficient(c * int(rng.integers(2, 9))) - g) <= 1e-12
            assert abs(gini_coefficient(rng.permutation(c)) - g) <= 1e-12
            assert gini_coefficient(np.concatenate([c, np.zeros(int(rng.integers(1, 5)), int)])) >= g - 1e-12
            assert (g == 0.0) == (np.unique(c).size == 1)
        info.update(random_vectors=1000)


def _stage_bytes(tmp, full, cfg):
    """Run every stage once, writing artifacts to ``tmp``; return their bytes."""
    train, test = rdata.split_per_user(full, rdata.SplitSpec(cfg.train_fraction, cfg.seed, 0))
    rdata.write_movielens(train, tmp / "train.tsv")
    rdata.write_movielens(test, tmp / "test.tsv")
    model = train_mf(train, cfg.mf)
    save_model(model, tmp / "model.json")
    cov = estimate_covariance(train, model, cfg.shrinkage_weight)
    save_covariance(cov, tmp / "cov")
    d = build_deltas(cov, cfg.sigma_scale)
    p = assemble_problem(0, test, model, cov, d, cfg).with_budgets(3, 20)
    save_problem(p, tmp / "problem.json")
    res = solve(p, cfg.solver)
    (tmp / "solve.json").write_text(json.dumps([list(res.selection.chosen), res.value, res.bound,
                                                res.status, res.nodes_explored]))
    (tmp / "problem.mps").write_text(to_mps(build_milp(p)))
    run_sweep(cfg, loaded=(full, None), output=tmp / "sweep.csv")
    return {f.relative_to(tmp).as_posix(): f.read_bytes() for f in sorted(tmp.rglob("*")) if f.is_file()}


def test_criterion_8_determinism(tmp_path):
    with criterion(8, "identical seeds give byte-identical artifacts") as info:
        if ML_PATH.is_file():
            full = rdata.filter_min_ratings(rdata.load_movielens(ML_PATH), 50)
            keep = np.flatnonzero(np.isin(np.arange(full.n_users), np.arange(0, full.n_users, 20)))
            mask = np.isin(full.user_index, keep)
            full = rdata.filter_min_ratings(
                rdata.RatingDataset.from_triples([t for t, k in zip(full.triples(), mask) if k]), 1)
            source = "movielens subsample"
        else:
            from test_harness import synthetic
            full, source = synthetic(), "synthetic"
        cfg = EvalConfig(n_recommend=5, gamma_mu_grid=(0, 3), gamma_sigma_grid=(0, 20), repetitions=2,
                         mf=MfConfig(n_factors=10, n_epochs=5, seed=3),
                         solver=SolveConfig(time_budget=600, node_limit=2000))
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        a = _stage_bytes(tmp_path / "a", full, cfg)
        b = _stage_bytes(tmp_path / "b", full, cfg)
        info.update(source=source, users=full.n_users, artifacts=len(a))
        assert a.keys() == b.keys()
        for k in a:
            assert a[k] == b[k], k
