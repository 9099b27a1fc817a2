"""Exact minimization of the robust objective over size-N selections."""
from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import SolverError
from .robust import (RobustProblem, Selection, evaluate, pair_deviations,
                     robust_objective)

logger = logging.getLogger(__name__)

METHODS = ("enumerate", "branch_and_bound", "milp_export_only")
OPTIMAL = "optimal"
TIME_LIMIT = "time_limit_incumbent"
INFEASIBLE = "infeasible"

# below this many free items the quadratic bound ranks partners among the
# free items only; above it a precomputed global ranking keeps nodes cheap
_EXACT_ROW_BOUND_LIMIT = 80


@dataclass(frozen=True)
class SolveConfig:
    time_budget: float = 3.0
    method: str = "branch_and_bound"
    optimality_tolerance: float = 1e-9
    node_limit: int | None = None
    enumeration_cap: int = 10 ** 6

    def __post_init__(self):
        if not self.time_budget > 0:
            raise ValueError("time_budget must be > 0")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.node_limit is not None and self.node_limit < 1:
            raise ValueError("node_limit must be >= 1")


@dataclass(frozen=True)
class SolveResult:
    selection: Selection
    bound: float
    status: str
    nodes_explored: int
    wall_time: float = field(default=0.0, compare=False)

    @property
    def value(self) -> float:
        return self.selection.worst_case_value


def solve_enumerate(p: RobustProblem, cap: int = 10 ** 6) -> SolveResult:
    """Evaluate every size-N subset; ties go to the lexicographically
    smallest position tuple."""
    m, n = p.n_candidates, p.n_select
    total = math.comb(m, n)
    if total > cap:
        raise SolverError(f"enumeration of C({m}, {n}) = {total} subsets exceeds the cap of {cap}")
    t0 = time.perf_counter()
    best, best_x = math.inf, None
    for x in itertools.combinations(range(m), n):
        v = robust_objective(x, p)
        if v < best:
            best, best_x = v, x
    sel = evaluate(best_x, p)
    return SolveResult(sel, sel.worst_case_value, OPTIMAL, total, time.perf_counter() - t0)


class _BranchAndBound:
    """Depth-first search on item inclusion.

    A node fixes a set ``F`` of included items and a set of free items; the
    rest are excluded. Its lower bound is the larger of two relaxations:

    * nominal terms with each free item's pair terms bounded below by its
      ``r - 1`` cheapest partners, plus the worst-case penalties of ``F``
      alone (penalties only grow as items are added);
    * the same quadratic bound after folding the penalties in at their
      average rate, using that the ``g`` largest of ``n`` values sum to at
      least ``g / n`` of their total.
    """

    def __init__(self, p: RobustProblem):
        self.p = p
        u = p.uncertainty
        n = p.n_select
        self.a = p.alpha
        self.b = 1.0 - p.alpha
        n_pairs = n * n if u.pair_mode == "ordered" else n * (n + 1) // 2
        rate_mu = min(u.gamma_mu, n) / n
        rate_sigma = min(u.gamma_sigma, n_pairs) / n_pairs
        self.terms = [
            (p.sigma, p.mu, True),
            (p.sigma + rate_sigma * u.delta_sigma, p.mu - rate_mu * u.delta_mu, False),
        ]
        self.prefix = []
        for sig, _, _ in self.terms:
            off = sig.copy()
            np.fill_diagonal(off, np.inf)
            srt = np.sort(off, axis=1)[:, :max(n - 1, 0)]
            self.prefix.append(np.concatenate([np.zeros((sig.shape[0], 1)),
                                               np.cumsum(srt, axis=1)], axis=1))

    def _penalty(self, F):
        u = self.p.uncertainty
        if not F:
            return 0.0
        pen = 0.0
        if u.gamma_mu:
            pen += self.b * float(np.sort(u.delta_mu[list(F)])[::-1][:u.gamma_mu].sum())
        if u.gamma_sigma and self.a:
            vals, _ = pair_deviations(F, u.delta_sigma, u.pair_mode)
            pen += self.a * float(np.sort(vals)[::-1][:u.gamma_sigma].sum())
        return pen

    def bound(self, F, free):
        """Lower bound on the robust objective over all completions of
        ``F`` by items of ``free``; also returns per-item scores used to
        order branching."""
        F = list(F)
        free = np.asarray(free, dtype=np.int64)
        r = self.p.n_select - len(F)
        best, scores = -math.inf, None
        for t, (sig, mu, with_pen) in enumerate(self.terms):
            val = 0.0
            if F:
                val = self.a * float(sig[np.ix_(F, F)].sum()) - self.b * float(mu[F].sum())
            if with_pen:
                val += self._penalty(F)
            if r > 0:
                cross = sig[F][:, free].sum(axis=0) if F else np.zeros(free.size)
                g = self.a * (np.diag(sig)[free] + 2.0 * cross) - self.b * mu[free]
                if self.a and r > 1:
                    if free.size <= _EXACT_ROW_BOUND_LIMIT:
                        sub = sig[np.ix_(free, free)].copy()
                        np.fill_diagonal(sub, np.inf)
                        part = np.partition(sub, r - 2, axis=1)[:, :r - 1].sum(axis=1)
                    else:
                        part = self.prefix[t][free, r - 1]
                    g = g + self.a * part
                val += float(np.partition(g, r - 1)[:r].sum()) if r < g.size else float(g.sum())
                if t == len(self.terms) - 1:
                    scores = g
            if val > best:
                best = val
        return best, scores

    def greedy(self):
        p = self.p
        chosen = []
        rest = list(range(p.n_candidates))
        while len(chosen) < p.n_select:
            vals = [robust_objective(chosen + [k], p) for k in rest]
            k = rest[int(np.argmin(vals))]
            chosen.append(k)
            rest.remove(k)
        return tuple(sorted(chosen))

    def improve(self, x, deadline, max_passes=5):
        """First-improvement single-swap local search."""
        p = self.p
        cur = list(x)
        val = robust_objective(cur, p)
        for _ in range(max_passes):
            improved = False
            outside = [k for k in range(p.n_candidates) if k not in cur]
            for a_pos in range(len(cur)):
                for k in outside:
                    cand = cur[:a_pos] + [k] + cur[a_pos + 1:]
                    v = robust_objective(cand, p)
                    if v < val - 1e-12:
                        old = cur[a_pos]
                        cur, val, improved = cand, v, True
                        outside[outside.index(k)] = old
                        break
                if time.perf_counter() > deadline:
                    return tuple(sorted(cur)), val
            if not improved:
                break
        return tuple(sorted(cur)), val


def solve_branch_and_bound(p: RobustProblem, cfg: SolveConfig = SolveConfig()) -> SolveResult:
    t0 = time.perf_counter()
    deadline = t0 + cfg.time_budget
    tol = cfg.optimality_tolerance
    bb = _BranchAndBound(p)
    inc_x = bb.greedy()
    inc_x, inc_v = bb.improve(inc_x, deadline)
    n = p.n_select
    stack = [((), tuple(range(p.n_candidates)), -math.inf)]
    nodes = 0
    timed_out = False
    while stack:
        if time.perf_counter() > deadline or (cfg.node_limit is not None and nodes >= cfg.node_limit):
            timed_out = True
            break
        F, free, parent_bound = stack.pop()
        if parent_bound >= inc_v - tol:
            continue
        nodes += 1
        r = n - len(F)
        if r == 0 or len(free) == r:
            x = tuple(sorted(F + free)) if r else tuple(sorted(F))
            v = robust_objective(x, p)
            if v < inc_v - tol:
                inc_x, inc_v = x, v
            continue
        lb, scores = bb.bound(F, free)
        if lb >= inc_v - tol:
            continue
        k = free[int(np.argmin(scores))]
        rest = tuple(j for j in free if j != k)
        stack.append((F, rest, lb))
        stack.append((F + (k,), rest, lb))
    sel = evaluate(inc_x, p)
    if timed_out:
        bound = min([inc_v] + [b for _, _, b in stack])
        status = TIME_LIMIT
    else:
        bound, status = inc_v, OPTIMAL
    return SolveResult(sel, float(bound), status, nodes, time.perf_counter() - t0)


def solve(p: RobustProblem, cfg: SolveConfig = SolveConfig()) -> SolveResult:
    if cfg.method == "enumerate":
        return solve_enumerate(p, cfg.enumeration_cap)
    if cfg.method == "branch_and_bound":
        return solve_branch_and_bound(p, cfg)
    raise SolverError("method 'milp_export_only' does not solve; use build_milp and export_mps")


def verify_solution(p: RobustProblem, chosen) -> Selection:
    """Recompute the objective values of a set of candidate item ids."""
    chosen = list(chosen)
    if len(chosen) != p.n_select:
        raise SolverError(f"selection has {len(chosen)} items, the cardinality constraint requires {p.n_select}")
    pos = {it: k for k, it in enumerate(p.candidate_items)}
    try:
        x = sorted(pos[it] for it in chosen)
    except KeyError as e:
        raise SolverError(f"item {e.args[0]!r} is not a candidate") from None
    if len(set(x)) != len(x):
        raise SolverError("selection contains duplicate items")
    return evaluate(x, p)
