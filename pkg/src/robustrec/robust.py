"""Per-user robust mean-variance selection problems.

For a candidate list ``I_u`` and a selection ``x`` (``N`` chosen positions)
the nominal objective is

    alpha * sum_{i,j in x} sigma_ij  -  (1 - alpha) * sum_{i in x} mu_i

and the robust objective adds the largest attainable deviations: the
``gamma_sigma`` largest covariance magnitudes among selected pairs (weighted
by ``alpha``) and the ``gamma_mu`` largest mean magnitudes among selected
items (weighted by ``1 - alpha``).

Selections are given as positions into ``RobustProblem.candidate_items``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .covariance import CovarianceEstimate

PAIR_MODES = ("ordered", "unordered")


@dataclass(frozen=True, eq=False)
class UncertaintyModel:
    """Deviation magnitudes and budgets.

    ``pair_mode="ordered"`` lets the covariance budget pick ordered pairs
    ``(i, j)`` and ``(j, i)`` separately (diagonal included), so it saturates
    at ``N**2``. ``"unordered"`` treats ``{i, j}`` as one deviation worth
    ``2 * delta_ij`` and saturates at ``N * (N + 1) / 2``.
    """

    delta_mu: np.ndarray
    delta_sigma: np.ndarray
    gamma_mu: int = 0
    gamma_sigma: int = 0
    pair_mode: str = "ordered"

    def __post_init__(self):
        dm = np.asarray(self.delta_mu, dtype=np.float64)
        ds = np.asarray(self.delta_sigma, dtype=np.float64)
        object.__setattr__(self, "delta_mu", dm)
        object.__setattr__(self, "delta_sigma", ds)
        if ds.shape != (dm.size, dm.size):
            raise ValueError("delta_sigma must be square and match delta_mu")
        if (dm < 0).any() or (ds < 0).any() or not (np.isfinite(dm).all() and np.isfinite(ds).all()):
            raise ValueError("deviation magnitudes must be finite and non-negative")
        if not np.array_equal(ds, ds.T):
            raise ValueError("delta_sigma must be symmetric")
        for g in (self.gamma_mu, self.gamma_sigma):
            if int(g) != g or g < 0:
                raise ValueError("budgets must be non-negative integers")
        object.__setattr__(self, "gamma_mu", int(self.gamma_mu))
        object.__setattr__(self, "gamma_sigma", int(self.gamma_sigma))
        if self.pair_mode not in PAIR_MODES:
            raise ValueError(f"pair_mode must be one of {PAIR_MODES}")

    def with_budgets(self, gamma_mu: int, gamma_sigma: int) -> "UncertaintyModel":
        return replace(self, gamma_mu=gamma_mu, gamma_sigma=gamma_sigma)

    def restrict(self, positions) -> "UncertaintyModel":
        idx = np.asarray(positions, dtype=np.int64)
        return replace(self, delta_mu=self.delta_mu[idx],
                       delta_sigma=self.delta_sigma[np.ix_(idx, idx)])


@dataclass(frozen=True, eq=False)
class RobustProblem:
    candidate_items: tuple
    mu: np.ndarray
    sigma: np.ndarray
    uncertainty: UncertaintyModel
    n_select: int
    alpha: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "candidate_items", tuple(self.candidate_items))
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        m = len(self.candidate_items)
        if mu.shape != (m,) or sigma.shape != (m, m):
            raise ValueError("mu / sigma shapes do not match the candidate list")
        if self.uncertainty.delta_mu.size != m:
            raise ValueError("uncertainty model does not match the candidate list")
        if not np.array_equal(sigma, sigma.T):
            raise ValueError("sigma must be symmetric")
        if not 1 <= self.n_select <= m:
            raise ValueError(f"need 1 <= N <= |I_u|, got N={self.n_select}, |I_u|={m}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    @property
    def n_candidates(self) -> int:
        return len(self.candidate_items)

    def with_budgets(self, gamma_mu: int, gamma_sigma: int) -> "RobustProblem":
        return replace(self, uncertainty=self.uncertainty.with_budgets(gamma_mu, gamma_sigma))


@dataclass(frozen=True)
class Selection:
    """Chosen candidate positions with their objective values."""

    chosen: tuple
    nominal_value: float
    worst_case_value: float

    def items(self, problem: RobustProblem) -> tuple:
        return tuple(problem.candidate_items[k] for k in self.chosen)


def build_deltas(cov: CovarianceEstimate, sigma_scale: float = 0.2,
                 negative_covariance: str = "abs") -> UncertaintyModel:
    """Deviation magnitudes from a covariance estimate (budgets left at 0).

    ``delta_mu[i] = sqrt(sigma_ii) / sqrt(max(1, n_i))`` and
    ``delta_sigma[i, j] = sigma_scale * |sigma_ij| / sqrt(max(1, n_ij))``.
    ``negative_covariance="clip"`` uses ``max(sigma_ij, 0)`` instead of the
    absolute value.
    """
    if not sigma_scale > 0:
        raise ValueError("sigma_scale must be > 0")
    d = np.diag(cov.sigma)
    if (d < 0).any():
        raise ValueError("covariance estimate has a negative diagonal entry")
    if negative_covariance == "abs":
        mag = np.abs(cov.sigma)
    elif negative_covariance == "clip":
        mag = np.maximum(cov.sigma, 0.0)
    else:
        raise ValueError("negative_covariance must be 'abs' or 'clip'")
    delta_mu = np.sqrt(d) / np.sqrt(np.maximum(1, cov.item_counts))
    delta_sigma = sigma_scale * mag / np.sqrt(np.maximum(1, cov.pair_counts))
    return UncertaintyModel(delta_mu, delta_sigma)


def _pos(x) -> np.ndarray:
    if isinstance(x, Selection):
        x = x.chosen
    return np.asarray(sorted(x), dtype=np.int64)


def nominal_objective(x, p: RobustProblem) -> float:
    s = _pos(x)
    var = p.sigma[np.ix_(s, s)].sum()
    return float(p.alpha * var - (1.0 - p.alpha) * p.mu[s].sum())


def _top_sum(values: np.ndarray, gamma: int) -> float:
    if gamma <= 0 or values.size == 0:
        return 0.0
    return float(np.sort(values)[::-1][:gamma].sum())


def pair_deviations(x, delta_sigma: np.ndarray, pair_mode: str = "ordered"):
    """Deviation magnitudes of the selected pairs, with the pair each
    belongs to. Returns ``(values, pairs)``; ``pairs`` is ``(k, 2)`` in
    candidate positions."""
    s = _pos(x)
    ii, jj = np.meshgrid(s, s, indexing="ij")
    if pair_mode == "ordered":
        pairs = np.column_stack([ii.ravel(), jj.ravel()])
        vals = delta_sigma[pairs[:, 0], pairs[:, 1]]
    else:
        a, b = np.triu_indices(s.size)
        pairs = np.column_stack([s[a], s[b]])
        vals = delta_sigma[pairs[:, 0], pairs[:, 1]] * np.where(a == b, 1.0, 2.0)
    return vals, pairs


def worst_case_penalty_mu(x, delta_mu, gamma_mu: int) -> float:
    """Largest total mean deviation over at most ``gamma_mu`` selected items."""
    return _top_sum(np.asarray(delta_mu)[_pos(x)], gamma_mu)


def worst_case_penalty_sigma(x, delta_sigma, gamma_sigma: int, pair_mode: str = "ordered") -> float:
    """Largest total covariance deviation over at most ``gamma_sigma``
    selected pairs."""
    vals, _ = pair_deviations(x, np.asarray(delta_sigma), pair_mode)
    return _top_sum(vals, gamma_sigma)


def worst_case_subset_mu(x, delta_mu, gamma_mu: int) -> tuple:
    """Positions attaining :func:`worst_case_penalty_mu` (ties to the
    smaller position)."""
    s = _pos(x)
    vals = np.asarray(delta_mu)[s]
    order = np.lexsort((s, -vals))
    return tuple(int(k) for k in s[order[:max(0, gamma_mu)]])


def worst_case_subset_sigma(x, delta_sigma, gamma_sigma: int, pair_mode: str = "ordered") -> tuple:
    vals, pairs = pair_deviations(x, np.asarray(delta_sigma), pair_mode)
    order = np.lexsort((pairs[:, 1], pairs[:, 0], -vals))
    return tuple((int(a), int(b)) for a, b in pairs[order[:max(0, gamma_sigma)]])


def robust_objective(x, p: RobustProblem) -> float:
    u = p.uncertainty
    return float(nominal_objective(x, p)
                 + p.alpha * worst_case_penalty_sigma(x, u.delta_sigma, u.gamma_sigma, u.pair_mode)
                 + (1.0 - p.alpha) * worst_case_penalty_mu(x, u.delta_mu, u.gamma_mu))


def evaluate(x, p: RobustProblem) -> Selection:
    s = tuple(int(k) for k in _pos(x))
    return Selection(s, nominal_objective(s, p), robust_objective(s, p))


def dual_solution(active: Sequence[float], gamma: int):
    """Closed-form optimum of the dual of the top-``gamma`` selection LP.

    Minimizes ``gamma * y + sum(p)`` subject to ``active[k] <= y + p[k]``,
    ``p >= 0``, ``y >= 0``. The optimal ``y`` is the ``gamma``-th largest
    active value (0 when fewer than ``gamma`` values exist; the maximum
    when ``gamma == 0``). Returns ``(value, y, p)``.
    """
    a = np.asarray(active, dtype=np.float64)
    if a.size == 0:
        return 0.0, 0.0, a.copy()
    desc = np.sort(a)[::-1]
    if gamma <= 0:
        y = float(max(desc[0], 0.0))
    elif gamma > a.size:
        y = 0.0
    else:
        y = float(max(desc[gamma - 1], 0.0))
    p = np.maximum(a - y, 0.0)
    return float(gamma * y + p.sum()), y, p


def dual_penalty_mu(x, delta_mu, gamma_mu: int) -> float:
    """Dual value for the mean budget: one constraint per candidate with
    left-hand side ``delta_mu[i] * x_i``."""
    dm = np.asarray(delta_mu, dtype=np.float64)
    xv = np.zeros(dm.size)
    xv[_pos(x)] = 1.0
    return dual_solution(dm * xv, gamma_mu)[0]


def dual_penalty_sigma(x, delta_sigma, gamma_sigma: int, pair_mode: str = "ordered") -> float:
    """Dual value for the covariance budget over all candidate pairs, with
    left-hand side ``delta_sigma[i, j] * x_i * x_j``."""
    ds = np.asarray(delta_sigma, dtype=np.float64)
    xv = np.zeros(ds.shape[0])
    xv[_pos(x)] = 1.0
    prod = ds * np.outer(xv, xv)
    if pair_mode == "ordered":
        active = prod.ravel()
    else:
        a, b = np.triu_indices(ds.shape[0])
        active = prod[a, b] * np.where(a == b, 1.0, 2.0)
    return dual_solution(active, gamma_sigma)[0]
