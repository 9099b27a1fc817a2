"""Item-item rating covariance: pairwise sample covariance, a completion
target and their shrinkage blend."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import RatingDataset
from .exceptions import DataError
from .mf import FactorModel

logger = logging.getLogger(__name__)


def _symmetrize(a):
    # mirror the upper triangle so a[i, j] == a[j, i] holds bit-for-bit
    return np.triu(a) + np.triu(a, 1).T


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    sigma: np.ndarray
    item_counts: np.ndarray
    pair_counts: np.ndarray
    shrinkage_weight: float

    def __post_init__(self):
        s = self.sigma
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("sigma must be square")
        if not np.array_equal(s, s.T):
            raise ValueError("sigma must be exactly symmetric")
        if not np.array_equal(self.pair_counts, self.pair_counts.T):
            raise ValueError("pair_counts must be symmetric")
        if not np.array_equal(np.diag(self.pair_counts), self.item_counts):
            raise ValueError("diagonal of pair_counts must equal item_counts")

    @property
    def n_items(self) -> int:
        return self.sigma.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.sigma)[0]) if self.n_items else 0.0


def sample_covariance(train: RatingDataset):
    """Pairwise-complete sample covariance.

    Entry ``(i, j)`` uses only the users who rated both items, with means
    over that same user set and divisor ``n_ij - 1``. Pairs with
    ``n_ij <= 1`` are recorded as 0 (see ``pair_counts`` to tell them apart).

    Returns ``(S, item_counts, pair_counts)``.
    """
    M = np.zeros((train.n_users, train.n_items))
    M[train.user_index, train.item_index] = 1.0
    R = train.dense(fill=0.0)
    n = M.T @ M
    sx = R.T @ M    # sx[i, j] = sum of r_ui over users who rated both i and j
    sxy = R.T @ R
    with np.errstate(divide="ignore", invalid="ignore"):
        S = (sxy - sx * sx.T / n) / (n - 1.0)
    S[n <= 1] = 0.0
    counts = np.rint(n).astype(np.int64)
    return _symmetrize(S), np.diag(counts).copy(), counts


def completed_matrix(train: RatingDataset, model: FactorModel) -> np.ndarray:
    """Rating matrix with observed entries kept and the rest predicted."""
    if model.user_bias.size != train.n_users or model.item_bias.size != train.n_items:
        raise DataError("model does not cover the dataset's users and items")
    C = model.predict_matrix()
    C[train.user_index, train.item_index] = train.rating
    return C


def completion_target(train: RatingDataset, model: FactorModel) -> np.ndarray:
    """Full sample covariance (divisor ``|U| - 1``) of the model-completed
    rating matrix."""
    if train.n_users < 2:
        raise DataError("completion target needs at least 2 users")
    C = completed_matrix(train, model)
    C -= C.mean(axis=0)
    return _symmetrize(C.T @ C / (train.n_users - 1.0))


def shrink(S, F, weight=0.5, item_counts=None, pair_counts=None) -> CovarianceEstimate:
    """Blend ``weight * S + (1 - weight) * F``.

    Where ``pair_counts <= 1`` the sample entry is undefined and ``F`` is
    used in its place before blending. Without ``pair_counts`` every entry
    of ``S`` is treated as defined and the stored counts are zero.
    """
    S = np.asarray(S, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    if S.shape != F.shape or S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"shape mismatch: S {S.shape}, F {F.shape}")
    if not 0.0 <= weight <= 1.0:
        raise ValueError("weight must lie in [0, 1]")
    m = S.shape[0]
    if pair_counts is None:
        S_filled = S
        pair_counts = np.zeros((m, m), dtype=np.int64)
        if item_counts is not None:
            np.fill_diagonal(pair_counts, item_counts)
    else:
        pair_counts = np.asarray(pair_counts)
        S_filled = np.where(pair_counts <= 1, F, S)
    if item_counts is None:
        item_counts = np.diag(pair_counts).copy()
    sigma = _symmetrize(weight * S_filled + (1.0 - weight) * F)
    est = CovarianceEstimate(sigma, np.asarray(item_counts), pair_counts, float(weight))
    if m and m <= 4000:
        lam = est.min_eigenvalue()
        if lam < -1e-10:
            logger.info("shrinkage covariance is not PSD: min_eigenvalue=%.4g", lam)
    return est


def estimate_covariance(train: RatingDataset, model: FactorModel, weight=0.5) -> CovarianceEstimate:
    S, n_i, n_ij = sample_covariance(train)
    F = completion_target(train, model)
    return shrink(S, F, weight, n_i, n_ij)


def save_covariance(est: CovarianceEstimate, directory):
    """Write ``sigma.npy``, ``item_counts.npy``, ``pair_counts.npy`` and
    ``meta.json`` into ``directory``. Output bytes depend only on the data."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    np.save(d / "sigma.npy", est.sigma)
    np.save(d / "item_counts.npy", est.item_counts.astype(np.int64))
    np.save(d / "pair_counts.npy", est.pair_counts.astype(np.int64))
    (d / "meta.json").write_text(json.dumps({"format": "robustrec.CovarianceEstimate", "format_version": 1,
                                             "shrinkage_weight": est.shrinkage_weight}) + "\n")


def load_covariance(directory) -> CovarianceEstimate:
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    if meta.get("format") != "robustrec.CovarianceEstimate":
        raise ValueError(f"{d} does not hold a saved covariance estimate")
    return CovarianceEstimate(np.load(d / "sigma.npy"), np.load(d / "item_counts.npy"),
                              np.load(d / "pair_counts.npy"), float(meta["shrinkage_weight"]))
