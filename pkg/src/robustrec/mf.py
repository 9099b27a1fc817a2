"""Biased matrix factorization trained by stochastic gradient descent.

The prediction for user ``u`` and item ``i`` is

    global_mean + b_u + b_i + p_u . q_i

and each SGD step descends the per-observation loss

    0.5 * err**2 + 0.5 * reg * (b_u**2 + b_i**2 + |p_u|**2 + |q_i|**2)

with ``err = r_ui - prediction`` (unclipped).
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import RatingDataset
from .exceptions import DataError, TrainingError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class MfConfig:
    n_factors: int = 100
    learning_rate: float = 0.01
    regularization: float = 0.1
    n_epochs: int = 20
    init_std: float = 0.1
    seed: int = 0
    clip_to_scale: bool = True

    def __post_init__(self):
        if self.n_factors < 1:
            raise ValueError("n_factors must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.regularization < 0:
            raise ValueError("regularization must be >= 0")
        if self.n_epochs < 1:
            raise ValueError("n_epochs must be >= 1")


@dataclass(frozen=True, eq=False)
class FactorModel:
    global_mean: float
    user_bias: np.ndarray
    item_bias: np.ndarray
    user_factors: np.ndarray
    item_factors: np.ndarray
    scale: tuple[float, float] = (1.0, 5.0)
    clip_to_scale: bool = True

    def __post_init__(self):
        if self.user_factors.shape[1] != self.item_factors.shape[1]:
            raise ValueError("user and item factors must share the inner dimension")
        if self.user_factors.shape[0] != self.user_bias.size or self.item_factors.shape[0] != self.item_bias.size:
            raise ValueError("bias and factor sizes disagree")

    @property
    def n_factors(self) -> int:
        return self.user_factors.shape[1]

    def raw_scores(self) -> np.ndarray:
        """Unclipped |U| x |I| prediction matrix."""
        return (self.global_mean + self.user_bias[:, None] + self.item_bias[None, :]
                + self.user_factors @ self.item_factors.T)

    def predict_matrix(self) -> np.ndarray:
        s = self.raw_scores()
        return np.clip(s, *self.scale) if self.clip_to_scale else s

    def same_as(self, other: "FactorModel") -> bool:
        return (self.global_mean == other.global_mean and self.scale == other.scale
                and self.clip_to_scale == other.clip_to_scale
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("user_bias", "item_bias", "user_factors", "item_factors")))


def predict(model: FactorModel, user_index: int, item_index: int) -> float:
    if not (0 <= user_index < model.user_bias.size):
        raise IndexError(f"unknown user index {user_index}")
    if not (0 <= item_index < model.item_bias.size):
        raise IndexError(f"unknown item index {item_index}")
    s = (model.global_mean + model.user_bias[user_index] + model.item_bias[item_index]
         + float(model.user_factors[user_index] @ model.item_factors[item_index]))
    if model.clip_to_scale:
        s = min(max(s, model.scale[0]), model.scale[1])
    return float(s)


def predict_many(model: FactorModel, user_index, item_index) -> np.ndarray:
    u = np.asarray(user_index)
    i = np.asarray(item_index)
    s = (model.global_mean + model.user_bias[u] + model.item_bias[i]
         + np.einsum("nk,nk->n", model.user_factors[u], model.item_factors[i]))
    return np.clip(s, *model.scale) if model.clip_to_scale else s


def rmse(model: FactorModel, test: RatingDataset) -> float:
    if test.n_ratings == 0:
        raise DataError("cannot compute RMSE on an empty test set")
    err = predict_many(model, test.user_index, test.item_index) - test.rating
    return float(np.sqrt(np.mean(err ** 2)))


def observation_loss(r, mu, bu, bi, pu, qi, reg) -> float:
    err = r - (mu + bu + bi + pu @ qi)
    return 0.5 * err ** 2 + 0.5 * reg * (bu ** 2 + bi ** 2 + pu @ pu + qi @ qi)


def observation_gradient(r, mu, bu, bi, pu, qi, reg):
    """Gradient of :func:`observation_loss` w.r.t. ``(bu, bi, pu, qi)``."""
    err = r - (mu + bu + bi + pu @ qi)
    return (-err + reg * bu, -err + reg * bi, -err * qi + reg * pu, -err * pu + reg * qi)


def objective(model: FactorModel, train: RatingDataset, reg: float) -> float:
    """Sum of squared-error halves plus the per-observation penalties that
    SGD descends, evaluated over all of ``train``."""
    u, i = train.user_index, train.item_index
    pu, qi = model.user_factors[u], model.item_factors[i]
    bu, bi = model.user_bias[u], model.item_bias[i]
    err = train.rating - (model.global_mean + bu + bi + np.einsum("nk,nk->n", pu, qi))
    pen = bu ** 2 + bi ** 2 + np.einsum("nk,nk->n", pu, pu) + np.einsum("nk,nk->n", qi, qi)
    return float(0.5 * np.sum(err ** 2) + 0.5 * reg * np.sum(pen))


def train_mf(train: RatingDataset, config: MfConfig = MfConfig(), callback=None) -> FactorModel:
    """Fit a :class:`FactorModel` to ``train``.

    ``callback(epoch, model)`` is invoked after every epoch (the model shares
    arrays with the one being trained; copy what you keep).
    """
    if train.n_ratings == 0:
        raise DataError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    k = config.n_factors
    P = rng.normal(0.0, config.init_std, size=(train.n_users, k))
    Q = rng.normal(0.0, config.init_std, size=(train.n_items, k))
    bu = np.zeros(train.n_users)
    bi = np.zeros(train.n_items)
    mu = float(np.mean(train.rating))
    lr, reg = config.learning_rate, config.regularization
    users = train.user_index.tolist()
    items = train.item_index.tolist()
    ratings = train.rating.tolist()
    n = train.n_ratings

    def snapshot():
        return FactorModel(mu, bu, bi, P, Q, train.scale, config.clip_to_scale)

    for epoch in range(config.n_epochs):
        with np.errstate(over="ignore", invalid="ignore"):
            for t in rng.permutation(n).tolist():
                u, i = users[t], items[t]
                pu, qi = P[u], Q[i]
                err = ratings[t] - (mu + bu[u] + bi[i] + pu @ qi)
                bu[u] += lr * (err - reg * bu[u])
                bi[i] += lr * (err - reg * bi[i])
                pu_old = pu.copy()
                pu += lr * (err * qi - reg * pu)
                qi += lr * (err * pu_old - reg * qi)
        if not (np.isfinite(P).all() and np.isfinite(Q).all()
                and np.isfinite(bu).all() and np.isfinite(bi).all()):
            raise TrainingError(f"SGD diverged in epoch {epoch + 1}")
        logger.debug("mf epoch=%d done", epoch + 1)
        if callback is not None:
            callback(epoch + 1, snapshot())
    return FactorModel(mu, bu.copy(), bi.copy(), P.copy(), Q.copy(), train.scale,
                       config.clip_to_scale)


def model_to_dict(model: FactorModel) -> dict:
    return {
        "format": "robustrec.FactorModel",
        "format_version": FORMAT_VERSION,
        "global_mean": model.global_mean,
        "scale": list(model.scale),
        "clip_to_scale": model.clip_to_scale,
        "user_bias": model.user_bias.tolist(),
        "item_bias": model.item_bias.tolist(),
        "user_factors": model.user_factors.tolist(),
        "item_factors": model.item_factors.tolist(),
    }


def model_from_dict(d: dict) -> FactorModel:
    if d.get("format") != "robustrec.FactorModel":
        raise ValueError("not a serialized FactorModel")
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {d.get('format_version')}")
    k = len(d["user_factors"][0]) if d["user_factors"] else len(d["item_factors"][0])
    return FactorModel(
        float(d["global_mean"]),
        np.asarray(d["user_bias"], dtype=np.float64),
        np.asarray(d["item_bias"], dtype=np.float64),
        np.asarray(d["user_factors"], dtype=np.float64).reshape(-1, k),
        np.asarray(d["item_factors"], dtype=np.float64).reshape(-1, k),
        tuple(d["scale"]),
        bool(d["clip_to_scale"]),
    )


def save_model(model: FactorModel, path):
    """Write ``model`` as JSON. Floats use Python's shortest round-trip repr,
    so reloading is exact."""
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path) -> FactorModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def config_dict(config: MfConfig) -> dict:
    return asdict(config)
