import numpy as np
import pytest

from robustrec.data import RatingDataset
from robustrec.exceptions import DataError, TrainingError
from robustrec.mf import (FactorModel, MfConfig, load_model, objective, observation_gradient,
                          observation_loss, predict, predict_many, rmse, save_model, train_mf)


def hand_model(clip=True):
    return FactorModel(
        3.0,
        np.array([0.5, -0.25]),
        np.array([0.1, -0.2, 0.0]),
        np.array([[1.0, 0.5], [-1.0, 2.0]]),
        np.array([[0.2, 0.4], [1.0, -1.0], [0.0, 0.0]]),
        clip_to_scale=clip,
    )


def test_zero_model_predicts_global_mean():
    m = FactorModel(3.7, np.zeros(2), np.zeros(3), np.zeros((2, 4)), np.zeros((3, 4)))
    assert predict(m, 1, 2) == 3.7


def test_predict_hand_computed():
    m = hand_model()
    # 3 + 0.5 + 0.1 + (1*0.2 + 0.5*0.4)
    assert predict(m, 0, 0) == pytest.approx(4.0, abs=1e-15)
    # 3 - 0.25 - 0.2 + (-1*1 + 2*-1) = -0.45 -> clipped to 1
    assert predict(m, 1, 1) == 1.0
    assert predict(hand_model(clip=False), 1, 1) == pytest.approx(-0.45, abs=1e-15)


def test_predict_clips_high():
    m = FactorModel(5.7, np.zeros(1), np.zeros(1), np.zeros((1, 1)), np.zeros((1, 1)))
    assert predict(m, 0, 0) == 5.0


def test_predict_unknown_index():
    with pytest.raises(IndexError):
        predict(hand_model(), 2, 0)


def test_predict_many_matches_predict():
    m = hand_model()
    u = np.array([0, 1, 1, 0])
    i = np.array([0, 1, 2, 2])
    assert np.allclose(predict_many(m, u, i), [predict(m, a, b) for a, b in zip(u, i)], atol=1e-15)


def test_rmse_constant_predictor():
    ds = RatingDataset.from_triples([(1, 1, 3.0), (2, 1, 5.0)])
    m = FactorModel(4.0, np.zeros(2), np.zeros(1), np.zeros((2, 1)), np.zeros((2, 1))[:1])
    assert rmse(m, ds) == 1.0


def test_rmse_zero_for_memorized():
    ds = RatingDataset.from_triples([(1, 1, 3.0), (2, 1, 5.0)])
    m = FactorModel(4.0, np.array([-1.0, 1.0]), np.zeros(1), np.zeros((2, 1)), np.zeros((1, 1)))
    assert rmse(m, ds) == 0.0


def test_rmse_permutation_invariant():
    rng = np.random.default_rng(0)
    triples = [(u, i, float(rng.integers(1, 6))) for u in range(5) for i in range(4)]
    ds = RatingDataset.from_triples(triples)
    model = train_mf(ds, MfConfig(n_factors=2, n_epochs=3))
    perm = rng.permutation(len(triples))
    shuffled = RatingDataset.from_triples([triples[k] for k in perm])
    assert rmse(model, shuffled) == pytest.approx(rmse(model, ds), abs=1e-14)


def test_rmse_empty():
    ds = RatingDataset.from_triples([])
    with pytest.raises(DataError):
        rmse(hand_model(), ds)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    k = 4
    args = dict(r=4.0, mu=3.5, bu=0.3, bi=-0.2, pu=rng.normal(size=k), qi=rng.normal(size=k), reg=0.1)
    g_bu, g_bi, g_pu, g_qi = observation_gradient(**args)
    h = 1e-6

    def fd(name, idx=None):
        plus, minus = dict(args), dict(args)
        if idx is None:
            plus[name] = args[name] + h
            minus[name] = args[name] - h
        else:
            plus[name] = args[name].copy()
            minus[name] = args[name].copy()
            plus[name][idx] += h
            minus[name][idx] -= h
        return (observation_loss(**plus) - observation_loss(**minus)) / (2 * h)

    assert fd("bu") == pytest.approx(g_bu, rel=1e-5)
    assert fd("bi") == pytest.approx(g_bi, rel=1e-5)
    for j in range(k):
        assert fd("pu", j) == pytest.approx(g_pu[j], rel=1e-5)
        assert fd("qi", j) == pytest.approx(g_qi[j], rel=1e-5)


def test_sgd_loss_non_increasing_small_lr():
    ratings = [[5, 3, 1], [4, 2, 1], [1, 1, 5]]
    ds = RatingDataset.from_triples([(u, i, float(ratings[u][i])) for u in range(3) for i in range(3)])
    losses = []
    cfg = MfConfig(n_factors=1, learning_rate=0.002, regularization=0.0, n_epochs=40, init_std=0.3)
    train_mf(ds, cfg, callback=lambda ep, m: losses.append(objective(m, ds, 0.0)))
    assert len(losses) == 40
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_single_observation_converges():
    ds = RatingDataset.from_triples([(1, 1, 2.0)])
    m = train_mf(ds, MfConfig(n_factors=1, learning_rate=0.05, regularization=0.0, n_epochs=200))
    assert predict(m, 0, 0) == pytest.approx(2.0, abs=1e-6)


def test_training_is_deterministic(tmp_path):
    rng = np.random.default_rng(1)
    triples = [(u, i, float(rng.integers(1, 6))) for u in range(10) for i in range(8) if rng.random() < 0.6]
    ds = RatingDataset.from_triples(triples)
    cfg = MfConfig(n_factors=3, n_epochs=5, seed=11)
    a, b = train_mf(ds, cfg), train_mf(ds, cfg)
    assert a.same_as(b)
    save_model(a, tmp_path / "a.json")
    save_model(b, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert not train_mf(ds, MfConfig(n_factors=3, n_epochs=5, seed=12)).same_as(a)


def test_save_load_round_trip(tmp_path):
    m = train_mf(RatingDataset.from_triples([(1, 1, 2.0), (1, 2, 4.0), (2, 2, 5.0)]),
                 MfConfig(n_factors=3, n_epochs=4))
    save_model(m, tmp_path / "m.json")
    assert load_model(tmp_path / "m.json").same_as(m)


def test_divergence_raises():
    ds = RatingDataset.from_triples([(u, i, 5.0) for u in range(5) for i in range(5)])
    with pytest.raises(TrainingError, match="diverged in epoch"):
        train_mf(ds, MfConfig(n_factors=5, learning_rate=50.0, regularization=0.0, n_epochs=5, init_std=1.0))


def test_config_validation():
    with pytest.raises(ValueError):
        MfConfig(n_factors=0)
    with pytest.raises(ValueError):
        MfConfig(learning_rate=0)
    with pytest.raises(DataError):
        train_mf(RatingDataset.from_triples([]))
