import os
from pathlib import Path

import numpy as np
import pytest

from robustrec.robust import RobustProblem, UncertaintyModel

DATA_ROOT = Path(os.environ.get("ROBUSTREC_DATA", "/root/data"))
ML_PATH = DATA_ROOT / "ml-100k" / "u.data"
YAHOO_TRAIN = DATA_ROOT / "yahoo-r3" / "ydata-ymusic-rating-study-v1_0-train.txt"
YAHOO_TEST = DATA_ROOT / "yahoo-r3" / "ydata-ymusic-rating-study-v1_0-test.txt"

needs_movielens = pytest.mark.skipif(not ML_PATH.is_file(), reason=f"MovieLens 100K not found at {ML_PATH}")
needs_yahoo = pytest.mark.skipif(not (YAHOO_TRAIN.is_file() and YAHOO_TEST.is_file()),
                                 reason="Yahoo! R3 requires registration and is not available locally")


def sym(a):
    a = np.asarray(a, dtype=float)
    return np.triu(a) + np.triu(a, 1).T


def random_problem(rng, m, n, alpha=0.2, gamma_mu=0, gamma_sigma=0, pair_mode="ordered"):
    """Random instance with indefinite covariance and non-negative deltas."""
    A = rng.normal(size=(m, m))
    sigma = A @ A.T / m * rng.uniform(0.2, 2.0)
    if rng.random() < 0.5:
        sigma = sigma - rng.uniform(0, 0.5) * sigma.mean()
    mu = rng.uniform(1, 5, size=m)
    dmu = rng.uniform(0, 1, size=m)
    dsig = sym(rng.uniform(0, 0.3, size=(m, m)))
    unc = UncertaintyModel(dmu, dsig, gamma_mu, gamma_sigma, pair_mode)
    return RobustProblem(tuple(range(m)), mu, sym(sigma), unc, n, alpha)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance summary: test_acceptance records one line per criterion here
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES, key=str):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
