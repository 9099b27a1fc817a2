"""
From raw ratings to one user's robust list
==========================================

Needs MovieLens 100K: set ROBUSTREC_DATA to the directory holding
``ml-100k/u.data``.
"""
import os
from pathlib import Path

import numpy as np

from robustrec import (MfConfig, SolveConfig, SplitSpec, assemble_problem, build_deltas,
                       estimate_covariance, filter_min_ratings, load_movielens, rmse, solve,
                       split_per_user, train_mf)
from robustrec.harness import EvalConfig

root = Path(os.environ.get("ROBUSTREC_DATA", "."))
ratings = load_movielens(root / "ml-100k" / "u.data")
print(ratings.n_users, "users,", ratings.n_items, "items,", ratings.n_ratings, "ratings")

# users with at least 50 ratings, then 60/40 per user
active = filter_min_ratings(ratings, 50)
train, test = split_per_user(active, SplitSpec(0.6, seed=0))
print(active.n_users, "active users;", train.n_ratings, "train /", test.n_ratings, "test ratings")

# a fully trained model takes ~15s; 100 factors, 20 epochs
model = train_mf(train, MfConfig())
print("test RMSE:", round(rmse(model, test), 4))

cov = estimate_covariance(train, model)
print("covariance min eigenvalue:", round(cov.min_eigenvalue(), 3))
deltas = build_deltas(cov)

# one user's candidates are the items they rated in the test split
cfg = EvalConfig()
u = 0
p = assemble_problem(u, test, model, cov, deltas, cfg)
rows = test.user_index == u
truth = dict(zip(test.item_index[rows].tolist(), test.rating[rows].tolist()))
for gm, gs in [(0, 0), (10, 0), (0, 100)]:
    r = solve(p.with_budgets(gm, gs), SolveConfig(time_budget=3.0))
    picked = r.selection.items(p)
    print(f"gamma=({gm},{gs}) {r.status}: movies {[active.items[i] for i in picked]}",
          "true ratings", [truth[i] for i in picked])
