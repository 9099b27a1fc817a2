"""
Nominal and worst-case value of a recommendation list
=====================================================

A user has six candidate items. We pick three, trading predicted rating
against rating covariance, and see how budgets of uncertainty change what a
fixed list is worth.
"""
from importlib import resources

import numpy as np

from robustrec import load_problem, nominal_objective, robust_objective
from robustrec.robust import worst_case_subset_mu, worst_case_subset_sigma

# the bundled fixture carries predicted ratings, a covariance matrix and
# the deviation magnitudes for every item and item pair
p = load_problem(resources.files("robustrec").joinpath("fixtures/six_items.json"))
print("candidates:", p.candidate_items)
print("predicted ratings:", np.round(p.mu, 3))

x = (0, 3, 5)
print("list:", [p.candidate_items[k] for k in x])
print("nominal value:", round(nominal_objective(x, p), 4))

# with a budget of g, at most g predicted ratings fall by their deviation
for g in range(4):
    q = p.with_budgets(g, 0)
    print(f"gamma_mu={g}: worst case {robust_objective(x, q):.4f}",
          "at positions", worst_case_subset_mu(x, q.uncertainty.delta_mu, g))

# covariance deviations act on ordered pairs, so 9 pairs saturate a 3-item list
for g in (0, 1, 4, 9, 20):
    q = p.with_budgets(0, g)
    print(f"gamma_sigma={g}: worst case {robust_objective(x, q):.4f}")
print("worst position pairs for gamma_sigma=4:", worst_case_subset_sigma(x, p.uncertainty.delta_sigma, 4))
