"""
A small budget sweep
====================

Mean F1 and Gini for a few budgets on a 60-user MovieLens sample. The full
experiment is ``robustrec sweep --config paper-ml100k``.
"""
import os
import sys

from robustrec import EvalConfig, MfConfig, SolveConfig, run_sweep

cfg = EvalConfig(user_sample=60, repetitions=1, gamma_mu_grid=(0, 5, 10), gamma_sigma_grid=(0, 50, 100),
                 mf=MfConfig(n_factors=100), solver=SolveConfig(time_budget=1.0))
report = run_sweep(cfg, root=os.environ.get("ROBUSTREC_DATA", "."))
sys.stdout.write(report.to_csv())
for r in report.rows:
    print(f"gamma=({r.gamma_mu:>2},{r.gamma_sigma:>3})  F1 {r.mean_f1:.4f}  Gini {r.gini:.4f}  "
          f"timeouts {r.timeout_rate:.0%}")
