"""Robust mean-variance selection of top-N recommendation lists."""
from .covariance import CovarianceEstimate, estimate_covariance, load_covariance, save_covariance
from .data import (RatingDataset, SplitSpec, filter_min_ratings, load_movielens, load_yahoo_r3,
                   split_per_user)
from .exceptions import DataError, RobustRecError, SolverError, TrainingError
from .harness import EvalConfig, SweepReport, assemble_problem, load_config, run_sweep
from .metrics import f1_score, gini_coefficient
from .mf import FactorModel, MfConfig, load_model, predict, rmse, save_model, train_mf
from .milp import build_milp
from .mps import export_mps, read_mps
from .problem_io import load_problem, save_problem
from .robust import (RobustProblem, Selection, UncertaintyModel, build_deltas, nominal_objective,
                     robust_objective, worst_case_penalty_mu, worst_case_penalty_sigma)
from .solver import SolveConfig, SolveResult, solve, solve_branch_and_bound, solve_enumerate, verify_solution

__version__ = "0.1.0"
