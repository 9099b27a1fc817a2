"""JSON documents for single-user :class:`RobustProblem` instances."""
from __future__ import annotations

import json
from pathlib import Path

from .robust import RobustProblem, UncertaintyModel

SCHEMA = "robustrec.RobustProblem"
SCHEMA_VERSION = 1


def problem_to_dict(p: RobustProblem) -> dict:
    u = p.uncertainty
    return {
        "schema": SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "candidate_items": list(p.candidate_items),
        "mu": p.mu.tolist(),
        "sigma": p.sigma.tolist(),
        "delta_mu": u.delta_mu.tolist(),
        "delta_sigma": u.delta_sigma.tolist(),
        "gamma_mu": u.gamma_mu,
        "gamma_sigma": u.gamma_sigma,
        "pair_mode": u.pair_mode,
        "n_select": p.n_select,
        "alpha": p.alpha,
    }


def problem_from_dict(d: dict) -> RobustProblem:
    if d.get("schema") != SCHEMA or d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"expected a {SCHEMA} document with schema_version {SCHEMA_VERSION}")
    unc = UncertaintyModel(d["delta_mu"], d["delta_sigma"], d.get("gamma_mu", 0),
                           d.get("gamma_sigma", 0), d.get("pair_mode", "ordered"))
    return RobustProblem(tuple(d["candidate_items"]), d["mu"], d["sigma"], unc,
                         int(d["n_select"]), float(d.get("alpha", 0.2)))


def save_problem(p: RobustProblem, path):
    Path(path).write_text(json.dumps(problem_to_dict(p), indent=1) + "\n", encoding="utf-8")


def load_problem(path) -> RobustProblem:
    return problem_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
