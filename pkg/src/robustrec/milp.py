"""Mixed-integer linear form of the robust selection problem.

The inner worst-case maximizations are replaced by their LP duals (variables
``y, p`` for the mean budget, ``z, q`` for the covariance budget) and every
product ``x_i x_j`` by a continuous ``w_ij`` under the standard
linearization ``w <= x_i``, ``w <= x_j``, ``w >= x_i + x_j - 1``, ``w >= 0``
(for ``i == j`` this pins ``w_ii = x_i``).

Variable layout (ordered pair mode, ``m`` candidates)::

    x_i      m      binary
    w_ij     m^2    continuous
    p_i      m      continuous >= 0
    q_ij     m^2    continuous >= 0
    y, z     2      continuous >= 0

Constraints: one cardinality row, ``3 m^2`` linearization rows, ``m``
mean-dual rows and ``m^2`` covariance-dual rows. In unordered mode ``w`` and
``q`` are indexed by ``i <= j`` instead.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .robust import RobustProblem

SCHEMA_VERSION = 1
MAX_CANDIDATES = 1000  # keeps every generated name within 8 characters


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = "continuous"  # "binary" | "continuous"
    lower: float = 0.0
    upper: float | None = None


@dataclass(frozen=True)
class LinearConstraint:
    name: str
    terms: tuple  # ((variable index, coefficient), ...)
    sense: str    # "L" (<=), "G" (>=), "E" (=)
    rhs: float = 0.0


@dataclass(frozen=True)
class MilpInstance:
    """Minimize ``sum(c * v for v, c in objective)`` subject to the
    constraints and variable bounds."""

    name: str
    variables: tuple
    objective: tuple
    constraints: tuple
    index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.index:
            object.__setattr__(self, "index", {v.name: k for k, v in enumerate(self.variables)})

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def var(self, name) -> int:
        return self.index[name]

    def objective_value(self, values) -> float:
        return float(sum(c * values[k] for k, c in self.objective))

    def max_violation(self, values) -> float:
        """Largest bound or constraint violation of a full assignment."""
        worst = 0.0
        for k, v in enumerate(self.variables):
            worst = max(worst, v.lower - values[k])
            if v.upper is not None:
                worst = max(worst, values[k] - v.upper)
            if v.kind == "binary":
                worst = max(worst, abs(values[k] - round(values[k])))
        for con in self.constraints:
            lhs = sum(c * values[k] for k, c in con.terms)
            if con.sense == "L":
                worst = max(worst, lhs - con.rhs)
            elif con.sense == "G":
                worst = max(worst, con.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - con.rhs))
        return float(worst)


def expected_counts(m: int, pair_mode: str = "ordered") -> tuple[int, int]:
    """``(n_variables, n_constraints)`` of :func:`build_milp` for ``m``
    candidates."""
    pairs = m * m if pair_mode == "ordered" else m * (m + 1) // 2
    return m + pairs + m + pairs + 2, 1 + 3 * pairs + m + pairs


def build_milp(p: RobustProblem, name: str = "ROBUSTRS") -> MilpInstance:
    m = p.n_candidates
    if m > MAX_CANDIDATES:
        raise ValueError(f"at most {MAX_CANDIDATES} candidates are supported, got {m}")
    u = p.uncertainty
    a, b = p.alpha, 1.0 - p.alpha
    ordered = u.pair_mode == "ordered"
    variables = []
    obj = {}

    def add(var, cost=0.0):
        variables.append(var)
        if cost != 0.0:
            obj[len(variables) - 1] = cost
        return len(variables) - 1

    X = [add(Variable(f"X{i}", "binary", 0.0, 1.0), -b * p.mu[i]) for i in range(m)]
    # unordered mode keeps i <= j and doubles the off-diagonal weights
    mult = {(i, j): 1.0 if ordered or i == j else 2.0
            for i in range(m) for j in range(m) if ordered or i <= j}
    W = {ij: add(Variable(f"W{ij[0] * m + ij[1]}"), a * k * p.sigma[ij]) for ij, k in mult.items()}
    P = [add(Variable(f"P{i}"), b) for i in range(m)]
    Q = {ij: add(Variable(f"Q{ij[0] * m + ij[1]}"), a) for ij in mult}
    Y = add(Variable("Y"), b * u.gamma_mu)
    Z = add(Variable("Z"), a * u.gamma_sigma)

    def terms(*pairs):
        merged = {}
        for k, c in pairs:
            merged[k] = merged.get(k, 0.0) + float(c)
        return tuple((k, c) for k, c in merged.items() if c != 0.0)

    cons = [LinearConstraint("CARD", terms(*((x, 1.0) for x in X)), "E", float(p.n_select))]
    for (i, j), w in W.items():
        k = i * m + j
        cons.append(LinearConstraint(f"MA{k}", terms((w, 1.0), (X[i], -1.0)), "L", 0.0))
        cons.append(LinearConstraint(f"MB{k}", terms((w, 1.0), (X[j], -1.0)), "L", 0.0))
        cons.append(LinearConstraint(f"MC{k}", terms((w, 1.0), (X[i], -1.0), (X[j], -1.0)), "G", -1.0))
    for i in range(m):
        cons.append(LinearConstraint(
            f"DM{i}", terms((X[i], u.delta_mu[i]), (Y, -1.0), (P[i], -1.0)), "L", 0.0))
    for (i, j), q in Q.items():
        cons.append(LinearConstraint(
            f"DS{i * m + j}", terms((W[i, j], u.delta_sigma[i, j] * mult[i, j]), (Z, -1.0), (q, -1.0)),
            "L", 0.0))
    return MilpInstance(name, tuple(variables), tuple(sorted(obj.items())), tuple(cons))


def assignment_for(p: RobustProblem, inst: MilpInstance, chosen) -> np.ndarray:
    """Full variable assignment for a selection with the closed-form dual
    values, so that the MILP objective equals the robust objective."""
    from .robust import dual_solution, pair_deviations

    m = p.n_candidates
    u = p.uncertainty
    ordered = u.pair_mode == "ordered"
    x = np.zeros(m)
    x[list(chosen)] = 1.0
    vals = np.zeros(inst.n_variables)
    for i in range(m):
        vals[inst.var(f"X{i}")] = x[i]
    for i in range(m):
        for j in range(m):
            if ordered or i <= j:
                vals[inst.var(f"W{i * m + j}")] = x[i] * x[j]
    _, y, pvec = dual_solution(u.delta_mu * x, u.gamma_mu)
    vals[inst.var("Y")] = y
    for i in range(m):
        vals[inst.var(f"P{i}")] = pvec[i]
    prod = u.delta_sigma * np.outer(x, x)
    if ordered:
        keys = [(i, j) for i in range(m) for j in range(m)]
        active = [prod[i, j] for i, j in keys]
    else:
        keys = [(i, j) for i in range(m) for j in range(i, m)]
        active = [prod[i, j] * (1.0 if i == j else 2.0) for i, j in keys]
    _, z, qvec = dual_solution(active, u.gamma_sigma)
    vals[inst.var("Z")] = z
    for (i, j), qv in zip(keys, qvec):
        vals[inst.var(f"Q{i * m + j}")] = qv
    return vals


def milp_to_dict(inst: MilpInstance) -> dict:
    return {
        "schema": "robustrec.MilpInstance",
        "schema_version": SCHEMA_VERSION,
        "name": inst.name,
        "variables": [[v.name, v.kind, v.lower, v.upper] for v in inst.variables],
        "objective": [[k, c] for k, c in inst.objective],
        "constraints": [[c.name, [[k, v] for k, v in c.terms], c.sense, c.rhs]
                        for c in inst.constraints],
    }


def milp_from_dict(d: dict) -> MilpInstance:
    if d.get("schema") != "robustrec.MilpInstance" or d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError("not a version-1 MilpInstance document")
    return MilpInstance(
        d["name"],
        tuple(Variable(n, k, lo, up) for n, k, lo, up in d["variables"]),
        tuple((int(k), float(c)) for k, c in d["objective"]),
        tuple(LinearConstraint(n, tuple((int(k), float(v)) for k, v in t), s, float(r))
              for n, t, s, r in d["constraints"]),
    )


def dump_json(inst: MilpInstance, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(milp_to_dict(inst), fh, indent=1)
