"""
Handing the problem to an external MILP solver
==============================================

The robust problem has an exact mixed-integer linear form. We write it as a
fixed-format MPS file, read it back, and, when scipy is installed, solve it
with scipy's HiGHS interface to compare against enumeration.
"""
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np

from robustrec import build_milp, export_mps, load_problem, read_mps, solve_enumerate
from robustrec.milp import expected_counts

p = load_problem(resources.files("robustrec").joinpath("fixtures/six_items.json"))
inst = build_milp(p, "SIXITEMS")
print("variables, constraints:", inst.n_variables, inst.n_constraints,
      "expected", expected_counts(p.n_candidates))

path = Path(tempfile.mkdtemp()) / "six_items.mps"
export_mps(inst, path)
print(path.read_text().splitlines()[:12])
back = read_mps(path)
print("read back:", back.n_variables, "variables")

try:
    from scipy.optimize import Bounds, LinearConstraint, milp
except ImportError:
    print("scipy not installed; skipping the external solve")
else:
    n = back.n_variables
    c = np.zeros(n)
    for k, v in back.objective:
        c[k] = v
    A = np.zeros((back.n_constraints, n))
    lo = np.full(back.n_constraints, -np.inf)
    hi = np.full(back.n_constraints, np.inf)
    for r, con in enumerate(back.constraints):
        for k, v in con.terms:
            A[r, k] = v
        if con.sense in "LE":
            hi[r] = con.rhs
        if con.sense in "GE":
            lo[r] = con.rhs
    ub = [np.inf if v.upper is None else v.upper for v in back.variables]
    res = milp(c, constraints=LinearConstraint(A, lo, hi), bounds=Bounds(0, ub),
               integrality=[v.kind == "binary" for v in back.variables])
    print(f"HiGHS optimum {res.fun:.6f}, enumeration {solve_enumerate(p).value:.6f}")
