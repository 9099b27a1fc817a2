"""Fixed-format MPS export and import for :class:`MilpInstance`.

Fields are placed in the classic columns (2-3, 5-12, 15-22, 25-36, 40-47,
50-61), one coefficient per line, so names are limited to 8 characters and
numbers to 12. A number whose shortest round-trip repr is longer than 12
characters is rounded to the most significant digits that fit.
"""
from __future__ import annotations

import math
from pathlib import Path

from .milp import LinearConstraint, MilpInstance, Variable

OBJ_ROW = "OBJ"


def format_number(v: float) -> str:
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"cannot write non-finite number {v}")
    if v == 0.0:
        return "0"
    s = repr(v)
    if s.endswith(".0"):
        s = s[:-2]
    if len(s) <= 12:
        return s
    for digits in range(12, 0, -1):
        s = f"{v:.{digits}g}"
        if len(s) <= 12:
            return s
    raise ValueError(f"cannot fit {v!r} into 12 characters")


def _line(f1="", f2="", f3="", f4="", f5="", f6=""):
    for name in (f2, f3, f5):
        if len(name) > 8:
            raise ValueError(f"name {name!r} exceeds 8 characters")
    s = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:<12}   {f5:<8}  {f6:<12}"
    return s.rstrip()


def to_mps(inst: MilpInstance) -> str:
    """Render ``inst`` as fixed-format MPS text (minimization)."""
    out = [f"{'NAME':<14}{inst.name}".rstrip(), "OBJSENSE", "    MIN", "ROWS", _line("N", OBJ_ROW)]
    for con in inst.constraints:
        out.append(_line(con.sense, con.name))
    out.append("COLUMNS")
    by_var = [[] for _ in inst.variables]
    for k, c in inst.objective:
        by_var[k].append((OBJ_ROW, c))
    for con in inst.constraints:
        for k, c in con.terms:
            by_var[k].append((con.name, c))
    in_int = False
    marker = 0
    for k, var in enumerate(inst.variables):
        is_int = var.kind == "binary"
        if is_int != in_int:
            out.append(_line("", f"MARKER{marker:02d}"[:8], "'MARKER'", "",
                             "'INTORG'" if is_int else "'INTEND'"))
            marker += 1
            in_int = is_int
        entries = by_var[k] or [(OBJ_ROW, 0.0)]
        for row, c in entries:
            out.append(_line("", var.name, row, format_number(c)))
    if in_int:
        out.append(_line("", f"MARKER{marker:02d}"[:8], "'MARKER'", "", "'INTEND'"))
    out.append("RHS")
    for con in inst.constraints:
        if con.rhs != 0.0:
            out.append(_line("", "RHS", con.name, format_number(con.rhs)))
    out.append("BOUNDS")
    for var in inst.variables:
        if var.kind == "binary" and var.lower == 0.0 and var.upper == 1.0:
            out.append(_line("UP", "BND", var.name, "1"))
            continue
        if var.lower != 0.0:
            out.append(_line("LO", "BND", var.name, format_number(var.lower)))
        if var.upper is not None:
            out.append(_line("UP", "BND", var.name, format_number(var.upper)))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def export_mps(inst: MilpInstance, path):
    Path(path).write_text(to_mps(inst), encoding="ascii")


def parse_mps(text: str) -> MilpInstance:
    """Read MPS text written by :func:`to_mps` (or any fixed-format file
    using the same subset: N/L/G/E rows, integer markers, RHS, LO/UP
    bounds)."""
    name = ""
    rows = {}
    row_order = []
    obj_row = None
    var_names, var_kind = [], []
    var_idx = {}
    coef = {}
    obj = {}
    rhs = {}
    lower, upper = {}, {}
    section = None
    integer = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0]
            if section == "NAME":
                name = head[1] if len(head) > 1 else ""
            elif section == "ENDATA":
                break
            continue
        tok = raw.split()
        if section == "OBJSENSE":
            if tok[0] not in ("MIN", "MINIMIZE"):
                raise ValueError(f"line {lineno}: only minimization is supported")
        elif section == "ROWS":
            sense, rname = tok
            if sense == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            rows[rname] = sense
            row_order.append(rname)
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1] == "'MARKER'":
                integer = tok[2] == "'INTORG'"
                continue
            vname = tok[0]
            if vname not in var_idx:
                var_idx[vname] = len(var_names)
                var_names.append(vname)
                var_kind.append("binary" if integer else "continuous")
            k = var_idx[vname]
            for rname, val in zip(tok[1::2], tok[2::2]):
                if rname == obj_row:
                    obj[k] = float(val)
                elif rname in rows:
                    coef.setdefault(rname, []).append((k, float(val)))
                else:
                    raise ValueError(f"line {lineno}: unknown row {rname!r}")
        elif section == "RHS":
            for rname, val in zip(tok[1::2], tok[2::2]):
                rhs[rname] = float(val)
        elif section == "BOUNDS":
            btype, _, vname, *val = tok
            k = var_idx[vname]
            if btype == "UP":
                upper[k] = float(val[0])
            elif btype == "LO":
                lower[k] = float(val[0])
            elif btype == "BV":
                lower[k], upper[k] = 0.0, 1.0
            else:
                raise ValueError(f"line {lineno}: unsupported bound type {btype}")
        else:
            raise ValueError(f"line {lineno}: data outside a known section")
    variables = tuple(Variable(n, var_kind[k], lower.get(k, 0.0), upper.get(k))
                      for k, n in enumerate(var_names))
    objective = tuple(sorted((k, c) for k, c in obj.items() if c != 0.0))
    constraints = tuple(LinearConstraint(r, tuple(coef.get(r, ())), rows[r], rhs.get(r, 0.0))
                        for r in row_order)
    return MilpInstance(name, variables, objective, constraints)


def read_mps(path) -> MilpInstance:
    return parse_mps(Path(path).read_text(encoding="ascii"))
