"""Fixed-format MPS writer and a reader for the dialect we emit.

The writer targets external MILP solvers (minimization; L/G/E rows; LO/UP/
FX/MI/BV bounds; INTORG markers for integer columns; objective constants
encoded as a negated RHS entry on the objective row).  Names longer than
eight characters are replaced by generated ones to stay inside the fixed
field widths.
"""

from __future__ import annotations

import numpy as np

from .model import EQ, GE, LE, LinearProgram, LpFormatError

_SENSE_TO_MPS = {LE: "L", GE: "G", EQ: "E"}
_MPS_TO_SENSE = {"L": LE, "G": GE, "E": EQ}

_OBJ = "COST"


def _safe_names(names, prefix):
    ok = all(len(n) <= 8 for n in names) and len(set(names)) == len(names)
    if ok and _OBJ not in names:
        return list(names)
    return [f"{prefix}{i + 1:07d}" for i in range(len(names))]


def _num(v: float) -> str:
    return f"{v:.10g}"


def write_mps(lp: LinearProgram, path, name: str = "ADLEARN", integer_cols=()):
    """Write `lp` to `path`; `integer_cols` lists column indices to mark
    integral (wrapped in INTORG/INTEND markers)."""
    rows = _safe_names(lp.row_names, "R")
    cols = _safe_names(lp.col_names, "C")
    integer_cols = set(int(j) for j in integer_cols)
    lines = [f"NAME          {name}", "ROWS", f" N  {_OBJ}"]
    for i, s in enumerate(lp.senses):
        lines.append(f" {_SENSE_TO_MPS[s]}  {rows[i]}")
    lines.append("COLUMNS")
    marker_on = False
    for j in range(lp.n_cols):
        want_int = j in integer_cols
        if want_int and not marker_on:
            lines.append("    MARKER                 'MARKER'                 'INTORG'")
            marker_on = True
        if not want_int and marker_on:
            lines.append("    MARKER                 'MARKER'                 'INTEND'")
            marker_on = False
        entries = []
        if lp.c[j] != 0.0:
            entries.append((_OBJ, lp.c[j]))
        if lp.A.size:
            for i in np.flatnonzero(lp.A[:, j]):
                entries.append((rows[int(i)], lp.A[int(i), j]))
        if not entries:
            entries.append((_OBJ, 0.0))
        for k in range(0, len(entries), 2):
            pair = entries[k : k + 2]
            line = f"    {cols[j]:<8}  {pair[0][0]:<8}  {_num(pair[0][1]):<12}"
            if len(pair) == 2:
                line += f"   {pair[1][0]:<8}  {_num(pair[1][1]):<12}"
            lines.append(line.rstrip())
    if marker_on:
        lines.append("    MARKER                 'MARKER'                 'INTEND'")
    lines.append("RHS")
    rhs_entries = [(rows[i], lp.b[i]) for i in range(lp.n_rows) if lp.b[i] != 0.0]
    if lp.objective_constant:
        rhs_entries.append((_OBJ, -lp.objective_constant))
    for rn, v in rhs_entries:
        lines.append(f"    RHS       {rn:<8}  {_num(v):<12}".rstrip())
    bound_lines = []
    for j in range(lp.n_cols):
        lo, hi = lp.lb[j], lp.ub[j]
        if j in integer_cols and lo == 0.0 and hi == 1.0:
            bound_lines.append(f" BV BND       {cols[j]:<8}")
            continue
        if lo == 0.0 and np.isinf(hi):
            continue
        if lo == hi:
            bound_lines.append(f" FX BND       {cols[j]:<8}  {_num(lo):<12}".rstrip())
            continue
        if np.isneginf(lo):
            bound_lines.append(f" MI BND       {cols[j]:<8}")
        elif lo != 0.0:
            bound_lines.append(f" LO BND       {cols[j]:<8}  {_num(lo):<12}".rstrip())
        if not np.isinf(hi):
            bound_lines.append(f" UP BND       {cols[j]:<8}  {_num(hi):<12}".rstrip())
    if bound_lines:
        lines.append("BOUNDS")
        lines.extend(bound_lines)
    lines.append("ENDATA")
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
    return {"rows": rows, "cols": cols}


def read_mps(path):
    """Parse an MPS file written by `write_mps`; returns
    ``(LinearProgram, integer_col_names)``."""
    if hasattr(path, "read"):
        raw = path.read()
    else:
        with open(path) as fh:
            raw = fh.read()
    section = None
    row_order, senses = [], []
    col_order: list = []
    col_entries: dict = {}
    rhs: dict = {}
    bounds: dict = {}
    integer_cols: list = []
    obj_row = None
    obj_const = 0.0
    in_int = False
    for line in raw.splitlines():
        if not line.strip() or line.startswith("*"):
            continue
        if not line[0].isspace():
            section = line.split()[0]
            continue
        tok = line.split()
        if section == "ROWS":
            kind, rname = tok[0], tok[1]
            if kind == "N":
                obj_row = rname
            else:
                row_order.append(rname)
                senses.append(_MPS_TO_SENSE[kind])
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1] == "'MARKER'":
                in_int = tok[2] == "'INTORG'"
                continue
            cname = tok[0]
            if cname not in col_entries:
                col_entries[cname] = {}
                col_order.append(cname)
                if in_int:
                    integer_cols.append(cname)
            for k in range(1, len(tok) - 1, 2):
                col_entries[cname][tok[k]] = float(tok[k + 1])
        elif section == "RHS":
            for k in range(1, len(tok) - 1, 2):
                if tok[k] == obj_row:
                    obj_const = -float(tok[k + 1])
                else:
                    rhs[tok[k]] = float(tok[k + 1])
        elif section == "BOUNDS":
            btype, cname = tok[0], tok[2]
            val = float(tok[3]) if len(tok) > 3 else 0.0
            lo, hi = bounds.get(cname, (0.0, np.inf))
            if btype == "UP":
                hi = val
            elif btype == "LO":
                lo = val
            elif btype == "FX":
                lo = hi = val
            elif btype == "MI":
                lo = -np.inf
            elif btype == "PL":
                hi = np.inf
            elif btype == "BV":
                lo, hi = 0.0, 1.0
            else:
                raise LpFormatError(f"unsupported bound type {btype}")
            bounds[cname] = (lo, hi)
        elif section in ("NAME", "ENDATA", None):
            continue
    m, n = len(row_order), len(col_order)
    row_idx = {r: i for i, r in enumerate(row_order)}
    A = np.zeros((m, n))
    c = np.zeros(n)
    for j, cname in enumerate(col_order):
        for rname, v in col_entries[cname].items():
            if rname == obj_row:
                c[j] = v
            else:
                A[row_idx[rname], j] = v
    b = np.array([rhs.get(r, 0.0) for r in row_order])
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for j, cname in enumerate(col_order):
        if cname in bounds:
            lb[j], ub[j] = bounds[cname]
    lp = LinearProgram(
        c,
        A,
        senses,
        b,
        lb=lb,
        ub=ub,
        row_names=row_order,
        col_names=col_order,
        objective_constant=obj_const,
    )
    return lp, integer_cols
