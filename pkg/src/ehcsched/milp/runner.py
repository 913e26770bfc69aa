"""Bundled LP solver executable: reads an LP file, writes a solution file.

Invoked as a separate process (``python -m ehcsched.milp.runner LP SOL
TIMELIMIT [--feasibility-focus]``), keeping the driver solver-neutral: any
other executable honoring the same file contract can be swapped in through
the command template.  The backend is the HiGHS solver shipped with scipy.

Solution file format (also accepted from third-party wrappers):

    # status optimal|feasible|timeout|infeasible|unbounded|error
    # objective <float>
    <variable name> <value>       one line per variable

``--feasibility-focus`` trades optimality for the early return of an
integer-feasible incumbent via a very loose relative gap.
"""

from __future__ import annotations

import argparse
import sys


STATUS_BY_CODE = {0: "optimal", 2: "infeasible", 3: "unbounded", 4: "error"}


def solve_lp_file(lp_path: str, sol_path: str, time_limit: float, feasibility_focus: bool = False) -> str:
    import numpy as np
    from scipy import sparse
    from scipy.optimize import Bounds, LinearConstraint, milp

    from .lpformat import parse_lp
    from .model import BINARY

    with open(lp_path, "r", encoding="utf-8") as fh:
        model = parse_lp(fh.read())

    names = model.variable_names()
    index = {name: k for k, name in enumerate(names)}
    n = len(names)

    if n == 0:
        _write_solution(sol_path, "optimal", model.objective_constant, {})
        return "optimal"

    c = np.zeros(n)
    for coef, var in model.objective:
        c[index[var]] += coef
    integrality = np.array(
        [1 if v.kind == BINARY else 0 for v in model.variables], dtype=np.uint8
    )
    lb = np.array([v.lb for v in model.variables])
    ub = np.array([v.ub for v in model.variables])

    rows, cols, vals = [], [], []
    con_lb, con_ub = [], []
    for r, con in enumerate(model.constraints):
        for coef, var in con.terms:
            rows.append(r)
            cols.append(index[var])
            vals.append(coef)
        if con.sense == "<=":
            con_lb.append(-np.inf)
            con_ub.append(con.rhs)
        elif con.sense == ">=":
            con_lb.append(con.rhs)
            con_ub.append(np.inf)
        else:
            con_lb.append(con.rhs)
            con_ub.append(con.rhs)
    matrix = sparse.csc_array(
        (vals, (rows, cols)), shape=(len(model.constraints), n)
    )

    options = {"time_limit": float(time_limit), "presolve": True}
    if feasibility_focus:
        options["mip_rel_gap"] = 10.0

    res = milp(
        c=c,
        constraints=LinearConstraint(matrix, np.array(con_lb), np.array(con_ub)),
        integrality=integrality,
        bounds=Bounds(lb, ub),
        options=options,
    )

    if res.status == 1:
        status = "feasible" if res.x is not None else "timeout"
    else:
        status = STATUS_BY_CODE.get(res.status, "error")

    values = {}
    objective = None
    if res.x is not None:
        values = {name: float(res.x[k]) for k, name in enumerate(names)}
        objective = float(res.fun) + model.objective_constant
    _write_solution(sol_path, status, objective, values)
    return status


def _write_solution(path: str, status: str, objective, values: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# status {status}\n")
        if objective is not None:
            fh.write(f"# objective {objective!r}\n")
        for name, value in values.items():
            fh.write(f"{name} {value!r}\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="LP file solver (HiGHS via scipy)")
    parser.add_argument("lp")
    parser.add_argument("sol")
    parser.add_argument("timelimit", type=float)
    parser.add_argument("--feasibility-focus", action="store_true")
    args = parser.parse_args(argv)
    status = solve_lp_file(args.lp, args.sol, args.timelimit, args.feasibility_focus)
    return 0 if status in ("optimal", "feasible", "timeout", "infeasible", "unbounded") else 1


if __name__ == "__main__":
    sys.exit(main())
