"""External-solver command backed by HiGHS through ``scipy.optimize.milp``.

    python -m wfsolve.highs_runner MODEL.lp SOLUTION.txt [--time-limit SECONDS]

Follows the external backend contract: writes ``name value`` lines and exits
with 0 (optimal), 2 (infeasible) or 3 (time limit).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .model import format_assignment, read_lp
from .solver import EXTERNAL_INFEASIBLE, EXTERNAL_OPTIMAL, EXTERNAL_TIME_LIMIT


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="wfsolve.highs_runner")
    ap.add_argument("lp")
    ap.add_argument("solution")
    ap.add_argument("--time-limit", type=float, default=None)
    args = ap.parse_args(argv)

    with open(args.lp) as fh:
        m = read_lp(fh.read())
    c, A, row_lo, row_hi, lb, ub, integrality = m.to_arrays()
    options = {"disp": False, "mip_rel_gap": 0.0}
    if args.time_limit is not None and args.time_limit < 1e8:
        options["time_limit"] = max(args.time_limit, 0.01)
    res = milp(
        c,
        constraints=[LinearConstraint(A, row_lo, row_hi)] if A.shape[0] else None,
        integrality=integrality,
        bounds=Bounds(lb, ub),
        options=options,
    )
    if res.status == 2:
        return EXTERNAL_INFEASIBLE
    if res.x is not None:
        values = {v.name: float(np.round(x)) for v, x in zip(m.variables, res.x)}
        with open(args.solution, "w") as fh:
            fh.write(format_assignment(values))
    if res.status == 0:
        return EXTERNAL_OPTIMAL
    if res.status == 1:
        return EXTERNAL_TIME_LIMIT
    print(f"HiGHS failed: {res.message}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
