#!/usr/bin/env python3
"""Push the datum singularity toward the integrability edge and compare
measured tail exponents of u and |grad u| against the regime prediction.

With f(r) = r^(-delta) on the 3-ball, f stays in L^m up to delta = 3/m;
as delta climbs, the solution's superlevel tails fatten toward the
predicted weak-Lebesgue exponent 2pm/(gamma+1+p) of the gradient.
"""

import argparse

from degelab import (
    CoefficientSpec,
    DatumSpec,
    PowerAbsorption,
    ProblemSpec,
    RadialPowerDatum,
    SolverConfig,
)
from degelab.experiments import MeshSpec, exponent_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--p", type=float, default=1.0)
    ap.add_argument("--m", type=float, default=1.0)
    ap.add_argument("--cells", type=int, default=512)
    ap.add_argument("--deltas", type=float, nargs="+",
                    default=[2.0, 2.4, 2.6, 2.8])
    args = ap.parse_args()

    base = ProblemSpec(
        dimension=3, radius=1.0,
        coefficient=CoefficientSpec(1.0, 1.0, args.gamma),
        lower=PowerAbsorption(args.p),
        datum=DatumSpec(RadialPowerDatum(1.0, args.deltas[0]), args.m),
    )
    table = exponent_probe(base, args.deltas, MeshSpec(args.cells), SolverConfig())
    print(f"{'delta':>6} {'int |u|^pm':>12} {'refine chg':>10} "
          f"{'tail u':>8} {'tail grad':>9} {'predicted':>9} {'status':>12}")
    for row in table.rows:
        status = ("insufficient" if row.insufficient
                  else "consistent" if row.consistent else "inconsistent")
        if row.on_boundary:
            status += "*"
        print(f"{row.delta:>6.2f} {row.lebesgue_integral:>12.4e} "
              f"{row.refinement_change:>10.2%} {row.tail_u:>8.3f} "
              f"{row.tail_grad:>9.3f} {row.predicted_grad:>9.3f} {status:>12}")
    print(f"verdict: {table.verdict}")
    if any(row.on_boundary for row in table.rows):
        print("* parameter point sits exactly on a regime boundary")


if __name__ == "__main__":
    main()
