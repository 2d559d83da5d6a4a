"""How small can the loss be before the polar grid stops tracking the modal solution?

For each grid size the loss is lowered a decade at a time; a step counts as
resolved while the exterior relative L2 error against the exact modal field
stays under the tolerance and the solve finishes with a small residual. The
table records the condition estimate at every step.

    python3 scripts/grid_delta_limit.py [--out runs/grid_delta_limit] [--tol 0.01]
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from cloaksim import __version__
from cloaksim.gridsolver import SolverError, assemble, compare_with_spectral, grid_for, solve
from cloaksim.media import RadialObject, build_cloak
from cloaksim.spectral import ModalSource, solve_field

R2, R3, R_OMEGA, RHO = 1.0, 8.0, 12.0, 10.0


def study(sizes, deltas, tol):
    src = ModalSource.point(2, RHO, 0.3, 16)
    rows = []
    for n in sizes:
        for delta in deltas:
            _, med = build_cloak(2, R2, R3, R_OMEGA, RadialObject((1.0, 2.0), (2.0,)), delta)
            exact = solve_field(med.radial_layers(), src)
            try:
                df = solve(assemble(med, grid_for(med, n, n, extra=[RHO]), [src]), estimate_condition=True)
            except SolverError as exc:
                rows.append((n, delta, np.nan, np.nan, exc.diagnostics.get("residual", np.nan), 0))
                continue
            err = compare_with_spectral(df, exact, (R3, R_OMEGA))["relative_l2"]
            ok = err <= tol and df.stats["residual"] <= 1e-8
            rows.append((n, delta, err, df.stats["condition"], df.stats["residual"], int(ok)))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/grid_delta_limit")
    ap.add_argument("--tol", type=float, default=0.01)
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128, 256])
    args = ap.parse_args()
    deltas = [10.0**-k for k in range(1, 11)]
    rows = study(args.sizes, deltas, args.tol)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "steps.csv", "w", newline="") as fh:
        fh.write(f"# version={__version__} tol={args.tol!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "delta", "relative_l2_exterior", "condition", "residual", "resolved"])
        w.writerows([[f"{v:.17g}" if isinstance(v, float) else v for v in r] for r in rows])

    print(f"{'grid':>6} {'smallest resolved delta':>24} {'error there':>12} {'condition there':>16}")
    for n in args.sizes:
        mine = [r for r in rows if r[0] == n]
        good = [r for r in mine if r[5]]
        if good:
            best = min(good, key=lambda r: r[1])
            print(f"{n:>6} {best[1]:>24.0e} {best[2]:>12.3e} {best[3]:>16.3e}")
        else:
            print(f"{n:>6} {'none':>24}")
    print(f"table: {out / 'steps.csv'}")


if __name__ == "__main__":
    main()
