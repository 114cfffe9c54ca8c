#!/usr/bin/env python3
"""Probe the small-mass / large-mass dichotomy of the condensation preset.

Same box, same attracting drift, same cubic growth law. Only the initial
mass changes. Small mass relaxes and the sup norm drains; large mass feeds
the drift faster than diffusion can spread it and the run trips the blow-up
guard before the horizon.
"""

import argparse
from pathlib import Path

import numpy as np

from superdrift import SolverConfig, make_problem, run


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--masses", default="0.01,50", help="comma separated initial masses")
    ap.add_argument("--cells", type=int, default=24, help="cells per axis")
    ap.add_argument("--horizon", type=float, default=2.0)
    ap.add_argument("--out", default="out/kq")
    args = ap.parse_args()

    masses = [float(tok) for tok in args.masses.split(",") if tok.strip()]
    if not masses:
        print("error: no masses given")
        return 1

    config = SolverConfig(lin_tol=1e-9, snapshot_stride=1)
    out = Path(args.out)
    for mass in masses:
        problem = make_problem(
            "kq",
            dim=3,
            cells=(args.cells,) * 3,
            mass=mass,
            horizon=args.horizon,
        )
        traj = run(problem, config)
        linf = np.asarray(traj.norms.linf)
        growth = float(linf.max() / linf[0])
        case_dir = out / f"mass_{mass:g}"
        case_dir.mkdir(parents=True, exist_ok=True)
        traj.norms.write_csv(case_dir / "norms.csv")
        print(
            f"mass {mass:<8g} status {traj.status:<18s} "
            f"steps {len(traj.norms.times) - 1:<5d} "
            f"t_end {traj.norms.times[-1]:.4f} "
            f"sup growth {growth:.2f}x"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
