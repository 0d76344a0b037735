"""Holonomy of a parameter loop against the enclosed area.

With Lambda^1 = (s2, 0) the generator on level n is (n - lambda) s2 ds1, so a
closed polygon picks up exp(-i (n - lambda) * circ s2 ds1).  The script sweeps
square loops of growing side and compares the diagonal of U with that
prediction.  The integrand is linear on every edge, so the midpoint product is
exact and the error column should sit at roundoff for any step count.

    python scripts/berry_loop.py --lam 0.3 --sides 0.5 1 2 --steps 256 1024 4096
"""

import argparse
import csv
import sys

import numpy as np

from torusquant import ParameterPath, PerturbationSpec, Representation, TruncationWindow, holonomy_operator


def square(side):
    s = [[0, 0], [side, 0], [side, side], [0, side], [0, 0]]
    return ParameterPath(list(range(5)), s)


def circulation(path):
    # circ s2 ds1 around the polygon, exact for piecewise-linear paths
    s = path.points
    return float(np.sum(0.5 * (s[1:, 1] + s[:-1, 1]) * np.diff(s[:, 0])))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lam", type=float, default=0.3)
    ap.add_argument("--n-max", type=int, default=3)
    ap.add_argument("--sides", type=float, nargs="+", default=[0.25, 0.5, 1.0, 2.0])
    ap.add_argument("--steps", type=int, nargs="+", default=[64, 256, 1024, 4096])
    args = ap.parse_args(argv)

    rep = Representation((args.lam,))
    w = TruncationWindow(1, args.n_max)
    spec = PerturbationSpec(1, [0], 2, {(0, 0): "s2"})
    levels = rep.action_values(w.indices())[:, 0]

    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["side", "circulation", "steps", "max_phase_error"])
    for side in args.sides:
        path = square(side)
        expected = np.exp(-1j * levels * circulation(path))
        for steps in args.steps:
            U = holonomy_operator(spec, rep, w, path, steps).matrix
            err = np.max(np.abs(np.diag(U) - expected))
            out.writerow([side, f"{circulation(path):.6g}", steps, f"{err:.3e}"])


if __name__ == "__main__":
    main()
