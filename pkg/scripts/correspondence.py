"""Classical frequency vs quantum level spacing for a 1-DOF well.

Actions come from quadrature over a grid of energies, H(I) from the smallest
polynomial fit that reproduces them, and the fitted H is quantized on the
Fourier window.  For a non-polynomial H(I) (the quartic well) the fit is only
approximate, so the discrepancy column measures fit quality as much as
correspondence.

    python scripts/correspondence.py --H "((p1^2 + q1^2)/2)^2" --emax 64
    python scripts/correspondence.py --H "p1^2/2 + q1^4/4" --emax 20 --degree 6
"""

import argparse
import json

import numpy as np

from torusquant import Representation, TruncationWindow, jsonfmt
from torusquant.classical import SystemDef, frequency_correspondence


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--H", default="((p1^2 + q1^2)/2)^2")
    ap.add_argument("--emin", type=float, default=0.04)
    ap.add_argument("--emax", type=float, default=64.0)
    ap.add_argument("--samples", type=int, default=16)
    ap.add_argument("--degree", type=int, default=4)
    ap.add_argument("--lam", type=float, default=0.0)
    ap.add_argument("--n-max", type=int, default=10)
    ap.add_argument("--json", action="store_true", help="dump the full comparison as JSON")
    args = ap.parse_args(argv)

    energies = np.linspace(args.emin, args.emax, args.samples)
    out = frequency_correspondence(SystemDef(args.H), Representation((args.lam,)),
                                   TruncationWindow(1, args.n_max), energies, args.degree)
    if args.json:
        print(jsonfmt.dumps(out))
        return
    fit = out["fit"]
    print(f"fit degree {fit['degree']}, residual {fit['max_residual']:.2e}, "
          f"coefficients {[round(c, 10) for c in fit['coefficients']]}")
    print(f"{'n':>4} {'I':>10} {'dH/dI':>14} {'E[n+1]-E[n]':>14} {'diff':>10}")
    for r in out["comparisons"]:
        print(f"{r['n']:>4} {r['action']:>10.4f} {r['classical_frequency']:>14.8f} "
              f"{r['quantum_spacing']:>14.8f} {r['discrepancy']:>10.2e}")
    print(f"max discrepancy {out['max_discrepancy']:.3e}")


if __name__ == "__main__":
    main()
