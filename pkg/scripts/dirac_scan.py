"""How far inside the window the Dirac condition holds.

Products of band-limited operators lose the terms that would have come from
outside the truncation window, so [f^, g^] + i{f, g}^ is exact only on an
interior block.  This prints the worst defect over random pairs as a function
of the margin, for a few bandwidths.

    python scripts/dirac_scan.py --pairs 10 --bandwidths 1 2 3 --n-max 10
"""

import argparse

import numpy as np

from torusquant import Representation, TruncationWindow
from torusquant.operators import dirac_defect, random_affine


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=2)
    ap.add_argument("--n-max", type=int, default=10)
    ap.add_argument("--pairs", type=int, default=8)
    ap.add_argument("--bandwidths", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    w = TruncationWindow(args.m, args.n_max)
    rep = Representation(tuple(rng.uniform(-1, 1, args.m)))
    margins = range(0, min(args.n_max, 2 * max(args.bandwidths) + 2) + 1)
    print("bandwidth " + " ".join(f"{f'margin {k}':>11}" for k in margins))
    for bw in args.bandwidths:
        obs = [random_affine(rng, args.m, bw) for _ in range(2 * args.pairs)]
        cache = {}
        row = []
        for k in margins:
            row.append(max(dirac_defect(obs[2 * i], obs[2 * i + 1], rep, w, k, cache)
                           for i in range(args.pairs)))
        print(f"{bw:>9} " + " ".join(f"{v:>11.2e}" for v in row))


if __name__ == "__main__":
    main()
