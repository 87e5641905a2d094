"""Lower and upper bounds of g(x, v) along a segment, written as CSV.

Example::

    python scripts/sweep_metric.py --domain cylinder --direction 1,0,0 \\
        --start 0,0,0 --end 0.95,0,0 --steps 20 --output cylinder.csv

Built-in domains: ball, halfspace, cylinder, slab, octant.  Any JSON
domain file accepted by the command line tool also works.
"""
import argparse
import csv
import os
import sys

import numpy as np

from minmetric.bounds import best_lower
from minmetric.core import HalfSpace
from minmetric.extremal import SolverConfig, maximize_g
from minmetric.serialize import load_domain
from minmetric import verify

BUILTIN = {
    "ball": verify.unit_ball,
    "halfspace": lambda: HalfSpace(np.eye(3)[0], 0.0),
    "cylinder": verify.cylinder,
    "slab": verify.slab,
    "octant": verify.octant,
}


def _vec(text):
    return np.array([float(t) for t in text.split(",")])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--domain", default="cylinder")
    ap.add_argument("--direction", default="1,0,0")
    ap.add_argument("--start", default="0,0,0")
    ap.add_argument("--end", default="0.95,0,0")
    ap.add_argument("--steps", type=int, default=10)
    ap.add_argument("--multistarts", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--output", default="-")
    args = ap.parse_args()

    if os.path.exists(args.domain):
        dom = load_domain(args.domain)
    else:
        dom = BUILTIN[args.domain]()
    v = _vec(args.direction)
    a, b = _vec(args.start), _vec(args.end)
    cfg = SolverConfig(multistarts=args.multistarts, seed=args.seed)

    fh = sys.stdout if args.output == "-" else open(args.output, "w", newline="")
    w = csv.writer(fh)
    w.writerow(["t", "x1", "x2", "x3", "lower", "lower_kind", "upper", "upper_source"])
    for t in np.linspace(0, 1, args.steps + 1):
        x = a + t * (b - a)
        low = best_lower(dom, x, v)
        up = maximize_g(dom, x, v, cfg)
        w.writerow([f"{t:.6g}", *(f"{c:.10g}" for c in x), f"{low.value:.10g}", low.kind,
                    f"{up.bound:.10g}", up.source])
        fh.flush()
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
