"""Command-line front end.

Subcommands ``metric``, ``distance``, ``classify`` and ``verify`` each write
one JSON line per query.  Exit codes: 0 success, 1 failed verification,
2 invalid input, 3 infeasible point.
"""
import argparse
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .bounds import best_lower
from .classify import classify_general
from .core import Ball, TwoPlane, contains
from .distance import ChainConfig, chain_distance_upper, distance_lower
from .errors import (ExprSyntaxError, InvalidDomain, MinMetricError, NoConvergence, OutsideBox,
                     PointOutside, UnknownVariable, ZeroDirection, Infeasible)
from .expr import parse
from .extremal import SolverConfig, maximize_M, maximize_g
from .models import bck_ball_metric, bck_plane_metric
from .serialize import chain_to_dict, config_hash, domain_to_dict, dumps, load_domain
from .verify import run_suite

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2, 3


class InputError(Exception):
    pass


def _floats(text, name):
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError as e:
        raise InputError(f"--{name}: expected comma-separated numbers") from e
    return v


def _solver_config(args):
    grid = tuple(int(t) for t in args.grid.split(","))
    if len(grid) != 2:
        raise InputError("--grid expects two integers 'radii,angles'")
    return SolverConfig(degree=args.degree, multistarts=args.multistarts, seed=args.seed,
                        margin=args.margin, grid=grid, null_tol=args.tol)


def _plane(text):
    parts = text.split(";")
    if len(parts) != 2:
        raise InputError("--plane expects two vectors 'a,b,c;d,e,f'")
    return TwoPlane(_floats(parts[0], "plane"), _floats(parts[1], "plane"))


def _check_point(dom, x, name="point"):
    if len(x) != dom.dim:
        raise InputError(f"--{name} has dimension {len(x)}, domain has {dom.dim}")
    try:
        inside = contains(dom, x)
    except OutsideBox:
        inside = False
    if not inside:
        raise PointOutside(f"--{name} {x.tolist()} is not in the domain")


def cmd_metric(args):
    dom = load_domain(args.domain)
    cfg = _solver_config(args)
    x = _floats(args.point, "point")
    _check_point(dom, x)
    out = {"point": x}
    if args.plane:
        plane = _plane(args.plane)
        out["plane"] = plane.basis.T
        if isinstance(dom, Ball):
            out["exact"] = bck_plane_metric(x, plane, dom.center, dom.radius)
            return out
        # g(x, v) <= M(x, plane) for unit v in the plane
        ang = np.linspace(0, np.pi, 16, endpoint=False)
        lows = [best_lower(dom, x, np.cos(t) * plane.b1 + np.sin(t) * plane.b2) for t in ang]
        low = max(lows, key=lambda c: c.value)
        up = maximize_M(dom, x, plane, cfg)
    else:
        if not args.dir:
            raise InputError("give --dir or --plane")
        v = _floats(args.dir, "dir")
        if np.linalg.norm(v) == 0:
            raise ZeroDirection("zero direction")
        out["dir"] = v
        if isinstance(dom, Ball):
            out["exact"] = bck_ball_metric(dom.center, dom.radius, x, v)
            return out
        low = best_lower(dom, x, v)
        up = maximize_g(dom, x, v, cfg)
    out.update(lower=low.value, upper=up.bound, gap=up.bound - low.value,
               lower_certificate=low, upper_certificate={
                   "source": up.source, "shrink": up.shrink, "report": asdict(up.report),
                   "witness": up.witness})
    return out


def cmd_distance(args):
    dom = load_domain(args.domain)
    x, y = _floats(args.src, "from"), _floats(args.dst, "to")
    _check_point(dom, x, "from")
    _check_point(dom, y, "to")
    low = distance_lower(dom, x, y)
    ch = chain_distance_upper(dom, x, y, ChainConfig())
    return {"from": x, "to": y, "lower": low.value, "lower_certificate": low,
            "chain_upper": ch.total, "chain": chain_to_dict(ch)}


def cmd_classify(args):
    dom = load_domain(args.domain)
    witness = parse(args.witness, dom.dim) if args.witness else None
    return classify_general(dom, witness=witness, witness_clip=args.clip)


def _emit(record, fh):
    fh.write(dumps(record) + "\n")
    fh.flush()


def build_parser():
    p = argparse.ArgumentParser(prog="minmetric",
                                description="Bounds for the minimal metric of domains in R^n.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--domain", required=True, help="domain spec (JSON file)")
        sp.add_argument("--degree", type=int, default=8, help="disc degree N (default 8)")
        sp.add_argument("--multistarts", type=int, default=16, help="optimizer starts (default 16)")
        sp.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        sp.add_argument("--tol", type=float, default=1e-8, help="null residual tolerance (default 1e-8)")
        sp.add_argument("--grid", default="8,32", help="disc grid 'radii,angles' (default 8,32)")
        sp.add_argument("--margin", type=float, default=0.0, help="clearance margin (default 0)")
        sp.add_argument("--output", help="append JSON lines here instead of stdout")
        sp.add_argument("--timing", action="store_true", help="include wall time in records")

    m = sub.add_parser("metric", help="bounds for g(x, v) or M(x, plane)")
    common(m)
    m.add_argument("--point", required=True)
    m.add_argument("--dir")
    m.add_argument("--plane", help="two spanning vectors 'a,b,c;d,e,f'")
    m.set_defaults(func=cmd_metric)

    d = sub.add_parser("distance", help="bounds for the pseudodistance")
    common(d)
    d.add_argument("--from", dest="src", required=True)
    d.add_argument("--to", dest="dst", required=True)
    d.set_defaults(func=cmd_distance)

    c = sub.add_parser("classify", help="hyperbolicity verdict")
    common(c)
    c.add_argument("--witness", help="negative MPSH function for sublevel domains")
    c.add_argument("--clip", type=float, help="use max(witness, clip)")
    c.set_defaults(func=cmd_classify)

    v = sub.add_parser("verify", help="run the self-check suites")
    v.add_argument("--suite", default="all", help="all, ball, fast, bounds, classify or '1,2,5'")
    v.add_argument("--output")
    v.add_argument("--timing", action="store_true")
    v.set_defaults(func=None)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    fh = open(args.output, "a", encoding="utf-8") if args.output else sys.stdout
    try:
        if args.command == "verify":
            try:
                results = run_suite(args.suite)
            except (ValueError, KeyError):
                print(f"error: unknown suite {args.suite!r}", file=sys.stderr)
                return EXIT_INPUT
            failed = False
            for r in results:
                _emit(r.to_dict(timing=args.timing), fh)
                print(r.line(), file=sys.stderr)
                failed |= not r.passed
            return EXIT_VERIFY if failed else EXIT_OK
        t0 = time.perf_counter()
        try:
            outputs = args.func(args)
        except (InputError, InvalidDomain, ExprSyntaxError, UnknownVariable, ZeroDirection,
                ValueError, FileNotFoundError) as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_INPUT
        except (PointOutside, Infeasible) as e:
            print(f"infeasible: {e}", file=sys.stderr)
            return EXIT_INFEASIBLE
        except (NoConvergence, MinMetricError) as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_INPUT
        cfg = {k: getattr(args, k) for k in ("degree", "multistarts", "seed", "tol", "grid", "margin")}
        record = {"command": args.command, "config_hash": config_hash(cfg), "config": cfg,
                  "inputs": {"domain": domain_to_dict(load_domain(args.domain))},
                  "outputs": outputs, "version": __version__}
        if args.timing:
            record["wall_time"] = time.perf_counter() - t0
        _emit(record, fh)
        return EXIT_OK
    finally:
        if fh is not sys.stdout:
            fh.close()


if __name__ == "__main__":
    sys.exit(main())
