"""Self-checks: the thirteen acceptance criteria as callable functions.

Every criterion returns a ``CriterionResult``; ``run_suite`` runs a named
group of them.  The functions are used by the CLI ``verify`` command and by
the acceptance tests.
"""
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from .bounds import (Region, best_lower, circumscribed_ball_bound, halfspace_bound,
                     localization_constant, log_theta_radial_jet, make_theta,
                     mpsh_check, psi_jet, sibony_value, smallest_pair_sum)
from .classify import COMPLETE, NON_HYPERBOLIC, classify_convex, witness_plane_valid
from .core import Ball, HalfSpace, Polyhedral, Polyline, Sublevel, TwoPlane, frame_complete
from .discs import disc_grid, strip_disc, validate
from .distance import chain_distance_upper, path_length_lower
from .expr import parse
from .extremal import SolverConfig, maximize_M, maximize_g
from .models import ArcSet, bck_ball_metric, bck_metric, harmonic_measure

E = np.eye(3)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: Dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} [{self.number:2d}] {self.name}"

    def to_dict(self, timing=False):
        out = {"criterion": self.number, "name": self.name, "passed": bool(self.passed),
               "detail": self.detail}
        if timing:
            out["seconds"] = self.seconds
        return out


def unit_ball():
    return Ball(np.zeros(3), 1.0)


def cylinder():
    """Round cylinder ``x1^2 + x2^2 < 1`` in R^3 (sampled in a long box)."""
    return Sublevel(parse("x1^2+x2^2-1", 3), np.array([[-1, 1], [-1, 1], [-10, 10]]), True)


def slab():
    return Polyhedral((HalfSpace(E[0], 0.0), HalfSpace(-E[0], -1.0)))


def octant():
    return Polyhedral(tuple(HalfSpace(e, 0.0) for e in E))


def prism():
    """Triangle ``x1 > -1, x2 > -1, x1 + x2 < 1`` times the x3-axis."""
    return Polyhedral((HalfSpace(E[0], -1.0), HalfSpace(E[1], -1.0),
                       HalfSpace([-1.0, -1.0, 0.0], -1.0)))


def _nums(*vals):
    return ["(" + repr(float(v)) + ")" for v in vals]


# --------------------------------------------------------------------------
# Criteria
# --------------------------------------------------------------------------

def c01_ball_exact():
    vals = [bck_metric([0, 0, 0], [0.3, -0.4, 1.2]) - np.linalg.norm([0.3, -0.4, 1.2]),
            bck_metric([0.5, 0, 0], E[0]) - 4 / 3,
            bck_metric([0.5, 0, 0], E[1]) - 2 / np.sqrt(3)]
    err = float(np.max(np.abs(vals)))
    return err <= 1e-12, {"max_error": err}


def c02_ball_solver(cfg=SolverConfig(degree=8, multistarts=16)):
    r = maximize_g(unit_ball(), np.zeros(3), E[0], cfg)
    # distance to the affine disc with the same center and derivative
    d = r.witness
    Z = disc_grid((16, 64))
    affine = d.center + np.real(Z[:, None] * d.coeffs[0][None, :])
    dev = float(np.max(np.linalg.norm(d(Z) - affine, axis=1)))
    ok = 1.0 <= r.bound <= 1.02 and dev <= 0.05
    return ok, {"bound": r.bound, "affine_deviation": dev, "source": r.source}


def c03_halfspace():
    H = HalfSpace(E[0], 0.0)
    x = E[0]
    lower = halfspace_bound(H, x, E[0]).value
    upper = maximize_g(H, x, E[0]).bound
    R = 100.0
    oracle = bck_ball_metric(R * E[0], R, x, E[0])
    closed = R / (2 * R - 1)
    ok = (lower == 0.5 and upper <= 0.55 and oracle <= 0.5026
          and abs(oracle - closed) <= 1e-12 and lower <= upper and lower <= oracle)
    return ok, {"lower": lower, "solver_upper": upper, "inscribed_ball_upper": oracle}


def c04_cylinder(seeds=(0, 1, 2)):
    cyl = cylinder()
    plane = TwoPlane(E[0], E[1])
    ms = [maximize_M(cyl, np.zeros(3), plane, SolverConfig(seed=s)).bound for s in seeds]
    g = maximize_g(cyl, np.zeros(3), E[0]).bound
    fr = frame_complete(E[0], E[2])
    sd = strip_disc(np.zeros(3), fr, 128, "fejer")
    rep = validate(sd, cyl)
    ok = (all(1.0 <= m <= 1.05 for m in ms) and g <= np.pi / 4 + 0.02
          and rep.ok and rep.derivative_at_0 >= 4 / np.pi - 0.02)
    return ok, {"M_runs": ms, "g_upper": g, "strip_derivative": rep.derivative_at_0,
                "strip_valid": rep.ok}


def c05_chain_ball():
    B = unit_ball()
    x, y = np.zeros(3), 0.5 * E[0]
    ref = 0.5 * np.log(3)
    ch = chain_distance_upper(B, x, y)
    low = path_length_lower(B, Polyline(np.stack([x, y])))
    ok = (abs(ch.total - ref) <= 0.02 * ref and ch.check(x, y, B)
          and low <= ch.total + 1e-12 and low >= 0.98 * ch.total)
    return ok, {"chain_total": ch.total, "path_lower": low, "reference": ref,
                "links": len(ch.links)}


def c06_harnack(resolution=401):
    K = ArcSet(((0.0, 0.1 * 2 * np.pi),))
    s = np.linspace(-0.6, 0.6, resolution)
    X, Y = np.meshgrid(s, s)
    Z = (X + 1j * Y).ravel()
    Z = Z[np.abs(Z) <= 0.6]
    # include the circle |z| = 0.6 where the maximum sits
    Z = np.concatenate([Z, 0.6 * np.exp(1j * np.linspace(0, 2 * np.pi, 4001))])
    m = max(harmonic_measure(z, K) for z in Z)
    return m <= 0.5 + 1e-9, {"max_measure": m, "points": len(Z)}


def c07_mpsh():
    rng = np.random.default_rng(0)
    P = rng.normal(size=(1000, 3))
    P *= rng.uniform(0.1, 3, (1000, 1)) / np.linalg.norm(P, axis=1, keepdims=True)
    log_norm = parse("0.5*log(x1^2+x2^2+x3^2)", 3)
    s = smallest_pair_sum(log_norm.jet(P).hess)
    log_ok = float(np.max(np.abs(s))) <= 1e-9
    box = np.array([[-2.0, 2.0]] * 3)
    cs = {}
    for a in (0.25, 0.5):
        cs[a] = mpsh_check(parse(f"x1^2+x2^2-{a}*x3^2", 3), Region(box, 11)).c
    hyper = mpsh_check(parse("-1/(1+x1^2)+x2^2+x3^2", 3),
                       Region(np.array([[-5.0, 5.0], [-2, 2], [-2, 2]]), 21))
    ok = log_ok and all(cs[a] == 2 - 2 * a for a in cs) and hyper.is_mpsh
    return ok, {"log_max_abs": float(np.max(np.abs(s))), "c": {str(a): c for a, c in cs.items()},
                "hyperconvex_c": hyper.c}


def c08_sibony(n_points=20, cfg=SolverConfig(multistarts=4)):
    B = unit_ball()
    rng = np.random.default_rng(8)
    worst = -np.inf
    for _ in range(n_points):
        x = rng.normal(size=3)
        x *= rng.uniform(0, 0.8) / np.linalg.norm(x)
        plane = TwoPlane(rng.normal(size=3), rng.normal(size=3))
        k = 1 + np.linalg.norm(x)
        u = parse("((x1-{0})^2+(x2-{1})^2+(x3-{2})^2)/{3}".format(*_nums(*x, k**2)), 3)
        s = sibony_value(u, x, plane, dom=B, n_samples=2000)
        m = maximize_M(B, x, plane, cfg).bound
        worst = max(worst, s - m)
    u0 = parse("x1^2+x2^2+x3^2", 3)
    plane = TwoPlane(E[0], E[1])
    s0 = sibony_value(u0, np.zeros(3), plane, dom=B)
    m0 = maximize_M(B, np.zeros(3), plane, cfg).bound
    ok = worst <= 0.02 and abs(s0 - m0) <= 0.02
    return ok, {"max_excess": worst, "center_sibony": s0, "center_upper": m0}


def c09_psi(n_config=50, n_samples=10_000):
    theta = make_theta()
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(n_config):
        a = rng.uniform(-1, 1, 3)
        A = rng.normal(size=(3, 3))
        A = A @ A.T
        u = parse("{0}*x1+{1}*x2+{2}*x3+{3}*x1^2+{4}*x2^2+{5}*x3^2-1".format(
            *_nums(*a, *np.diag(A))), 3)
        x = rng.uniform(-0.5, 0.5, 3)
        r = rng.uniform(0.2, 2.0)
        lam = rng.uniform(0.1, 5.0)
        plane = TwoPlane(rng.normal(size=3), rng.normal(size=3))
        H = psi_jet(u, x, r, lam, x[None, :], theta).hess[0]
        tr = plane.b1 @ H @ plane.b1 + plane.b2 @ H @ plane.b2
        target = 4 / r**2 * np.exp(lam * u(x))
        worst = max(worst, abs(tr - target) / target)
    beta = 1.7
    P = rng.normal(size=(n_samples, 3)) * rng.uniform(0.05, 1.5, (n_samples, 1)) / np.sqrt(beta)
    J = log_theta_radial_jet(P, beta, theta)
    low = float(np.min(smallest_pair_sum(J.hess)))
    ok = worst <= 1e-6 and low >= -4 * theta.A * beta
    return ok, {"max_rel_error": worst, "min_trace": low, "bound": -4 * theta.A * beta,
                "A": theta.A}


def _ray_length(dom, x0, direction=None, face=None, target=10.0, max_steps=80):
    """Lower length of a polyline leaving every compact set, grown until the
    accumulated value passes ``target``."""
    x0 = np.asarray(x0, float)
    total, pts = 0.0, [x0]
    for k in range(max_steps):
        if face is not None:
            h = dom.halfspaces[face]
            # halve the distance to the face each step
            d = x0 @ h.normal - h.offset
            nxt = x0 - (1 - 0.5 ** (k + 1)) * d * h.normal
        else:
            nxt = x0 + (2.0 ** (k + 1) - 1) * np.asarray(direction, float)
        total += path_length_lower(dom, Polyline(np.stack([pts[-1], nxt])), nodes=33)
        pts.append(nxt)
        if total >= target:
            break
    return total


def c10_convex():
    out = {}
    v = classify_convex(slab())
    plane = v.certificate["plane"]
    ok = (v.status == NON_HYPERBOLIC and abs(plane["point"][0] - 0.5) < 1e-9
          and witness_plane_valid(slab(), plane["point"], plane["basis"]))
    out["slab"] = v.status
    for name, dom, rays in (("octant", octant(), [(None, 0), ([1, 1, 1], None), ([1, 2, 0.5], None)]),
                            ("prism", prism(), [([0, 0, 1], None), ([0, 0, -1], None), (None, 2)])):
        v = classify_convex(dom)
        hs = v.certificate.get("hyperplanes", [])
        Y = np.array([h["normal"] for h in hs]) if hs else np.zeros((0, 3))
        indep = len(hs) == 2 and np.linalg.matrix_rank(Y) == 2
        x0 = np.array(v.certificate.get("interior_point", np.zeros(3)))
        lengths = [_ray_length(dom, x0, d, f) for d, f in rays]
        ok = ok and v.status == COMPLETE and indep and min(lengths) >= 10.0
        out[name] = {"status": v.status, "ray_lengths": lengths}
    return ok, out


def c11_localization(n_discs=50, cfg=SolverConfig(multistarts=1, rounds=1, seed_degree_cap=64)):
    B = unit_ball()
    p = E[0]
    r0 = 0.5
    peak = parse("x1-1", 3)
    c, eps0 = localization_constant(B, peak, p, r0, c0=1.0)
    rng = np.random.default_rng(11)
    worst = -np.inf
    checked = 0
    for _ in range(n_discs):
        # points near p inside the ball, close enough that 1 - c|x - p| > 0
        w = rng.normal(size=3)
        w /= np.linalg.norm(w)
        if w @ p > 0:
            w = -w
        x = p + rng.uniform(0.1, 0.9) / c * w
        if np.linalg.norm(x) >= 1:
            x = x * (1 - 1e-4) / np.linalg.norm(x)
        d = maximize_g(B, x, rng.normal(size=3), cfg).witness
        delta = np.linalg.norm(d.center - p)
        rad = 1 - c * delta
        if rad <= 0:
            continue
        Z = rad * disc_grid((16, 64))
        worst = max(worst, float(np.max(np.linalg.norm(d(Z) - p, axis=1))))
        checked += 1
    ok = checked > 0 and worst <= r0
    return ok, {"c": c, "eps0": eps0, "discs_checked": checked,
                "max_distance": worst if checked else None}


def c12_monotone(n_points=20, cfg=SolverConfig(multistarts=2)):
    B1, B2 = unit_ball(), Ball(np.zeros(3), 2.0)
    rng = np.random.default_rng(12)
    ok = True
    worst_gap = np.inf
    for _ in range(n_points):
        x = rng.normal(size=3)
        x *= rng.uniform(0, 0.9) / np.linalg.norm(x)
        u = rng.normal(size=3)
        g1, g2 = bck_metric(x, u), bck_ball_metric(np.zeros(3), 2.0, x, u)
        low2 = best_lower(B2, x, u).value
        low1 = circumscribed_ball_bound(B1, np.zeros(3), 2.0, x, u).value
        up1 = maximize_g(B1, x, u, cfg).bound
        ok = ok and g2 < g1 and low2 <= up1 + 1e-12 and low1 <= g1 + 1e-12
        worst_gap = min(worst_gap, g1 - g2)
    return ok, {"min_exact_gap": worst_gap}


def c13_decreasing(n_samples=10, cfg=SolverConfig(multistarts=2)):
    rng = np.random.default_rng(13)
    cases = [(unit_ball(), np.zeros(3), E[0]), (unit_ball(), 0.4 * E[1], E[0]),
             (HalfSpace(E[0], 0.0), E[0], E[0]), (HalfSpace(E[0], 0.0), E[0], E[1]),
             (octant(), np.ones(3), E[0]), (cylinder(), np.zeros(3), E[0])]
    worst = -np.inf
    for dom, x, u in cases:
        d = maximize_g(dom, x, u, cfg).witness
        for _ in range(n_samples):
            z = complex(*rng.uniform(-1, 1, 2))
            if abs(z) >= 0.95:
                z *= 0.95 / abs(z)
            xi = rng.normal(size=2)
            v = d.differential(z, xi)
            lhs = best_lower(dom, d(z), v).value
            rhs = np.linalg.norm(xi) / (1 - abs(z) ** 2)
            worst = max(worst, lhs - rhs)
    return worst <= 1e-6, {"max_excess": worst}


CRITERIA: Dict[int, tuple] = {
    1: ("ball exact metric", c01_ball_exact),
    2: ("solver tightness on the ball", c02_ball_solver),
    3: ("half-space sandwich", c03_halfspace),
    4: ("cylinder values", c04_cylinder),
    5: ("chains on the ball", c05_chain_ball),
    6: ("harmonic measure radius", c06_harnack),
    7: ("MPSH certificates", c07_mpsh),
    8: ("Sibony value soundness", c08_sibony),
    9: ("cut-off trace identity", c09_psi),
    10: ("convex classification", c10_convex),
    11: ("boundary localization", c11_localization),
    12: ("monotonicity under inclusion", c12_monotone),
    13: ("distance-decreasing soundness", c13_decreasing),
}

SUITES: Dict[str, List[int]] = {
    "all": list(CRITERIA),
    "ball": [1, 2, 5, 12],
    "fast": [1, 6, 7, 9],
    "bounds": [3, 7, 8, 9, 11, 12, 13],
    "classify": [10],
}


def run_criterion(k: int) -> CriterionResult:
    name, fn = CRITERIA[k]
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as e:  # a crash is a failure with its message
        ok, detail = False, {"error": f"{type(e).__name__}: {e}"}
    return CriterionResult(k, name, bool(ok), detail, time.perf_counter() - t0)


def run_suite(suite="all", callback: Callable = None) -> List[CriterionResult]:
    if suite in SUITES:
        ids = SUITES[suite]
    else:
        ids = [int(s) for s in suite.split(",")]
    out = []
    for k in ids:
        r = run_criterion(k)
        if callback:
            callback(r)
        out.append(r)
    return out
