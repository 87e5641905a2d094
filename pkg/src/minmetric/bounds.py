"""Certified lower bounds on the minimal metric.

Three families:

* plurisubharmonic-type certificates: a sampled check that the two smallest
  Hessian eigenvalues of a field sum to at least ``c``, the Sibony-type value
  ``(1/2) sqrt(tr_plane Hess u(x))`` of a bounded candidate, and the cut-off
  construction ``Psi = theta(|y-x|^2/r^2) exp(lambda u)`` that turns a
  strongly MPSH field into explicit metric bounds;
* convex-geometric estimates from half-spaces, polyhedra and circumscribed
  balls (comparison under inclusion);
* boundary localization near a point with a peak function.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Callable, List, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .core import (Ball, HalfSpace, Polyhedral, Sublevel, TwoPlane, boundary_distance,
                   bounding_box, contains, signed_clearance)
from .errors import (CandidateInvalid, ConstructionFailed, HypothesisFailed,
                     NonpositiveFactor, NotContained, PointOutside, RankDeficient)
from .expr import Expr, Jet
from .models import bck_ball_metric

MPSH_TOL = 1e-9


@dataclass
class LowerBoundCert:
    """A lower bound together with what it depends on."""

    value: float
    kind: str
    inputs: dict = field(default_factory=dict)
    hypotheses: List[str] = field(default_factory=list)

    def to_dict(self):
        def clean(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, Expr):
                return v.text
            if isinstance(v, dict):
                return {k: clean(w) for k, w in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(w) for w in v]
            return v
        return {"value": float(self.value), "kind": self.kind,
                "inputs": clean(self.inputs), "hypotheses": list(self.hypotheses)}


def _vec(v):
    return np.asarray(v, dtype=float).reshape(-1)


# --------------------------------------------------------------------------
# Hessian traces and MPSH sampling
# --------------------------------------------------------------------------

def trace_plane_hessian(H, plane: TwoPlane):
    """``b1^T H b1 + b2^T H b2`` for an orthonormal basis of the plane."""
    H = np.asarray(H, dtype=float)
    return float(plane.b1 @ H @ plane.b1 + plane.b2 @ H @ plane.b2)


def smallest_pair_sum(H):
    """``lambda_1 + lambda_2`` for a stack of symmetric matrices ``(m, n, n)``."""
    ev = np.linalg.eigvalsh(H)
    return ev[..., 0] + ev[..., 1]


@dataclass(frozen=True)
class Region:
    """Sampling description: a grid on a box, optional random points and a mask.

    Parameters
    ----------
    box : (n, 2) array
    resolution : int
        Grid points per axis (0 disables the grid).
    n_random : int
        Additional uniform random points.
    mask : callable, optional
        ``mask(P) -> bool array`` keeps only points of interest.
    label : str
        Free text echoed into certificates.
    """

    box: np.ndarray
    resolution: int = 21
    n_random: int = 0
    seed: int = 0
    mask: Optional[Callable] = None
    label: str = "box"

    def points(self):
        box = np.asarray(self.box, float)
        n = len(box)
        parts = []
        if self.resolution > 0:
            g = [np.linspace(lo, hi, self.resolution) for lo, hi in box]
            parts.append(np.stack(np.meshgrid(*g, indexing="ij"), -1).reshape(-1, n))
        if self.n_random > 0:
            rng = np.random.default_rng(self.seed)
            parts.append(box[:, 0] + rng.random((self.n_random, n)) * (box[:, 1] - box[:, 0]))
        P = np.concatenate(parts) if parts else np.zeros((0, n))
        if self.mask is not None and len(P):
            P = P[np.asarray(self.mask(P), bool)]
        return P

    @property
    def spacing(self):
        if self.resolution <= 1:
            return np.inf
        box = np.asarray(self.box, float)
        return float(np.max(box[:, 1] - box[:, 0]) / (self.resolution - 1))

    def describe(self):
        return {"box": np.asarray(self.box, float).tolist(), "resolution": self.resolution,
                "n_random": self.n_random, "seed": self.seed, "label": self.label}

    @classmethod
    def shell(cls, n, r_in, r_out, n_random=1000, seed=0, center=None):
        c = np.zeros(n) if center is None else _vec(center)
        box = np.stack([c - r_out, c + r_out], axis=1)

        def mask(P):
            r = np.linalg.norm(P - c, axis=1)
            return (r >= r_in) & (r <= r_out)
        return cls(box, resolution=0, n_random=n_random, seed=seed, mask=mask,
                   label=f"shell {r_in} <= |x - c| <= {r_out}")

    @classmethod
    def of_domain(cls, dom, box=None, resolution=21, n_random=0, seed=0):
        box = bounding_box(dom) if box is None else np.asarray(box, float)
        if box is None:
            raise ValueError("unbounded domain: give a sampling box")
        return cls(box, resolution, n_random, seed,
                   mask=lambda P: _inside(dom, P), label="domain samples")


def _inside(dom, P):
    if isinstance(dom, Sublevel):
        return dom._values(P) < 0
    return signed_clearance(dom, P) > 0


@dataclass
class MpshCertificate:
    """Sampled lower bound ``c`` for ``lambda_1 + lambda_2`` of ``Hess u``.

    ``c`` is the sample minimum minus ``slack``.  ``is_mpsh`` means
    ``c >= -1e-9``; ``is_strong`` means ``c > 0``.
    """

    field: Expr
    region: dict
    c: float
    sample_min: float
    slack: float
    n_points: int
    argmin: np.ndarray
    box: Optional[np.ndarray] = None

    @property
    def is_mpsh(self):
        return self.c >= -MPSH_TOL

    @property
    def is_strong(self):
        return self.c > MPSH_TOL

    def to_dict(self):
        return {"field": self.field.text, "region": self.region, "c": self.c,
                "sample_min": self.sample_min, "slack": self.slack,
                "n_points": self.n_points, "argmin": self.argmin.tolist(),
                "mpsh": self.is_mpsh, "strong": self.is_strong}


def _lipschitz_slack(region: Region, vals, P):
    """Largest grid-neighbour slope of the sampled field times half the
    worst distance to the nearest grid node."""
    if region.resolution <= 1 or region.mask is not None or region.n_random:
        return 0.0
    n = P.shape[1]
    V = vals.reshape((region.resolution,) * n)
    h = region.spacing
    slope = 0.0
    for ax in range(n):
        slope = max(slope, float(np.max(np.abs(np.diff(V, axis=ax)))) / h)
    return slope * 0.5 * h * np.sqrt(n)


def mpsh_check(u: Expr, region: Region, strong=False, lipschitz=False, batch=20000):
    """Sampled MPSH certificate for ``u`` on ``region``.

    Parameters
    ----------
    strong : bool
        If true, raise ``HypothesisFailed`` unless ``c > 0``.
    lipschitz : bool
        Subtract a Lipschitz safety slack estimated from grid differences.
    """
    P = region.points()
    if len(P) == 0:
        raise HypothesisFailed("the sampling region is empty")
    vals = np.concatenate([smallest_pair_sum(u.jet(P[i:i + batch]).hess)
                           for i in range(0, len(P), batch)])
    k = int(np.argmin(vals))
    slack = _lipschitz_slack(region, vals, P) if lipschitz else 0.0
    cert = MpshCertificate(u, region.describe(), float(vals[k] - slack), float(vals[k]),
                           float(slack), len(P), P[k], np.asarray(region.box, float))
    if strong and not cert.is_strong:
        raise HypothesisFailed(f"not strongly MPSH: c = {cert.c:.3g} at {P[k]}")
    return cert


# --------------------------------------------------------------------------
# Sibony-type value
# --------------------------------------------------------------------------

def sibony_value(u: Expr, x, plane: TwoPlane, dom=None, region: Optional[Region] = None,
                 n_samples=4000, seed=0, zero_skip=1e-6):
    """``(1/2) sqrt(tr_plane Hess u(x))`` after checking the candidate.

    Checks, on samples of the domain: ``u(x) = 0``, ``0 <= u <= 1``, ``u``
    MPSH and ``log u`` MPSH away from ``{u < zero_skip}``.  A valid candidate
    gives a lower bound for ``M(x, plane)``.
    """
    x = _vec(x)
    failed = []
    ux, gx, Hx = u.jet(x[None, :]).val[0], None, u.jet(x[None, :]).hess[0]
    if abs(ux) > 1e-12:
        failed.append(f"u(x) = {ux:.3g} is not 0")
    if region is None:
        box = bounding_box(dom) if dom is not None else None
        if box is None:
            raise CandidateInvalid("a sampling region is needed for unbounded domains")
        region = Region(box, resolution=0, n_random=n_samples, seed=seed,
                        mask=lambda P: _inside(dom, P), label="domain samples")
    P = region.points()
    if dom is not None and len(P):
        P = P[_inside(dom, P)]
    if len(P) == 0:
        raise CandidateInvalid("no sample points in the domain")
    J = u.jet(P)
    if np.min(J.val) < -1e-12 or np.max(J.val) > 1 + 1e-12:
        failed.append(f"range check 0 <= u <= 1 fails (min {np.min(J.val):.3g}, max {np.max(J.val):.3g})")
    s = smallest_pair_sum(J.hess)
    scale = 1 + np.linalg.norm(J.hess, axis=(1, 2))
    if np.min(s / scale) < -MPSH_TOL:
        failed.append("u is not MPSH on the samples")
    keep = J.val > zero_skip
    if np.any(keep):
        v, g, H = J.val[keep], J.grad[keep], J.hess[keep]
        Hl = H / v[:, None, None] - g[:, :, None] * g[:, None, :] / (v**2)[:, None, None]
        sl = smallest_pair_sum(Hl)
        if np.min(sl / (1 + np.linalg.norm(Hl, axis=(1, 2)))) < -MPSH_TOL:
            failed.append("log u is not MPSH on the samples")
    if failed:
        raise CandidateInvalid("; ".join(failed))
    tr = trace_plane_hessian(Hx, plane)
    return 0.5 * float(np.sqrt(max(tr, 0.0)))


# --------------------------------------------------------------------------
# Cut-off function
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaBump:
    """``theta`` with ``theta(t) = t`` on ``[0, 1/2]``, ``1`` on ``[1, inf)``,
    a quintic Hermite blend between, and the constant ``A`` bounding
    ``-(log theta)''`` on ``[1/2, inf)``."""

    A: float
    grid_size: int

    @staticmethod
    def _blend(s):
        # p(s) = H0/2 + H1/2 + H5 of the quintic Hermite basis on [0, 1]
        p = 0.5 + 0.5 * s + 2 * s**3 - 3.5 * s**4 + 1.5 * s**5
        dp = 0.5 + 6 * s**2 - 14 * s**3 + 7.5 * s**4
        ddp = 12 * s - 42 * s**2 + 30 * s**3
        return p, dp, ddp

    def derivatives(self, t):
        """``theta, theta', theta''`` at ``t >= 0`` (vectorized)."""
        t = np.asarray(t, dtype=float)
        th = np.where(t <= 0.5, t, 1.0)
        d1 = np.where(t <= 0.5, 1.0, 0.0)
        d2 = np.zeros_like(t)
        mid = (t > 0.5) & (t < 1.0)
        if np.any(mid):
            s = 2 * t[mid] - 1
            p, dp, ddp = self._blend(s)
            th = np.array(th, dtype=float)
            d1 = np.array(d1, dtype=float)
            th[mid], d1[mid], d2[mid] = p, 2 * dp, 4 * ddp
        return th, d1, d2

    def __call__(self, t):
        return self.derivatives(t)[0]

    def log_second(self, t):
        th, d1, d2 = self.derivatives(t)
        return d2 / th - (d1 / th) ** 2


@lru_cache(maxsize=None)
def make_theta(grid_size=10_000, slack=0.05) -> ThetaBump:
    """Build the cut-off and ``A`` = grid max of ``-(log theta)''`` plus slack."""
    t = np.linspace(0.5, 1.0, grid_size)
    bump = ThetaBump(1.0, grid_size)
    th, d1, _ = bump.derivatives(t)
    if np.any(np.diff(th) < -1e-15) or np.any(d1 < -1e-12):
        raise ConstructionFailed("theta is not monotone on the grid")
    if np.any(th <= 0) or np.any(th > 1 + 1e-15):
        raise ConstructionFailed("theta leaves (0, 1]")
    A = float(np.max(-bump.log_second(t))) * (1 + slack)
    if not (np.isfinite(A) and A > 0):
        raise ConstructionFailed("A is not a positive finite number")
    return ThetaBump(A, grid_size)


def log_theta_radial_jet(P, beta, theta=None):
    """Jet of ``h(y) = log theta(beta |y|^2)`` at points ``P``."""
    theta = theta or make_theta()
    P = np.atleast_2d(P)
    m, n = P.shape
    q = Jet(beta * np.sum(P**2, axis=1), 2 * beta * P,
            np.broadcast_to(2 * beta * np.eye(n), (m, n, n)).copy())
    th, d1, d2 = theta.derivatives(q.val)
    return q.apply(np.log(th), d1 / th, d2 / th - (d1 / th) ** 2)


def psi_jet(u: Expr, x, r, lam, P, theta=None):
    """Jet of ``Psi(y) = theta(|y - x|^2 / r^2) exp(lam u(y))`` at points ``P``."""
    theta = theta or make_theta()
    P = np.atleast_2d(np.asarray(P, float))
    x = _vec(x)
    m, n = P.shape
    D = P - x
    q = Jet(np.sum(D**2, axis=1) / r**2, 2 * D / r**2,
            np.broadcast_to(2 * np.eye(n) / r**2, (m, n, n)).copy())
    th, d1, d2 = theta.derivatives(q.val)
    cut = q.apply(th, d1, d2)
    return cut * (u.jet(P) * lam).exp()


def _check_negative(u, dom, box, label, n=4000, seed=0):
    if dom is None:
        return
    reg = Region(box, resolution=0, n_random=n, seed=seed, mask=lambda P: _inside(dom, P))
    P = reg.points()
    if len(P) and np.max(u(P)) >= 0:
        raise HypothesisFailed(f"u is not negative on {label}")


def _cert_covers(cert: MpshCertificate, p, radius):
    if cert.box is None:
        return True
    box = cert.box
    return bool(np.all(box[:, 0] <= p - radius + 1e-12) and np.all(box[:, 1] >= p + radius - 1e-12))


def psi_lower_bound(u: Expr, cert: MpshCertificate, x, r, v=None, p=None, dom=None):
    """``g(x, v) >= (1/r) exp(2 A u(x) / (c r^2)) |v|`` from the cut-off ``Psi``.

    Hypotheses checked: ``c > 0`` on a region covering ``B(p, 2r)``,
    ``|x - p| < r``, ``u(x) < 0`` and ``u < 0`` on domain samples.
    """
    x = _vec(x)
    p = x if p is None else _vec(p)
    v = np.zeros(len(x)) if v is None else _vec(v)
    if not cert.is_strong:
        raise HypothesisFailed("certificate is not strongly MPSH (c <= 0)")
    if not _cert_covers(cert, p, 2 * r):
        raise HypothesisFailed("certificate region does not cover B(p, 2r)")
    if np.linalg.norm(x - p) >= r:
        raise HypothesisFailed("x is not in B(p, r)")
    if dom is not None and not contains(dom, x):
        raise HypothesisFailed("x is not in the domain")
    ux = u(x)
    if ux >= 0:
        raise HypothesisFailed("u(x) is not negative")
    box = bounding_box(dom) if dom is not None else None
    if box is None and dom is not None:
        box = np.stack([p - 2 * r, p + 2 * r], axis=1)
    if dom is not None:
        _check_negative(u, dom, box, "the domain")
    theta = make_theta()
    A, c = theta.A, cert.c
    lam = 4 * A / (c * r**2)
    value = np.exp(2 * A * ux / (c * r**2)) / r * np.linalg.norm(v)
    return LowerBoundCert(float(value), "psi",
                          {"x": x, "v": v, "p": p, "r": r, "A": A, "c": c, "lambda": lam,
                           "u": u, "u(x)": ux},
                          ["u MPSH and negative on the domain", "c certified on B(p, 2r)"])


def global_mpsh_bound(u: Expr, cert: MpshCertificate, x, v):
    """``sqrt(c / (4 A e)) |v| / sqrt(|u(x)|)`` for ``u < 0`` with ``c > 0``
    certified on the whole domain."""
    x, v = _vec(x), _vec(v)
    if not cert.is_strong:
        raise HypothesisFailed("certificate is not strongly MPSH (c <= 0)")
    ux = u(x)
    if ux >= 0:
        raise HypothesisFailed("u(x) is not negative")
    A = make_theta().A
    value = np.sqrt(cert.c / (4 * A * np.e)) * np.linalg.norm(v) / np.sqrt(abs(ux))
    return LowerBoundCert(float(value), "global_mpsh",
                          {"x": x, "v": v, "A": A, "c": cert.c, "u": u, "u(x)": ux},
                          ["u negative on the domain", "c certified on the domain"])


def smc_constants(dom: Sublevel, cert: MpshCertificate, n_samples=4000, seed=0):
    """``(C, k2)`` with ``|u| <= k2 dist`` on samples and
    ``C = sqrt(c / (4 A e k2))``."""
    rng = np.random.default_rng(seed)
    box = dom.box
    P = box[:, 0] + rng.random((n_samples, dom.dim)) * (box[:, 1] - box[:, 0])
    P = P[dom._values(P) < 0]
    if len(P) == 0:
        raise HypothesisFailed("no domain samples")
    u = dom.field
    # distances of the samples with the smallest |u| dominate k2; use a subset
    order = np.argsort(np.abs(u(P)))[:200]
    k2 = 0.0
    for p in P[order]:
        d = boundary_distance(dom, p)
        if d > 0:
            k2 = max(k2, abs(u(p)) / d)
    A = make_theta().A
    return float(np.sqrt(cert.c / (4 * A * np.e * k2))), k2


def smc_bound(dom: Sublevel, cert: MpshCertificate, x, v, k2=None):
    """``C |v| / sqrt(dist(x))`` with ``C = sqrt(c / (4 A e k2))``.

    The certificate must cover the domain (the underlying estimate needs
    ``c`` everywhere).  ``k2`` is estimated by sampling when omitted and is
    never allowed below ``|u(x)| / dist(x)``.
    """
    x, v = _vec(x), _vec(v)
    if not cert.is_strong:
        raise HypothesisFailed("certificate is not strongly MPSH (c <= 0)")
    if not contains(dom, x):
        raise HypothesisFailed("x is not in the domain")
    dist = boundary_distance(dom, x)
    ux = dom.field(x)
    if k2 is None:
        _, k2 = smc_constants(dom, cert)
    k2 = max(k2, abs(ux) / dist)
    A = make_theta().A
    C = np.sqrt(cert.c / (4 * A * np.e * k2))
    return LowerBoundCert(float(C * np.linalg.norm(v) / np.sqrt(dist)), "smc",
                          {"x": x, "v": v, "C": C, "k2": k2, "c": cert.c, "dist": dist},
                          ["u negative with c certified on the domain", "|u| <= k2 dist"])


# --------------------------------------------------------------------------
# Convex geometry
# --------------------------------------------------------------------------

def halfspace_bound(H: HalfSpace, x, v):
    """``|v . n| / (2 (x . n - offset))`` (Schwarz lemma for positive
    harmonic functions)."""
    x, v = _vec(x), _vec(v)
    d = x @ H.normal - H.offset
    if d <= 0:
        raise PointOutside("x is not in the half-space")
    return LowerBoundCert(float(abs(v @ H.normal) / (2 * d)), "halfspace",
                          {"x": x, "v": v, "normal": H.normal, "offset": H.offset},
                          ["domain contained in the half-space"])


def convex_bound(dom, x, v):
    """Best half-space bound over the faces of a polyhedral domain."""
    faces = [dom] if isinstance(dom, HalfSpace) else list(dom.halfspaces)
    best = None
    for i, h in enumerate(faces):
        c = halfspace_bound(h, x, v)
        if best is None or c.value > best.value:
            best = c
            best.inputs["face"] = i
    return LowerBoundCert(best.value, "convex", best.inputs, best.hypotheses)


def axial_constants(normals):
    """``(axis, c3_stated, c3_sound)`` for ``n-1`` independent unit normals.

    ``axis`` spans the common orthogonal line.  ``c3_stated = 1/sigma_min``;
    ``c3_sound = sqrt(n-1)/sigma_min`` also covers the passage from the
    Euclidean norm of ``(w . y_i)`` to its maximum.
    """
    Y = np.atleast_2d(np.asarray(normals, float))
    k, n = Y.shape
    if k != n - 1:
        raise RankDeficient(f"need exactly n-1 = {n - 1} normals, got {k}")
    U, S, Vt = np.linalg.svd(Y)
    if S[-1] <= 1e-8 * S[0]:
        raise RankDeficient("normals are not linearly independent")
    axis = Vt[-1]
    return axis, 1.0 / S[-1], np.sqrt(n - 1) / S[-1]


def axial_bound(dom: Polyhedral, v, c1, faces=None, x=None):
    """``c2 |v_n|`` where ``v_n`` is the component along the common
    orthogonal axis of ``n-1`` face normals.

    ``c2 = min(1/(4 c1 c3), 1/(2 c1 c3 sqrt(n-1)))`` with ``c3 = 1/sigma_min``.
    The second term keeps the bound valid in every dimension; the two agree
    up to n = 5.  If ``faces`` is omitted the best admissible choice is used.
    """
    v = _vec(v)
    n = dom.dim
    hs = list(dom.halfspaces)
    if x is not None:
        x = _vec(x)
        if not contains(dom, x):
            raise PointOutside("x is not in the domain")
    choices = [tuple(faces)] if faces is not None else list(combinations(range(len(hs)), n - 1))
    best = None
    for ch in choices:
        Y = np.stack([hs[i].normal for i in ch])
        try:
            axis, c3, c3_sound = axial_constants(Y)
        except RankDeficient:
            if faces is not None:
                raise
            continue
        if x is not None:
            excess = max(x @ hs[i].normal - hs[i].offset for i in ch)
            if excess > c1 + 1e-12:
                if faces is not None:
                    raise HypothesisFailed("x . y_i - a_i exceeds c1")
                continue
        c2 = min(1 / (4 * c1 * c3), 1 / (2 * c1 * c3_sound))
        val = c2 * abs(v @ axis)
        if best is None or val > best.value:
            best = LowerBoundCert(float(val), "axial",
                                  {"v": v, "c1": c1, "c2": c2, "c3": c3, "faces": list(ch),
                                   "axis": axis},
                                  ["x . y_i - a_i <= c1 on the chosen faces"])
    if best is None:
        raise RankDeficient("no n-1 independent face normals")
    return best


def circumscribed_ball_bound(dom, center, R, x, v, assume_contained=False, n_samples=20000, seed=0):
    """Ball comparison: ``dom`` inside ``B(center, R)`` gives the ball metric
    as a lower bound."""
    center, x, v = _vec(center), _vec(x), _vec(v)
    if not assume_contained:
        if isinstance(dom, Ball):
            ok = np.linalg.norm(dom.center - center) + dom.radius <= R + 1e-12
        elif isinstance(dom, (HalfSpace,)):
            ok = False
        elif isinstance(dom, Sublevel):
            rng = np.random.default_rng(seed)
            P = dom.box[:, 0] + rng.random((n_samples, dom.dim)) * (dom.box[:, 1] - dom.box[:, 0])
            P = P[dom._values(P) < 0]
            ok = bool(np.all(np.linalg.norm(P - center, axis=1) < R))
        else:
            raise NotContained("containment of a polyhedron must be asserted by the caller")
        if not ok:
            raise NotContained("the domain is not inside the ball")
    return LowerBoundCert(bck_ball_metric(center, R, x, v), "circumscribed_ball",
                          {"x": x, "v": v, "center": center, "R": R},
                          ["domain contained in the ball"])


# --------------------------------------------------------------------------
# Localization
# --------------------------------------------------------------------------

def _closure_samples(dom, window, m, seed):
    sob = qmc.Sobol(len(window), scramble=True, seed=seed)
    U = sob.random_base2(int(np.ceil(np.log2(max(m, 2)))))
    P = window[:, 0] + U * (window[:, 1] - window[:, 0])
    inside = P[_closure_mask(dom, P)]
    extra = []
    if isinstance(dom, Ball):
        w = P - dom.center
        nr = np.linalg.norm(w, axis=1)
        extra.append(dom.center + dom.radius * w[nr > 0] / nr[nr > 0, None])
    elif isinstance(dom, (HalfSpace, Polyhedral)):
        faces = [dom] if isinstance(dom, HalfSpace) else list(dom.halfspaces)
        for h in faces:
            Q = P - (P @ h.normal - h.offset)[:, None] * h.normal
            extra.append(Q[_closure_mask(dom, Q)])
    return np.concatenate([inside] + extra) if extra else inside


def _closure_mask(dom, P):
    if isinstance(dom, Sublevel):
        return dom._values(P) <= 0
    return signed_clearance(dom, P) >= -1e-12


def localization_epsilon(dom, peak: Expr, p, r0, window=None, n_samples=8192, seed=0):
    """``-sup { peak(y) : y in closure(dom), |y - p| >= r0^2 }``.

    Quasi-random samples (including boundary projections for exact domains)
    followed by a constrained local refinement of the best samples.
    """
    p = _vec(p)
    if window is None:
        window = bounding_box(dom)
        if window is None:
            window = np.stack([p - 4 * r0, p + 4 * r0], axis=1)
    window = np.asarray(window, float)
    P = _closure_samples(dom, window, n_samples, seed)
    P = P[np.linalg.norm(P - p, axis=1) >= r0**2]
    if len(P) == 0:
        raise HypothesisFailed("no samples in the epsilon region")
    vals = peak(P)
    sup = float(np.max(vals))
    cons = [{"type": "ineq", "fun": lambda y: np.sum((y - p) ** 2) - r0**4}]
    if isinstance(dom, Sublevel):
        cons.append({"type": "ineq", "fun": lambda y: -dom.field(y)})
    else:
        cons.append({"type": "ineq", "fun": lambda y: signed_clearance(dom, y)[0] + 0.0})
    for k in np.argsort(vals)[-5:]:
        res = minimize(lambda y: -peak(y), P[k], method="SLSQP", constraints=cons,
                       options={"maxiter": 200, "ftol": 1e-14})
        y = res.x
        if (np.linalg.norm(y - p) >= r0**2 - 1e-12 and _closure_mask(dom, y[None, :])[0]
                and np.all(np.isfinite(y))):
            sup = max(sup, float(peak(y)))
    return -sup


def localization_constant(dom, peak: Expr, p, r0, c0, phi=None, slack=0.05, window=None,
                          n_samples=8192, seed=0):
    """``(c, eps0)`` with ``c = 4 c0 / eps0``.

    Checks the peak hypotheses on samples near ``p``: ``peak <= 0``,
    ``peak(p) = 0``, ``|peak(y)| <= c0 |y - p|`` and MPSH.  With ``phi`` the
    uniform choice ``eps0 = phi^{-1}(r0^2)`` is used instead of sampling.
    """
    p = _vec(p)
    if abs(peak(p)) > 1e-10:
        raise HypothesisFailed("peak(p) is not 0")
    near = np.stack([p - 2 * r0, p + 2 * r0], axis=1)
    reg = Region(near, resolution=0, n_random=4000, seed=seed,
                 mask=lambda P: _closure_mask(dom, P))
    P = reg.points()
    if len(P):
        J = peak.jet(P)
        if np.max(J.val) > 1e-12:
            raise HypothesisFailed("peak is positive somewhere on the closure")
        dist = np.linalg.norm(P - p, axis=1)
        if np.any(np.abs(J.val) > c0 * dist + 1e-12):
            raise HypothesisFailed("|peak(y)| <= c0 |y - p| fails on samples")
        if np.min(smallest_pair_sum(J.hess)) < -MPSH_TOL:
            raise HypothesisFailed("peak is not MPSH near p")
    if phi is None:
        eps0 = localization_epsilon(dom, peak, p, r0, window, n_samples, seed)
    else:
        lo, hi = 0.0, 1.0
        while phi(hi) < r0**2:
            hi *= 2
            if hi > 1e12:
                raise HypothesisFailed("phi never reaches r0^2")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if phi(mid) >= r0**2:
                hi = mid
            else:
                lo = mid
        eps0 = lo
    if eps0 <= 0:
        raise HypothesisFailed("epsilon0 is not positive")
    eps_used = (1 - slack) * eps0
    return 4 * c0 / eps_used, eps0


def localization_bound(dom, peak: Expr, p, r0, x, v, c0, inner_lower=None, phi=None,
                       slack=0.05, window=None, n_samples=8192, seed=0, constant=None):
    """``(1 - c |x - p|) * inner_lower(x, v)`` near a boundary point ``p``.

    ``inner_lower`` bounds the metric of ``dom`` intersected with
    ``B(p, r0)``; the default is the ball metric of ``B(p, r0)``.
    """
    x, v, p = _vec(x), _vec(v), _vec(p)
    if not contains(dom, x):
        raise HypothesisFailed("x is not in the domain")
    if np.linalg.norm(x - p) >= r0:
        raise HypothesisFailed("x is not in B(p, r0)")
    if constant is None:
        c, eps0 = localization_constant(dom, peak, p, r0, c0, phi, slack, window, n_samples, seed)
    else:
        c, eps0 = constant
    factor = 1 - c * np.linalg.norm(x - p)
    if factor <= 0:
        raise NonpositiveFactor(f"1 - c|x - p| = {factor:.3g} <= 0")
    if inner_lower is None:
        inner = bck_ball_metric(p, r0, x, v)
    else:
        inner = float(inner_lower(x, v))
    return LowerBoundCert(float(factor * inner), "localization",
                          {"x": x, "v": v, "p": p, "r0": r0, "c": c, "eps0": eps0,
                           "factor": factor, "inner": inner},
                          ["peak hypotheses checked on samples near p"])


# --------------------------------------------------------------------------
# Combinator
# --------------------------------------------------------------------------

@dataclass
class Toolbox:
    """Extra certificates offered to ``best_lower``.

    Attributes
    ----------
    mpsh : list of (Expr, MpshCertificate)
        Negative fields with a domain-wide certificate (global estimate).
    balls : list of (center, R)
        Balls known to contain the domain.
    localization : list of dict
        Keyword arguments for ``localization_bound`` (without x, v).
    psi : list of dict
        Keyword arguments for ``psi_lower_bound`` (u, cert, r, p).
    """

    mpsh: list = field(default_factory=list)
    balls: list = field(default_factory=list)
    localization: list = field(default_factory=list)
    psi: list = field(default_factory=list)


def best_lower(dom, x, v, toolbox: Optional[Toolbox] = None):
    """Largest applicable certified lower bound for ``g(x, v)``."""
    x, v = _vec(x), _vec(v)
    cands = []
    if isinstance(dom, Ball):
        cands.append(circumscribed_ball_bound(dom, dom.center, dom.radius, x, v))
    elif isinstance(dom, HalfSpace):
        cands.append(halfspace_bound(dom, x, v))
    elif isinstance(dom, Polyhedral):
        cands.append(convex_bound(dom, x, v))
        A = dom.normals
        if np.linalg.matrix_rank(A, tol=1e-8 * np.linalg.norm(A, 2)) >= dom.dim - 1:
            c1 = float(np.max(x @ A.T - dom.offsets))
            try:
                cands.append(axial_bound(dom, v, c1, x=x))
            except (RankDeficient, HypothesisFailed):
                pass
    tb = toolbox or Toolbox()
    for center, R in tb.balls:
        cands.append(circumscribed_ball_bound(dom, center, R, x, v, assume_contained=True))
    for u, cert in tb.mpsh:
        try:
            cands.append(global_mpsh_bound(u, cert, x, v))
        except HypothesisFailed:
            pass
    for kw in tb.localization:
        try:
            cands.append(localization_bound(dom, x=x, v=v, **kw))
        except (HypothesisFailed, NonpositiveFactor):
            pass
    for kw in tb.psi:
        try:
            cands.append(psi_lower_bound(x=x, v=v, dom=dom, **kw))
        except HypothesisFailed:
            pass
    if not cands:
        return LowerBoundCert(0.0, "none", {"x": x, "v": v}, [])
    return max(cands, key=lambda c: c.value)
