"""Structural hyperbolicity verdicts with certificates."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .bounds import MpshCertificate, Region, mpsh_check
from .core import Ball, HalfSpace, Polyhedral, Sublevel
from .errors import EmptyDomain, HypothesisFailed
from .expr import Expr

COMPLETE = "CompleteHyperbolic"
HYPERBOLIC = "Hyperbolic"
NON_HYPERBOLIC = "NonHyperbolic"
UNKNOWN = "Unknown"

RANK_RTOL = 1e-8


@dataclass
class Verdict:
    status: str
    certificate: dict = field(default_factory=dict)

    def to_dict(self):
        return {"status": self.status, "certificate": _plain(self.certificate)}


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, dict):
        return {k: _plain(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(w) for w in v]
    if isinstance(v, MpshCertificate):
        return v.to_dict()
    if isinstance(v, Expr):
        return v.text
    return v


def numerical_rank(A, rtol=RANK_RTOL):
    A = np.atleast_2d(A)
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > rtol * s[0])) if len(s) and s[0] > 0 else 0


def interior_point(dom: Polyhedral, box=1e6):
    """Chebyshev center of the polyhedron (clipped to a large box).

    Raises ``EmptyDomain`` if no point has positive clearance.
    """
    A, b = dom.normals, dom.offsets
    n = dom.dim
    # maximize t subject to a_i . x - b_i >= t, |x_j| <= box, t <= 1
    c = np.zeros(n + 1)
    c[-1] = -1
    A_ub = np.hstack([-A, np.ones((len(A), 1))])
    res = linprog(c, A_ub=A_ub, b_ub=-b, bounds=[(-box, box)] * n + [(None, 1.0)],
                  method="highs")
    if res.status != 0 or res.x[-1] <= 0:
        raise EmptyDomain("the polyhedron has no interior point")
    return res.x[:n]


def _greedy_independent(normals, k):
    """Indices of ``k`` linearly independent rows, added one at a time:
    each new row must increase the rank of the selection."""
    chosen = []
    for i in range(len(normals)):
        trial = chosen + [i]
        if numerical_rank(normals[trial]) == len(trial):
            chosen = trial
            if len(chosen) == k:
                break
    return chosen


def _lineality_basis(normals, n):
    _, s, Vt = np.linalg.svd(normals)
    r = int(np.sum(s > RANK_RTOL * s[0])) if len(s) and s[0] > 0 else 0
    return Vt[r:], r


def witness_plane_valid(dom, point, basis, n_samples=1000, scale=1e3, seed=0):
    """Sample the affine plane ``point + span(basis)`` in a large box and
    check that every sample lies in the domain."""
    rng = np.random.default_rng(seed)
    T = rng.uniform(-scale, scale, (n_samples, len(basis)))
    P = point + T @ np.asarray(basis)
    A, b = dom.normals, dom.offsets
    return bool(np.all(P @ A.T - b > 0))


def classify_convex(dom: Polyhedral) -> Verdict:
    """Rank test on the face normals of a convex polyhedron.

    Rank ``>= n-1``: complete hyperbolic, with ``n-1`` independent
    separating hyperplanes.  Rank ``<= n-2``: the lineality space has
    dimension at least 2 and contains an affine 2-plane through an interior
    point; the verdict is non-hyperbolic with that plane.
    """
    if isinstance(dom, HalfSpace):
        dom = Polyhedral([dom])
    n = dom.dim
    A = dom.normals
    lin, r = _lineality_basis(A, n)
    x0 = interior_point(dom)
    # translations along the lineality space keep the point inside
    x0 = x0 - lin.T @ (lin @ x0)
    if r >= n - 1:
        idx = _greedy_independent(A, n - 1)
        return Verdict(COMPLETE, {
            "reason": "n-1 linearly independent separating hyperplanes",
            "rank": r,
            "hyperplanes": [{"index": i, "normal": dom.halfspaces[i].normal,
                             "offset": dom.halfspaces[i].offset} for i in idx],
            "interior_point": x0})
    basis = lin[:2]
    ok = witness_plane_valid(dom, x0, basis)
    if not ok:
        raise HypothesisFailed("witness plane left the domain on samples")
    return Verdict(NON_HYPERBOLIC, {
        "reason": "the domain contains an affine 2-plane",
        "rank": r,
        "plane": {"point": x0, "basis": basis},
        "validated_samples": 1000})


def _sublevel_bounded(dom: Sublevel, n_samples=20000, seed=0, margin_frac=0.02):
    """The zero set must stay away from the faces of the sampling box."""
    rng = np.random.default_rng(seed)
    box = dom.box
    n = dom.dim
    w = box[:, 1] - box[:, 0]
    P = box[:, 0] + rng.random((n_samples, n)) * w
    # push half of the samples onto the box faces
    k = n_samples // 2
    ax = rng.integers(0, n, k)
    side = rng.integers(0, 2, k)
    P[np.arange(k), ax] = box[ax, side]
    near = np.any((P - box[:, 0] < margin_frac * w) | (box[:, 1] - P < margin_frac * w), axis=1)
    return bool(np.all(dom._values(P[near]) >= 0))


def classify_general(dom, witness: Optional[Expr] = None, region: Optional[Region] = None,
                     witness_clip: Optional[float] = None) -> Verdict:
    """Verdict for any domain type.

    Balls and box-bounded sublevel sets are hyperbolic; polyhedra go
    through the rank test; a negative MPSH witness that passes the sampled
    check certifies hyperbolicity; everything else is ``Unknown``.
    """
    if isinstance(dom, (Polyhedral, HalfSpace)):
        return classify_convex(dom)
    if isinstance(dom, Ball):
        return Verdict(HYPERBOLIC, {
            "reason": "bounded domain",
            "ball": {"center": dom.center, "radius": dom.radius},
            "note": "the ball is also strongly minimally convex; smc_upgrade gives completeness"})
    if isinstance(dom, Sublevel):
        if witness is not None:
            cert = _witness_certificate(dom, witness, region, witness_clip)
            if cert is not None:
                return Verdict(HYPERBOLIC, {"reason": "negative MPSH function on the domain",
                                            "witness": cert})
        if _sublevel_bounded(dom):
            return Verdict(HYPERBOLIC, {"reason": "bounded domain",
                                        "box": dom.box})
    return Verdict(UNKNOWN, {"reason": "no certificate applies"})


def _witness_certificate(dom, u, region, clip):
    """Sampled check that ``u`` is negative and MPSH on the domain.

    With ``clip`` the function ``max(u, clip)`` is used: its negativity is
    that of ``u`` and it is MPSH where ``u`` is (maximum of MPSH functions),
    so only ``u`` itself is tested, on the samples where ``u > clip``.
    """
    if region is None:
        region = Region(dom.box, resolution=0, n_random=20000, seed=0)
    P = region.points()
    P = P[dom._values(P) < 0]
    if len(P) == 0:
        return None
    vals = u(P)
    if np.max(vals) >= 0:
        return None
    lo = -np.inf if clip is None else clip

    def mask(Q):
        return (dom._values(Q) < 0) & (u(Q) > lo)
    reg = Region(region.box, resolution=region.resolution, n_random=region.n_random,
                 seed=region.seed, mask=mask, label="domain samples")
    if len(reg.points()) == 0:
        return None
    cert = mpsh_check(u, reg)
    if not cert.is_mpsh:
        return None
    return cert


def smc_upgrade(dom: Sublevel, collar=0.1, n_samples=20000, seed=0) -> Verdict:
    """Complete hyperbolicity of a bounded strongly minimally convex domain.

    Checks on samples: the domain is bounded in its box, the defining
    function has ``lambda_1 + lambda_2 >= c > 0`` on the collar
    ``|u| <= collar`` and a nonvanishing gradient there.
    """
    if not isinstance(dom, Sublevel):
        raise HypothesisFailed("smc_upgrade needs a sublevel domain")
    if not _sublevel_bounded(dom, seed=seed):
        raise HypothesisFailed("the domain reaches the sampling box")
    u = dom.field
    rng = np.random.default_rng(seed)
    box = dom.box
    P = box[:, 0] + rng.random((n_samples, dom.dim)) * (box[:, 1] - box[:, 0])
    P = P[np.abs(dom._values(P)) <= collar]
    if len(P) == 0:
        raise HypothesisFailed("no samples in the collar")
    J = u.jet(P)
    gmin = float(np.min(np.linalg.norm(J.grad, axis=1)))
    if gmin <= 1e-8:
        raise HypothesisFailed("the gradient vanishes on the collar")
    ev = np.linalg.eigvalsh(J.hess)
    s = ev[:, 0] + ev[:, 1]
    k = int(np.argmin(s))
    c = float(s[k])
    if c <= 0:
        raise HypothesisFailed(f"not strongly MPSH on the collar: c = {c:.3g} at {P[k]}")
    return Verdict(COMPLETE, {
        "reason": "bounded strongly minimally convex domain",
        "collar": collar, "c": c, "argmin": P[k], "min_gradient": gmin,
        "n_samples": int(len(P))})
