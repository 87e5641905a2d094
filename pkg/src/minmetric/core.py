"""Domains in R^n, conformal frames and 2-planes.

Every domain answers two geometric questions: does a point lie inside (with a
prescribed clearance) and how far is a point from the boundary.  Balls,
half-spaces and polyhedra answer exactly; sublevel sets of an expression use
ray bisection inside a user supplied sampling box.
"""
from dataclasses import dataclass
from itertools import product
from typing import Tuple

import numpy as np

from .config import DEFAULT
from .errors import InvalidDomain, OutsideBox, PointOutside, ZeroDirection
from .expr import Expr

# relative tolerance of the ray bisection used for sublevel domains
RAY_RTOL = 1e-3


def _vec(p):
    return np.asarray(p, dtype=float).reshape(-1)


# --------------------------------------------------------------------------
# Frames and planes
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConformalFrame:
    """Pair ``(u, v)`` with ``|u| = |v| > 0`` and ``u . v = 0``."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u, v = _vec(self.u), _vec(self.v)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        nu = np.linalg.norm(u)
        if nu == 0:
            raise ZeroDirection("frame vectors must be nonzero")
        tol = DEFAULT.tol_frame * max(1.0, nu**2)
        if abs(nu**2 - v @ v) > tol or abs(u @ v) > tol:
            raise ValueError("frame is not conformal: need |u| = |v| and u . v = 0")

    @property
    def scale(self):
        return float(np.linalg.norm(self.u))

    def null_vector(self):
        """The complex null vector ``u - i v``."""
        return self.u - 1j * self.v


@dataclass(frozen=True, eq=False)
class TwoPlane:
    """Oriented-free 2-plane through the origin, stored by an orthonormal basis.

    Two planes compare equal when their orthogonal projectors agree.
    """

    b1: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        b1, b2 = _vec(self.b1), _vec(self.b2)
        if np.linalg.norm(b1) == 0 or np.linalg.norm(b2) == 0:
            raise ZeroDirection("plane spanned by a zero vector")
        q1 = b1 / np.linalg.norm(b1)
        w = b2 - (b2 @ q1) * q1
        if np.linalg.norm(w) < 1e-12 * np.linalg.norm(b2):
            raise ValueError("vectors do not span a 2-plane")
        object.__setattr__(self, "b1", q1)
        object.__setattr__(self, "b2", w / np.linalg.norm(w))

    @property
    def basis(self):
        return np.stack([self.b1, self.b2], axis=1)

    def projector(self):
        B = self.basis
        return B @ B.T

    def __eq__(self, other):
        return isinstance(other, TwoPlane) and np.allclose(
            self.projector(), other.projector(), atol=1e-10)

    def __hash__(self):
        return hash(tuple(np.round(self.projector(), 8).ravel()))


def frame_complete(u, seed=None) -> ConformalFrame:
    """Complete ``u`` to a conformal frame ``(u, v)``.

    ``v`` is the Gram-Schmidt projection of ``seed`` orthogonal to ``u``,
    rescaled to ``|u|``.  Without a seed the first standard basis vector not
    parallel to ``u`` is used.
    """
    u = _vec(u)
    nu = np.linalg.norm(u)
    if nu == 0:
        raise ZeroDirection("cannot complete a zero vector")
    uh = u / nu
    candidates = [_vec(seed)] if seed is not None else list(np.eye(len(u)))
    for s in candidates:
        w = s - (s @ uh) * uh
        if np.linalg.norm(w) > 1e-8 * max(1.0, np.linalg.norm(s)):
            return ConformalFrame(u, nu * w / np.linalg.norm(w))
    raise ZeroDirection("seed is parallel to u")


# --------------------------------------------------------------------------
# Domains
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = _vec(self.center)
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise InvalidDomain("ball radius must be positive")
        if len(c) < 3:
            raise InvalidDomain("dimension must be at least 3")

    @property
    def dim(self):
        return len(self.center)


@dataclass(frozen=True, eq=False)
class HalfSpace:
    """``{x : x . normal > offset}``; the normal is normalized on construction."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        nv = _vec(self.normal)
        s = np.linalg.norm(nv)
        if s == 0:
            raise InvalidDomain("zero normal")
        if len(nv) < 3:
            raise InvalidDomain("dimension must be at least 3")
        object.__setattr__(self, "normal", nv / s)
        object.__setattr__(self, "offset", float(self.offset) / s)

    @property
    def dim(self):
        return len(self.normal)


@dataclass(frozen=True, eq=False)
class Polyhedral:
    """Finite intersection of open half-spaces."""

    halfspaces: Tuple[HalfSpace, ...]

    def __post_init__(self):
        hs = tuple(self.halfspaces)
        if not hs:
            raise InvalidDomain("polyhedral domain needs at least one half-space")
        if len({h.dim for h in hs}) != 1:
            raise InvalidDomain("half-spaces of mixed dimension")
        object.__setattr__(self, "halfspaces", hs)

    @property
    def dim(self):
        return self.halfspaces[0].dim

    @property
    def normals(self):
        return np.stack([h.normal for h in self.halfspaces])

    @property
    def offsets(self):
        return np.array([h.offset for h in self.halfspaces])


@dataclass(frozen=True, eq=False)
class Sublevel:
    """``{x in box : field(x) < 0}``.

    The box is a sampling window ``(n, 2)`` of ``[lo, hi]`` rows; it is the
    region in which rays and samples are taken, not part of the definition
    of unbounded domains.  ``convex_hint`` tells the disc validator that
    checking the boundary circle suffices.
    """

    field: Expr
    box: np.ndarray
    convex_hint: bool = False

    def __post_init__(self):
        box = np.asarray(self.box, dtype=float)
        if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 1] <= box[:, 0]):
            raise InvalidDomain("box must be an (n, 2) array with lo < hi")
        if box.shape[0] != self.field.n:
            raise InvalidDomain("box and expression dimensions differ")
        if box.shape[0] < 3:
            raise InvalidDomain("dimension must be at least 3")
        object.__setattr__(self, "box", box)
        # nonempty check on a coarse grid (an open sublevel set needs a sample)
        n = box.shape[0]
        if 9**n <= 100_000:
            g = [np.linspace(lo, hi, 9) for lo, hi in box]
            pts = np.stack(np.meshgrid(*g, indexing="ij"), -1).reshape(-1, n)
        else:
            u = np.random.default_rng(0).random((20_000, n))
            pts = box[:, 0] + u * (box[:, 1] - box[:, 0])
        if not np.any(self._values(pts) < 0):
            # the midpoint of the box is the most common interior point
            if self._values(box.mean(axis=1)[None, :])[0] >= 0:
                raise InvalidDomain("no sampled point of the box lies in the sublevel set")

    @property
    def dim(self):
        return self.box.shape[0]

    @property
    def diameter(self):
        return float(np.linalg.norm(self.box[:, 1] - self.box[:, 0]))

    def in_box(self, P):
        P = np.atleast_2d(P)
        return np.all((P >= self.box[:, 0] - 1e-12) & (P <= self.box[:, 1] + 1e-12), axis=1)

    def _values(self, P):
        from .errors import DomainError, NonFinite
        try:
            return np.atleast_1d(self.field(P))
        except (DomainError, NonFinite):
            # evaluate pointwise so that bad points count as outside
            out = np.empty(len(P))
            for i, p in enumerate(P):
                try:
                    out[i] = self.field(p)
                except (DomainError, NonFinite):
                    out[i] = np.inf
            return out


Domain = (Ball, HalfSpace, Polyhedral, Sublevel)


def dimension(dom):
    return dom.dim


# --------------------------------------------------------------------------
# Clearance
# --------------------------------------------------------------------------

def signed_clearance(dom, P):
    """Signed distance to the complement, vectorized over rows of ``P``.

    Exact for balls, half-spaces and polyhedra.  For sublevel sets it is the
    first-order estimate ``-u / |grad u|``, whose sign is exact.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if isinstance(dom, Ball):
        return dom.radius - np.linalg.norm(P - dom.center, axis=1)
    if isinstance(dom, HalfSpace):
        return P @ dom.normal - dom.offset
    if isinstance(dom, Polyhedral):
        return np.min(P @ dom.normals.T - dom.offsets, axis=1)
    if isinstance(dom, Sublevel):
        vals = dom._values(P)
        out = np.full(len(P), -np.inf)
        ok = np.isfinite(vals)
        if np.any(ok):
            J = dom.field.jet(P[ok], order=1)
            gn = np.linalg.norm(J.grad, axis=1)
            est = -J.val / np.maximum(gn, 1e-300)
            out[ok] = np.clip(est, -dom.diameter, dom.diameter)
        return out
    raise TypeError(f"not a domain: {dom!r}")


def contains(dom, p, margin=0.0) -> bool:
    """True iff ``p`` lies in ``dom`` with clearance at least ``margin``.

    The point must be strictly inside (clearance > 0) even when ``margin``
    is zero.  Sublevel domains raise ``OutsideBox`` for points outside the
    sampling box.
    """
    p = _vec(p)
    if len(p) != dom.dim:
        raise ValueError("dimension mismatch")
    if isinstance(dom, Sublevel):
        if not dom.in_box(p)[0]:
            raise OutsideBox(f"point {p} is outside the sampling box")
        if dom._values(p[None, :])[0] >= 0:
            return False
        return margin <= 0 or boundary_distance(dom, p) >= margin
    c = signed_clearance(dom, p)[0]
    return bool(c > 0 and c >= margin)


def _ray_directions(n):
    if n <= 3:
        dirs = [np.array(d, float) for d in product((-1, 0, 1), repeat=n) if any(d)]
    else:
        dirs = []
        eye = np.eye(n)
        for i in range(n):
            dirs += [eye[i], -eye[i]]
            for j in range(i + 1, n):
                for si, sj in product((1, -1), repeat=2):
                    dirs.append(si * eye[i] + sj * eye[j])
    return [d / np.linalg.norm(d) for d in dirs]


def _box_exit(dom, p, d):
    """Largest t with p + t d inside the sampling box."""
    t = np.inf
    for k in range(dom.dim):
        if d[k] > 0:
            t = min(t, (dom.box[k, 1] - p[k]) / d[k])
        elif d[k] < 0:
            t = min(t, (dom.box[k, 0] - p[k]) / d[k])
    return max(t, 0.0)


def ray_hit(dom, p, d, n_march=256):
    """Distance along the unit ray ``p + t d`` to the first boundary crossing.

    Marches through the sampling box and bisects the first sign change to
    relative tolerance ``RAY_RTOL``; returns ``inf`` if no crossing is seen.
    """
    tmax = _box_exit(dom, p, d)
    if tmax <= 0:
        return 0.0
    ts = np.linspace(0.0, tmax, n_march + 1)[1:]
    vals = dom._values(p + ts[:, None] * d)
    hit = np.nonzero(vals >= 0)[0]
    if len(hit) == 0:
        return np.inf
    k = hit[0]
    lo = 0.0 if k == 0 else ts[k - 1]
    hi = ts[k]
    while hi - lo > RAY_RTOL * 1e-2 * max(hi, 1e-300):
        mid = 0.5 * (lo + hi)
        if dom._values((p + mid * d)[None, :])[0] >= 0:
            hi = mid
        else:
            lo = mid
    return lo


def boundary_distance(dom, p) -> float:
    """Euclidean distance from ``p`` to the boundary of ``dom``.

    Exact for balls, half-spaces and polyhedra.  For sublevel sets the value
    is the minimum over sampled rays, a gradient-aligned ray refinement and
    the first-order estimate ``|u| / |grad u|``, with relative tolerance
    ``RAY_RTOL``.
    """
    p = _vec(p)
    if not isinstance(dom, Sublevel):
        c = signed_clearance(dom, p)[0]
        if c <= 0:
            raise PointOutside(f"point {p} is not in the domain")
        return float(c)
    if not dom.in_box(p)[0]:
        raise OutsideBox(f"point {p} is outside the sampling box")
    if dom._values(p[None, :])[0] >= 0:
        raise PointOutside(f"point {p} is not in the domain")
    best = np.inf
    hits = []
    for d in _ray_directions(dom.dim):
        t = ray_hit(dom, p, d)
        hits.append((t, d))
        best = min(best, t)
    # refine: the nearest boundary point q satisfies (q - p) || grad u(q)
    finite = sorted([h for h in hits if np.isfinite(h[0])], key=lambda h: h[0])[:3]
    for t, d in finite:
        for _ in range(8):
            q = p + t * d
            g = dom.field.jet(q[None, :], order=1).grad[0]
            ng = np.linalg.norm(g)
            if ng == 0:
                break
            d_new = g / ng
            t_new = ray_hit(dom, p, d_new)
            if not np.isfinite(t_new):
                break
            best = min(best, t_new)
            if np.linalg.norm(d_new - d) < 1e-6:
                break
            t, d = t_new, d_new
    J = dom.field.jet(p[None, :], order=1)
    gn = np.linalg.norm(J.grad[0])
    if gn > 0:
        best = min(best, abs(J.val[0]) / gn)
    if not np.isfinite(best):
        # no crossing inside the window: report the distance to the window
        best = float(np.min(np.minimum(p - dom.box[:, 0], dom.box[:, 1] - p)))
    return float(best)


def bounding_box(dom, pad=0.0):
    """A box containing the domain, or ``None`` for unbounded exact domains."""
    if isinstance(dom, Ball):
        r = dom.radius + pad
        return np.stack([dom.center - r, dom.center + r], axis=1)
    if isinstance(dom, Sublevel):
        return dom.box.copy()
    return None


def sample_domain(dom, m, rng, box=None):
    """Up to ``m`` points of ``dom`` drawn uniformly from a box."""
    if box is None:
        box = bounding_box(dom)
    if box is None:
        raise ValueError("a sampling box is required for unbounded domains")
    box = np.asarray(box, float)
    out = []
    total = 0
    while total < m:
        P = box[:, 0] + rng.random((4 * m, len(box))) * (box[:, 1] - box[:, 0])
        keep = P[signed_clearance(dom, P) > 0] if not isinstance(dom, Sublevel) else P[dom._values(P) < 0]
        out.append(keep)
        total += len(keep)
        if total == 0 and len(out) > 20:
            break
    if not out:
        return np.zeros((0, len(box)))
    return np.concatenate(out)[:m]


# --------------------------------------------------------------------------
# Polylines
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Polyline:
    vertices: np.ndarray

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if len(V) < 2:
            raise ValueError("a polyline needs at least two vertices")
        object.__setattr__(self, "vertices", V)

    @property
    def segments(self):
        V = self.vertices
        return list(zip(V[:-1], V[1:]))

    def euclidean_length(self):
        return float(np.sum(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)))
