"""Pseudodistance estimates.

Upper bounds come from chains of discs (the length of a chain is the sum of
Poincare distances of its link parameters) or from integrating solver upper
bounds along a path.  Lower bounds integrate certified metric lower bounds,
or use closed-form distances of comparison domains that contain the domain.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .bounds import LowerBoundCert, Toolbox, best_lower
from .core import (Ball, HalfSpace, Polyhedral, Polyline, Sublevel, boundary_distance,
                   contains)
from .discs import NullDisc, mobius_disc, rotate_parameter, validate
from .errors import ChainFailed, PointOutside
from .extremal import SolverConfig, maximize_g
from .models import ball_distance, poincare_distance

LINK_TOL = 1e-8


def _vec(v):
    return np.asarray(v, dtype=float).reshape(-1)


# --------------------------------------------------------------------------
# Path integrals
# --------------------------------------------------------------------------

def _simpson_weights(m):
    if m < 3 or m % 2 == 0:
        raise ValueError("Simpson needs an odd node count >= 3")
    w = np.ones(m)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return w / (3 * (m - 1))


def _integrate(dom, path: Polyline, integrand, nodes):
    for p in path.vertices:
        if not contains(dom, p):
            raise PointOutside(f"path vertex {p} is not in the domain")
    w = _simpson_weights(nodes)
    t = np.linspace(0.0, 1.0, nodes)
    total = 0.0
    for a, b in path.segments:
        d = b - a
        if np.linalg.norm(d) == 0:
            continue
        vals = np.array([integrand(a + s * d, d) for s in t])
        total += float(w @ vals)
    return total


def path_length_upper(dom, path: Polyline, cfg: SolverConfig = SolverConfig(), nodes=65):
    """Composite Simpson integral of solver upper bounds of ``g`` along ``path``."""
    def f(p, d):
        return maximize_g(dom, p, d / np.linalg.norm(d), cfg).bound * np.linalg.norm(d)
    return _integrate(dom, path, f, nodes)


def path_length_lower(dom, path: Polyline, toolbox: Optional[Toolbox] = None, nodes=65):
    """Composite Simpson integral of ``best_lower`` along ``path``."""
    return _integrate(dom, path, lambda p, d: best_lower(dom, p, d, toolbox).value, nodes)


def distance_lower(dom, x, y, balls=()) -> LowerBoundCert:
    """Certified lower bound on the pseudodistance from comparison domains.

    Uses the exact ball distance for balls (chords are geodesics), the
    half-space distance ``(1/2)|log(d(y)/d(x))|`` for each face of a
    half-space or polyhedron, and the ball distance of any ball in ``balls``
    assumed to contain the domain.
    """
    x, y = _vec(x), _vec(y)
    for p in (x, y):
        if not contains(dom, p):
            raise PointOutside(f"{p} is not in the domain")
    cands = [LowerBoundCert(0.0, "trivial", {"x": x, "y": y})]
    if isinstance(dom, Ball):
        cands.append(LowerBoundCert(ball_distance(x, y, dom.center, dom.radius), "ball",
                                    {"x": x, "y": y}, []))
    faces = [dom] if isinstance(dom, HalfSpace) else (
        list(dom.halfspaces) if isinstance(dom, Polyhedral) else [])
    for i, h in enumerate(faces):
        dx, dy = x @ h.normal - h.offset, y @ h.normal - h.offset
        cands.append(LowerBoundCert(0.5 * abs(np.log(dy / dx)), "halfspace",
                                    {"x": x, "y": y, "face": i},
                                    ["domain contained in the half-space"]))
    for c, R in balls:
        cands.append(LowerBoundCert(ball_distance(x, y, c, R), "circumscribed_ball",
                                    {"x": x, "y": y, "center": _vec(c), "R": R},
                                    ["domain contained in the ball"]))
    return max(cands, key=lambda c: c.value)


# --------------------------------------------------------------------------
# Chains
# --------------------------------------------------------------------------

@dataclass
class ChainEstimate:
    """Chain of discs ``(f_i, a_i)`` with ``a_i`` real in ``[0, 1)``."""

    links: List[Tuple[NullDisc, float]] = field(default_factory=list)

    @property
    def total(self):
        return float(sum(np.arctanh(a) for _, a in self.links))

    def endpoints(self):
        return [(d(0.0), d(a)) for d, a in self.links]

    def check(self, x, y, dom=None, tol=LINK_TOL):
        """Verify the chaining invariants (and disc validity if ``dom``)."""
        x, y = _vec(x), _vec(y)
        if not self.links:
            return bool(np.linalg.norm(x - y) <= tol)
        prev = x
        for d, a in self.links:
            if np.linalg.norm(d(0.0) - prev) > tol or not 0 <= a < 1:
                return False
            if dom is not None and not validate(d, dom).ok:
                return False
            prev = d(a)
        return bool(np.linalg.norm(prev - y) <= tol)

    def __add__(self, other):
        return ChainEstimate(self.links + other.links)


def _unit(v):
    return v / np.linalg.norm(v)


def _slice(p, q, c, rho, w):
    """Disc cut from ``B(c, rho)`` by the plane through ``p`` spanned by
    ``q - p`` and ``w``: returns ``(e1, e2, center, radius)`` or ``None``."""
    e1 = _unit(q - p)
    w = w - (w @ e1) * e1
    if np.linalg.norm(w) < 1e-12:
        return None
    e2 = _unit(w)
    cp = p + ((c - p) @ e1) * e1 + ((c - p) @ e2) * e2
    r2 = rho**2 - np.sum((c - cp) ** 2)
    if r2 <= 0:
        return None
    return e1, e2, cp, float(np.sqrt(r2))


def _coords(p, e1, e2, cp, r):
    return complex((p - cp) @ e1, (p - cp) @ e2) / r


def _inscribed_radius(dom, c, shrink):
    try:
        if not contains(dom, c):
            return 0.0
        return shrink * boundary_distance(dom, c)
    except Exception:
        return 0.0


def _link_cost(p, q, c, w, rho, cap, tail):
    if rho <= 0:
        return np.inf
    sl = _slice(p, q, c, rho, w)
    if sl is None:
        return np.inf
    wp, wq = _coords(p, *sl), _coords(q, *sl)
    if abs(wp) >= 1 or abs(wq) >= 1:
        return np.inf
    if abs(wp) > 0 and np.log(tail) / np.log(abs(wp)) > cap:
        return np.inf
    return poincare_distance(wp, wq)


def _best_slice(dom, p, q, shrink, cfg):
    """Inscribed ball and plane through ``p, q`` minimizing the Poincare
    distance of ``p, q`` in the slice disc."""
    n = len(p)
    e1 = _unit(q - p)
    centers = [0.5 * (p + q)]
    if isinstance(dom, Ball):
        centers.append(dom.center)
    best = (None, None, np.inf)
    for c0 in centers:
        ws = [c0 - p, np.eye(n)[int(np.argmin(np.abs(e1)))]]
        # plane orthogonal to the radius through p (extremal for balls)
        r = p - c0 - ((p - c0) @ e1) * e1
        for b in np.eye(n):
            b = b - (b @ e1) * e1
            if np.linalg.norm(r) > 1e-12:
                b = b - (b @ _unit(r)) * _unit(r)
            if np.linalg.norm(b) > 1e-6:
                ws.append(_unit(b))
                break
        # sublevel radii cost a ray search each: keep the center fixed there
        move_center = not isinstance(dom, Sublevel)
        rho0 = _inscribed_radius(dom, c0, shrink)
        for w0 in ws:
            th0 = np.concatenate([c0, w0]) if move_center else w0

            def cost(th):
                if move_center:
                    c, w = th[:n], th[n:]
                    rho = _inscribed_radius(dom, c, shrink)
                else:
                    c, w, rho = c0, th, rho0
                return _link_cost(p, q, c, w, rho, cfg.degree_cap, cfg.tail)
            v0 = cost(th0)
            if not np.isfinite(v0):
                continue
            res = minimize(cost, th0, method="Nelder-Mead",
                           options={"maxiter": cfg.ball_maxiter, "xatol": 1e-10, "fatol": 1e-13})
            th, v = (res.x, res.fun) if res.fun < v0 else (th0, v0)
            if v < best[2]:
                best = (th[:n], th[n:], v) if move_center else (c0, th, v)
    return best


def _link(dom, p, q, c, w, shrink, cfg):
    e1, e2, cp, r = _slice(p, q, c, _inscribed_radius(dom, c, shrink), w)
    w0, wq = _coords(p, e1, e2, cp, r), _coords(q, e1, e2, cp, r)
    a = (wq - w0) / (1 - np.conj(w0) * wq)
    d = mobius_disc(p, cp, r, e1, e2, rel_tail=cfg.tail, cap=cfg.degree_cap)
    d = rotate_parameter(d, np.angle(a)) if abs(a) > 0 else d
    return d, float(abs(a))


@dataclass(frozen=True)
class ChainConfig:
    """Settings of the chain search.

    Attributes
    ----------
    shrink : float
        Fraction of the boundary distance used as the inscribed radius.
    max_doublings : int
        Waypoint doublings after the initial count.
    ball_maxiter : int
        Nelder-Mead iterations for each link (ball center and plane).
    degree_cap : int
        Largest degree of a link disc.
    tail : float
        Relative truncation tail of the Mobius series.
    """

    shrink: float = 0.999
    max_doublings: int = 6
    ball_maxiter: int = 400
    degree_cap: int = 4096
    tail: float = 1e-14
    validate: bool = True


def _chain_through(dom, pts, cfg: ChainConfig):
    shrink = cfg.shrink if not isinstance(dom, Sublevel) else min(cfg.shrink, 0.98)
    links = []
    cur = pts[0]
    for q in pts[1:]:
        c, w, v = _best_slice(dom, cur, q, shrink, cfg)
        if c is None:
            raise ChainFailed("no inscribed ball bridges consecutive waypoints")
        d, a = _link(dom, cur, q, c, w, shrink, cfg)
        if cfg.validate and not validate(d, dom, circle=not isinstance(dom, Sublevel)).ok:
            raise ChainFailed("link disc failed validation")
        links.append((d, a))
        cur = d(a)
    if np.linalg.norm(cur - pts[-1]) > LINK_TOL:
        raise ChainFailed("chain misses the endpoint")
    return ChainEstimate(links)


def _key(p):
    return tuple(np.round(_vec(p), 12))


class ChainCache:
    """Memo of computed chains; concatenation through cached points is
    always tried so the cached totals obey the triangle inequality."""

    def __init__(self):
        self.store: Dict[tuple, ChainEstimate] = {}

    def get(self, x, y):
        return self.store.get((_key(x), _key(y)))

    def put(self, x, y, ch):
        self.store[(_key(x), _key(y))] = ch

    def concatenations(self, x, y):
        kx, ky = _key(x), _key(y)
        out = []
        for (a, m), c1 in list(self.store.items()):
            if a == kx and m != ky:
                c2 = self.store.get((m, ky))
                if c2 is not None:
                    out.append(c1 + c2)
        return out


def chain_distance_upper(dom, x, y, cfg: ChainConfig = ChainConfig(),
                         cache: Optional[ChainCache] = None) -> ChainEstimate:
    """Chain of Mobius slices of inscribed balls from ``x`` to ``y``.

    Waypoints are equally spaced on the segment; the count starts at
    ``ceil(|x - y| / boundary_distance)`` (at least 1) and doubles while the
    total improves.  The smallest total found is returned.
    """
    x, y = _vec(x), _vec(y)
    for p in (x, y):
        if not contains(dom, p):
            raise PointOutside(f"{p} is not in the domain")
    if np.linalg.norm(x - y) == 0:
        return ChainEstimate([])
    if cache is not None and cache.get(x, y) is not None:
        return cache.get(x, y)
    dist = min(boundary_distance(dom, x), boundary_distance(dom, y))
    k = max(1, int(np.ceil(np.linalg.norm(x - y) / dist))) if dist > 0 else 1
    best, errors = None, []
    for _ in range(cfg.max_doublings + 1):
        pts = [x + t * (y - x) for t in np.linspace(0, 1, k + 1)]
        try:
            ch = _chain_through(dom, pts, cfg)
        except ChainFailed as e:
            errors.append(str(e))
            k *= 2
            continue
        if best is not None and ch.total >= best.total * (1 - 1e-3):
            if ch.total < best.total:
                best = ch
            break
        best = ch
        k *= 2
    if cache is not None:
        for alt in cache.concatenations(x, y):
            if best is None or alt.total < best.total:
                best = alt
    if best is None:
        raise ChainFailed("; ".join(errors[-3:]) or "no chain found")
    if cache is not None:
        cache.put(x, y, best)
    return best


# --------------------------------------------------------------------------
# Geodesic search
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GeodesicConfig:
    """Coordinate-descent settings for ``geodesic_search``."""

    n_vertices: int = 8
    step: float = 0.05
    min_step: float = 1e-5
    max_sweeps: int = 400
    nodes: int = 16


def polyline_length(path: Polyline, evaluator: Callable, nodes=16):
    """Gauss-Legendre integral of ``evaluator(p, v)`` along each segment."""
    t, w = np.polynomial.legendre.leggauss(nodes)
    t, w = 0.5 * (t + 1), 0.5 * w
    total = 0.0
    for a, b in path.segments:
        d = b - a
        if np.linalg.norm(d) == 0:
            continue
        total += sum(wi * evaluator(a + ti * d, d) for ti, wi in zip(t, w))
    return float(total)


def geodesic_search(dom, x, y, evaluator: Callable, cfg: GeodesicConfig = GeodesicConfig(),
                    start: Optional[Polyline] = None):
    """Locally optimal polyline from ``x`` to ``y`` under vertex moves.

    Each interior vertex is moved by ``+-step`` along the coordinate axes
    while the length decreases and the vertex stays in the domain; the step
    halves when a sweep makes no progress.
    """
    x, y = _vec(x), _vec(y)
    if start is None:
        V = np.array([x + t * (y - x) for t in np.linspace(0, 1, cfg.n_vertices + 1)])
    else:
        V = np.array(start.vertices, float)
        V[0], V[-1] = x, y

    def length(V):
        try:
            return polyline_length(Polyline(V), evaluator, cfg.nodes)
        except Exception:
            return np.inf

    cur = length(V)
    step = cfg.step
    n = len(x)
    for _ in range(cfg.max_sweeps):
        improved = False
        for i in range(1, len(V) - 1):
            for j in range(n):
                for s in (step, -step):
                    W = V.copy()
                    W[i, j] += s
                    if not contains(dom, W[i]):
                        continue
                    L = length(W)
                    if L < cur - 1e-15:
                        V, cur, improved = W, L, True
                        break
        if not improved:
            step *= 0.5
            if step < cfg.min_step:
                break
    return Polyline(V), float(cur)
