"""Certified upper bounds on the minimal metric from explicit discs.

Every feasible conformal harmonic disc ``f`` with ``f(0) = x`` and
``f_x(0) = r u`` proves ``g(x, u) <= 1/r``.  The solver searches over
truncated null curves with an augmented Lagrangian on the null-coefficient
equations and a quadratic penalty on containment, then repairs and
certifies each candidate: a Newton projection onto the null variety, a
radial shrink ``f(s z)`` until containment holds on a grid four times finer
than the optimization grid (plus a guarded boundary-circle check for convex
domains), and the bound ``1/(s r)`` recomputed from the certified witness.
"""
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq, minimize

from .core import (Ball, HalfSpace, Polyhedral, Sublevel, TwoPlane, boundary_distance,
                   contains, ray_hit, signed_clearance)
from .discs import (DiscReport, NullDisc, circle_margin, containment_margin, disc_grid,
                    halfplane_disc, is_convex_domain, mobius_disc, planar_disc,
                    rotate_parameter, strip_coefficients, validate)
from .errors import Infeasible, NoConvergence, OutsideBox, ZeroDirection

NULL_TOL = 1e-8


@dataclass(frozen=True)
class SolverConfig:
    """Settings of the disc search.

    Attributes
    ----------
    degree : int
        Polynomial degree N of optimized discs.
    multistarts : int
        Number of optimizer runs m.  Seeds are always certified as well.
    penalty_init, penalty_growth : float
        Initial weight and growth factor of the null and containment penalties.
    rounds : int
        Augmented-Lagrangian outer iterations.
    max_iter : int
        Inner L-BFGS iterations per round.
    margin : float
        Required clearance delta of certified discs.
    grid : (int, int)
        Optimization grid (radii, angles); certification uses 4x both.
    seed : int
        Root of the per-start random streams.
    perturbation : float
        Relative size of random perturbations of the seeds.
    strip_degree : int
        Degree of Fejer-summed strip seeds.
    seed_degree_cap : int
        Largest degree of Mobius seeds.
    null_tol : float
        Largest accepted null residual, relative to ``max(1, |c_1|^2)``.
    """

    degree: int = 8
    multistarts: int = 16
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    rounds: int = 4
    max_iter: int = 150
    margin: float = 0.0
    grid: Tuple[int, int] = (8, 32)
    seed: int = 0
    perturbation: float = 0.15
    strip_degree: int = 128
    seed_degree_cap: int = 512
    null_tol: float = NULL_TOL

    def __post_init__(self):
        if self.degree < 1 or self.multistarts < 1:
            raise ValueError("degree and multistarts must be positive")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")
        if not self.null_tol > 0:
            raise ValueError("null_tol must be positive")


@dataclass
class Candidate:
    source: str
    bound: float
    witness: NullDisc
    shrink: float
    report: DiscReport


@dataclass
class UpperBoundResult:
    """Certified upper bound with its witness disc.

    ``bound`` is ``1 / |f_x(0)|`` of ``witness``; ``candidates`` lists every
    certified candidate (seeds and optimizer starts) in the order tried.
    """

    bound: float
    witness: NullDisc
    report: DiscReport
    source: str
    shrink: float
    kind: str
    candidates: List[Candidate] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)

    @property
    def derivative(self):
        return 1.0 / self.bound


# --------------------------------------------------------------------------
# Null-variety repair and certification
# --------------------------------------------------------------------------

def _null_jacobian(C):
    """Jacobian of the null coefficients P_1..P_{2N-2} in c_2..c_N."""
    N, n = C.shape
    k = np.arange(1, N + 1)
    D = k[:, None] * C
    J = np.zeros((2 * N - 2, N - 1, n), dtype=complex)
    for kk in range(2, N + 1):
        # dP_m / dc_k = 2 k d_{m-k+1}
        for a in range(N):
            m = a + kk - 1
            J[m - 1, kk - 2] += 2 * kk * D[a]
    return J.reshape(2 * N - 2, (N - 1) * n)


def null_project(d: NullDisc, tol=1e-14, max_iter=60) -> NullDisc:
    """Newton projection onto the null variety keeping ``f(0)`` and ``c_1``.

    Minimum-norm Gauss-Newton steps in the coefficients ``c_2 .. c_N``.
    """
    if d.degree < 2:
        return d
    C = d.coeffs.copy()
    scale = max(np.linalg.norm(C[0]) ** 2, 1e-300)
    for _ in range(max_iter):
        P = NullDisc(d.center, C).null_coefficients()
        if np.max(np.abs(P)) <= tol * scale:
            break
        J = _null_jacobian(C)
        step = np.linalg.lstsq(J, -P[1:], rcond=None)[0]
        C[1:] += step.reshape(C.shape[0] - 1, C.shape[1])
    return NullDisc(d.center, C)


def _clearance(d, dom, grid):
    """Smallest certified clearance: grid samples and, for convex domains,
    the guarded boundary circle."""
    try:
        m = containment_margin(d, dom, grid)
    except OutsideBox:
        return -np.inf
    if is_convex_domain(dom):
        m = min(m, circle_margin(d, dom))
    return m


def _passes(d, dom, margin, grid):
    return _clearance(d, dom, grid) >= margin


def certify(d: NullDisc, dom, cfg: SolverConfig, project=True):
    """Repair, shrink and validate a candidate.

    Returns ``(witness, shrink)`` or ``None`` when no shrink factor works.
    The shrink factor is located by a bracketing root search on the
    clearance and then confirmed by a direct check.
    """
    if project:
        d = null_project(d)
    if d.null_residual() > cfg.null_tol * max(1.0, np.linalg.norm(d.coeffs[0]) ** 2):
        return None
    fine = (4 * cfg.grid[0], 4 * cfg.grid[1])
    if _passes(d, dom, cfg.margin, fine):
        return d, 1.0
    lo = 0.5
    while not _passes(d.scaled(lo), dom, cfg.margin, fine):
        lo *= 0.5
        if lo < 1e-6:
            return None
    hi = 1.0

    def excess(s):
        v = _clearance(d.scaled(s), dom, fine) - cfg.margin
        return v if np.isfinite(v) else -1.0
    if np.isfinite(_clearance(d, dom, fine)):
        try:
            root = brentq(excess, lo, hi, xtol=1e-8, maxiter=60)
            s_try = root - 1e-7
            if s_try > lo and _passes(d.scaled(s_try), dom, cfg.margin, fine):
                lo = s_try
                hi = min(hi, root + 1e-7)
        except ValueError:
            pass
    for _ in range(40):
        if hi - lo < 1e-7:
            break
        mid = 0.5 * (lo + hi)
        if _passes(d.scaled(mid), dom, cfg.margin, fine):
            lo = mid
        else:
            hi = mid
    return d.scaled(lo), lo


# --------------------------------------------------------------------------
# Seeds
# --------------------------------------------------------------------------

def _unit(v):
    v = np.asarray(v, float)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ZeroDirection("zero direction")
    return v / nv


def _orth_complement_vector(u, avoid=None):
    """A unit vector orthogonal to ``u`` (and to ``avoid`` if possible)."""
    n = len(u)
    basis = [u] + ([avoid] if avoid is not None and np.linalg.norm(avoid) > 1e-12 else [])
    Q, _ = np.linalg.qr(np.stack(basis + list(np.eye(n)), axis=1))
    for j in range(len(basis), n):
        w = Q[:, j]
        if abs(w @ u) < 1e-10:
            return w / np.linalg.norm(w)
    return _unit(Q[:, 1])


def _exit_distance(dom, p, d):
    if isinstance(dom, Sublevel):
        return ray_hit(dom, p, d)
    if isinstance(dom, Ball):
        w = p - dom.center
        b = w @ d
        return float(-b + np.sqrt(b * b - (w @ w - dom.radius**2)))
    hs = [dom] if isinstance(dom, HalfSpace) else list(dom.halfspaces)
    t = np.inf
    for h in hs:
        rate = d @ h.normal
        if rate < 0:
            t = min(t, (p @ h.normal - h.offset) / -rate)
    return t


def _flat_directions(dom, x, candidates):
    """Candidate directions along which the whole sampled line stays inside."""
    out = []
    for d in candidates:
        if not isinstance(dom, Sublevel):
            if np.isinf(_exit_distance(dom, x, d)) and np.isinf(_exit_distance(dom, x, -d)):
                out.append(d)
            continue
        ok = True
        for s in (1, -1):
            T = min(dom.diameter, 1e6)
            ts = np.linspace(0, T, 400)
            P = x + s * ts[:, None] * d
            P = P[dom.in_box(P)]
            if len(P) < 50 or np.any(dom._values(P) >= 0):
                ok = False
                break
        if ok:
            out.append(d)
    return out


def _strip_seed(dom, x, bounded, flat, cfg):
    """Strip disc in span(bounded, flat) with half-width from sampled exits."""
    if isinstance(dom, Sublevel):
        T = 0.5 * dom.diameter
    else:
        T = 10 * max(boundary_distance(dom, x), 1e-9)
    widths = []
    for t in np.linspace(-T, T, 41):
        p = x + t * flat
        if isinstance(dom, Sublevel) and not dom.in_box(p)[0]:
            continue
        widths.append(min(_exit_distance(dom, p, bounded), _exit_distance(dom, p, -bounded)))
    if not widths:
        return None
    w = float(np.min(widths))
    if not np.isfinite(w) or w <= 0:
        return None
    a = w * strip_coefficients(max(cfg.strip_degree, 8), "fejer")
    return planar_disc(x, bounded, flat, a)


def _align_derivative(d: NullDisc, u):
    """Rotate the parameter so that ``f_x(0)`` points along the unit vector ``u``.

    Works when ``u`` lies in the plane of ``d``'s first coefficient.
    """
    c1 = d.coeffs[0]
    e1, e2 = np.real(c1), -np.imag(c1)  # f_x(0), f_y(0)
    # f_x(0) of z -> f(e^{ia} z) is cos(a) e1 + sin(a) e2
    alpha = np.arctan2(u @ e2, u @ e1)
    return rotate_parameter(d, alpha)


def seed_candidates(dom, x, u=None, plane: Optional[TwoPlane] = None, cfg=SolverConfig()):
    """Structured starting discs.

    For a direction ``u`` every seed has ``f_x(0)`` parallel to ``u``; for a
    2-plane every seed has ``df_0(R^2) = plane``.  Seeds: the affine disc of
    radius ``boundary_distance``, Mobius reparametrized planar slices of a
    ball domain, extremal half-plane discs for each face, and Fejer strip
    discs along flat directions.
    """
    x = np.asarray(x, float)
    n = len(x)
    ell = boundary_distance(dom, x)
    seeds = []
    if u is not None:
        u = _unit(u)
        avoid = None
        if isinstance(dom, Ball):
            avoid = x - dom.center
        v = _orth_complement_vector(u, avoid)
        seeds.append(("affine", planar_disc(x, u, v, [ell])))
        planes = [(u, v)]
    else:
        b1, b2 = plane.b1, plane.b2
        seeds.append(("affine", planar_disc(x, b1, b2, [ell])))
        planes = [(b1, b2)]

    if isinstance(dom, Ball):
        for e1, e2 in planes:
            B = np.stack([e1, e2], axis=1)
            w = x - dom.center
            cs = x - B @ (B.T @ w)  # slice center
            rho2 = dom.radius**2 - np.sum((cs - dom.center) ** 2)
            if rho2 > 0:
                seeds.append(("mobius", mobius_disc(x, cs, np.sqrt(rho2), e1, e2,
                                                    cap=cfg.seed_degree_cap)))

    faces = []
    if isinstance(dom, HalfSpace):
        faces = [dom]
    elif isinstance(dom, Polyhedral):
        faces = list(dom.halfspaces)
    for i, h in enumerate(faces):
        nrm = h.normal
        if u is not None:
            t = u - (u @ nrm) * nrm
            t = _unit(t) if np.linalg.norm(t) > 1e-9 else _orth_complement_vector(nrm)
            d = halfplane_disc(x, nrm, h.offset, t, cfg.degree)
            seeds.append((f"halfplane[{i}]", _align_derivative(d, u)))
        else:
            B = plane.basis
            pn = B @ (B.T @ nrm)
            if np.linalg.norm(pn) > 1e-9:
                e = _unit(pn)
                f = plane.b1 if abs(plane.b1 @ e) < 0.9 else plane.b2
                e2 = _unit(f - (f @ e) * e)
                seeds.append((f"halfplane[{i}]", halfplane_disc(
                    x, e, h.offset, e2, cfg.degree, plane_factor=np.linalg.norm(pn),
                    distance=x @ nrm - h.offset)))

    # strip seeds along flat directions
    if u is not None:
        cands = []
        for e in np.eye(n):
            w = e - (e @ u) * u
            if np.linalg.norm(w) > 1e-6:
                cands.append(_unit(w))
        for fd in _flat_directions(dom, x, cands):
            s = _strip_seed(dom, x, u, fd, cfg)
            if s is not None:
                seeds.append(("strip", s))
    else:
        angles = np.linspace(0, np.pi, 12, endpoint=False)
        cands = [np.cos(a) * plane.b1 + np.sin(a) * plane.b2 for a in angles]
        for fd in _flat_directions(dom, x, cands):
            bounded = _unit(plane.b1 - (plane.b1 @ fd) * fd) if abs(plane.b1 @ fd) < 0.99 \
                else _unit(plane.b2 - (plane.b2 @ fd) * fd)
            s = _strip_seed(dom, x, bounded, fd, cfg)
            if s is not None:
                seeds.append(("strip", s))
    return seeds


# --------------------------------------------------------------------------
# Optimization
# --------------------------------------------------------------------------

class _Problem:
    """Penalized objective over (log r, [w], c_2..c_N)."""

    def __init__(self, dom, x, cfg, u=None, plane=None):
        self.dom = dom
        self.x = np.asarray(x, float)
        self.n = len(self.x)
        self.N = cfg.degree
        self.cfg = cfg
        self.u = None if u is None else _unit(u)
        self.plane = plane
        self.ell = max(boundary_distance(dom, self.x), 1e-12)
        Z = disc_grid(cfg.grid)
        self.Zpow = Z[:, None] ** np.arange(1, self.N + 1)  # (M, N)
        self.k = np.arange(1, self.N + 1)
        self.idx = self.k[:, None] - 1 + np.arange(self.N)[None, :]  # a + k - 1
        self.lam = np.zeros(2 * (2 * self.N - 2))
        self.rho = cfg.penalty_init
        self.mu = cfg.penalty_init
        if isinstance(dom, Sublevel):
            self.cmax = 10 * dom.diameter
        else:
            self.cmax = 10 * self.ell * (1 + self.N)

    # parameter layout
    @property
    def nw(self):
        return self.n if self.u is not None else 0

    def pack(self, d: NullDisc):
        C = d.with_degree(self.N).coeffs
        c1 = C[0]
        r = np.linalg.norm(np.real(c1))
        w = -np.imag(c1) / r if self.u is not None else np.zeros(0)
        if self.u is None:
            # rotate the parameter so that c_1 = r (b1 - i b2) or r (b1 + i b2)
            fx = np.real(c1)
            alpha = np.arctan2(fx @ self.plane.b2, fx @ self.plane.b1)
            C = rotate_parameter(NullDisc(self.x, C), -alpha).coeffs
        return np.concatenate([[np.log(r)], w, C[1:].real.ravel(), C[1:].imag.ravel()])

    def unpack(self, th):
        r = np.exp(th[0])
        N, n = self.N, self.n
        rest = th[1 + self.nw:]
        m = (N - 1) * n
        Ck = (rest[:m] + 1j * rest[m:]).reshape(N - 1, n)
        if self.u is not None:
            w = th[1:1 + n]
            Pw = w - (w @ self.u) * self.u
            nw = np.linalg.norm(Pw)
            v = Pw / nw
            c1 = r * (self.u - 1j * v)
        else:
            v, nw, Pw = None, None, None
            c1 = r * (self.plane.b1 - 1j * self.plane.b2)
        C = np.vstack([c1[None, :], Ck])
        return r, v, nw, C

    def disc(self, th):
        return NullDisc(self.x, self.unpack(th)[3])

    def null_eqs(self, C):
        P = NullDisc(self.x, C).null_coefficients()[1:] / self.ell**2
        return np.concatenate([P.real, P.imag])

    def _containment(self, P):
        """Penalty value and gradient with respect to the image points."""
        dom, delta, ell = self.dom, self.cfg.margin, self.ell
        M = len(P)
        if isinstance(dom, Ball):
            w = P - dom.center
            nr = np.maximum(np.linalg.norm(w, axis=1), 1e-300)
            viol = np.maximum(0.0, (delta - (dom.radius - nr)) / ell)
            grad = (2 * viol / ell)[:, None] * (w / nr[:, None])
            return np.sum(viol**2) / M, grad / M
        if isinstance(dom, (HalfSpace, Polyhedral)):
            Nm = dom.normal[None, :] if isinstance(dom, HalfSpace) else dom.normals
            off = np.atleast_1d(dom.offset) if isinstance(dom, HalfSpace) else dom.offsets
            clr = P @ Nm.T - off
            viol = np.maximum(0.0, (delta - clr) / ell)
            grad = -(2 * viol / ell) @ Nm
            return np.sum(viol**2) / M, grad / M
        # sublevel: penalize the defining function itself
        J = dom.field.jet(P, order=1)
        gn = np.linalg.norm(J.grad, axis=1)
        viol = np.maximum(0.0, J.val + delta * gn)
        out_box = ~dom.in_box(P)
        # keep the search inside the sampling window
        lo, hi = dom.box[:, 0], dom.box[:, 1]
        bviol = np.maximum(0, lo - P) + np.maximum(0, P - hi)
        grad = 2 * viol[:, None] * J.grad + 2 * (np.where(P > hi, 1, 0) - np.where(P < lo, 1, 0)) * bviol
        val = np.sum(viol**2) + np.sum(bviol**2)
        del out_box
        return val / M, grad / M

    def objective(self, th):
        r, v, nw, C = self.unpack(th)
        ell = self.ell
        # null equations (augmented Lagrangian)
        e = self.null_eqs(C)
        ne = len(e) // 2
        f = -r / ell + self.lam @ e + 0.5 * self.rho * e @ e
        ge = (self.lam + self.rho * e) / ell**2
        W = np.zeros(2 * self.N - 1, dtype=complex)
        W[1:] = ge[:ne] + 1j * ge[ne:]
        D = self.k[:, None] * C
        G = 2 * self.k[:, None] * (W[self.idx] @ np.conj(D))
        # containment
        P = self.x + np.real(self.Zpow @ C)
        pv, pg = self._containment(P)
        f += self.mu * pv
        G = G + self.mu * (np.conj(self.Zpow).T @ pg)
        # chain rule into parameters
        g1 = G[0]
        grad_r = np.real(g1) @ (self.u if self.u is not None else self.plane.b1)
        if self.u is not None:
            grad_r -= np.imag(g1) @ v
        else:
            grad_r -= np.imag(g1) @ self.plane.b2
        grad = [np.array([r * (grad_r - 1.0 / ell)])]
        if self.u is not None:
            dv = -r * np.imag(g1)
            Pdv = dv - (dv @ v) * v
            Pdv = Pdv - (Pdv @ self.u) * self.u
            grad.append(Pdv / nw)
        grad.append(np.real(G[1:]).ravel())
        grad.append(np.imag(G[1:]).ravel())
        return float(f), np.concatenate(grad)

    def bounds(self):
        m = (self.N - 1) * self.n
        b = [(None, np.log(self.cmax))] + [(None, None)] * self.nw
        b += [(-self.cmax, self.cmax)] * (2 * m)
        return b

    def run(self, th0):
        th = th0.copy()
        for _ in range(self.cfg.rounds):
            res = minimize(self.objective, th, jac=True, method="L-BFGS-B", bounds=self.bounds(),
                           options={"maxiter": self.cfg.max_iter})
            th = res.x
            if self.u is not None:
                # renormalize the free direction to keep it well scaled
                w = th[1:1 + self.n]
                th[1:1 + self.n] = w / max(np.linalg.norm(w), 1e-300)
            e = self.null_eqs(self.unpack(th)[3])
            self.lam = self.lam + self.rho * e
            self.rho *= self.cfg.penalty_growth
            self.mu *= self.cfg.penalty_growth
        return th


def _perturb(th, prob, rng, sigma):
    th = th.copy()
    th[0] += sigma * rng.normal()
    tail = th[1:]
    if prob.nw:
        tail[:prob.nw] += sigma * rng.normal(size=prob.nw)
    m = len(tail) - prob.nw
    k = np.repeat(np.tile(np.arange(2, prob.N + 2), 1), prob.n)
    k = np.concatenate([k, k])[:m]
    tail[prob.nw:] += sigma * prob.ell * rng.normal(size=m) / k
    th[1:] = tail
    return th


def _bound_of(d: NullDisc):
    fx = np.real(d.coeffs[0])
    return 1.0 / np.linalg.norm(fx)


def _solve(dom, x, cfg, u=None, plane=None, kind="g"):
    x = np.asarray(x, float)
    if not contains(dom, x, cfg.margin):
        raise Infeasible(f"point {x} is not inside the domain with clearance {cfg.margin}")
    cands: List[Candidate] = []
    failures: List[str] = []

    def consider(source, d, project=True):
        out = certify(d, dom, cfg, project=project)
        if out is None:
            failures.append(source)
            return
        wit, s = out
        cands.append(Candidate(source, _bound_of(wit), wit, s, validate(wit, dom, cfg.grid)))

    seeds = seed_candidates(dom, x, u=u, plane=plane, cfg=cfg)
    for name, d in seeds:
        consider(f"seed:{name}", d, project=False)

    prob_proto = _Problem(dom, x, cfg, u=u, plane=plane)
    opt_seeds = [d for _, d in seeds]
    ss = np.random.SeedSequence(cfg.seed).spawn(cfg.multistarts)
    for i in range(cfg.multistarts):
        rng = np.random.default_rng(ss[i])
        prob = _Problem.__new__(_Problem)
        prob.__dict__.update(prob_proto.__dict__)
        prob.lam = np.zeros_like(prob_proto.lam)
        base = opt_seeds[i % len(opt_seeds)]
        th0 = prob.pack(base)
        if i >= len(opt_seeds):
            th0 = _perturb(th0, prob, rng, cfg.perturbation)
        try:
            th = prob.run(th0)
            consider(f"start:{i}", prob.disc(th))
        except (FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
            failures.append(f"start:{i}:{type(exc).__name__}")

    if not cands:
        raise NoConvergence("no candidate disc could be certified")
    best = min(cands, key=lambda c: c.bound)
    # prefer the earliest candidate within round-off of the best
    for c in cands:
        if c.bound <= best.bound * (1 + 1e-12):
            best = c
            break
    return UpperBoundResult(best.bound, best.witness, best.report, best.source, best.shrink,
                            kind, cands, failures)


def maximize_g(dom, x, u, cfg: SolverConfig = SolverConfig()) -> UpperBoundResult:
    """Upper bound on ``g(x, u)`` for a unit ``u`` (homogeneous in ``|u|``)."""
    u = np.asarray(u, float)
    nu = np.linalg.norm(u)
    if nu == 0:
        raise ZeroDirection("zero direction")
    res = _solve(dom, x, cfg, u=u / nu, kind="g")
    if nu != 1.0:
        res = replace(res, bound=res.bound * nu)
    return res


def maximize_M(dom, x, plane: TwoPlane, cfg: SolverConfig = SolverConfig()) -> UpperBoundResult:
    """Upper bound on ``M(x, plane)``: discs with ``df_0(R^2) = plane``."""
    return _solve(dom, x, cfg, plane=plane, kind="M")
