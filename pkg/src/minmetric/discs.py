"""Truncated null holomorphic curves and the conformal harmonic discs they bound.

A disc is stored as ``F(z) = center + sum_k c_k z^k`` with complex vector
coefficients ``c_k``; the disc itself is ``f = Re F``.  It is conformal
exactly when ``F'`` is null, i.e. ``sum_j F_j'(z)^2 = 0``.  With this
convention ``f_x(0) = Re c_1`` and ``f_y(0) = -Im c_1``.
"""
from dataclasses import dataclass

import numpy as np

from .core import Ball, HalfSpace, Polyhedral, Sublevel, signed_clearance
from .errors import OutsideBox

# angular samples for the boundary-circle containment check
CIRCLE_SAMPLES = 8192


def _horner(C, z):
    """``sum_j C[j] z^j`` for rows ``C[j]``; output shape ``z.shape + (n,)``."""
    acc = np.broadcast_to(C[-1], z.shape + C.shape[1:]).astype(complex)
    zz = z[..., None]
    for c in C[-2::-1]:
        acc = acc * zz + c
    return acc


@dataclass(frozen=True, eq=False)
class NullDisc:
    """Polynomial disc of degree ``N``.

    Parameters
    ----------
    center : (n,) array
        ``f(0)``.
    coeffs : (N, n) complex array
        ``c_1 .. c_N``.
    """

    center: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        C = np.atleast_2d(np.asarray(self.coeffs, dtype=complex))
        if C.shape[1] != len(c):
            raise ValueError("coefficient vectors must have the dimension of the center")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "coeffs", C)

    @property
    def degree(self):
        return self.coeffs.shape[0]

    @property
    def dim(self):
        return len(self.center)

    def evaluate(self, z):
        """``f(z)``; ``z`` may be a scalar or an array, output has a trailing axis n."""
        z = np.asarray(z, dtype=complex)
        return self.center + np.real(_horner(self.coeffs, z) * z[..., None])

    def __call__(self, z):
        return self.evaluate(z)

    def complex_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        k = np.arange(1, self.degree + 1)
        return _horner(self.coeffs * k[:, None], z)

    def derivative(self, z):
        """Partial derivatives ``(f_x(z), f_y(z))``."""
        Fp = self.complex_derivative(z)
        return np.real(Fp), -np.imag(Fp)

    def differential(self, z, xi):
        """``df_z(xi)`` for a real 2-vector ``xi``."""
        fx, fy = self.derivative(z)
        return xi[0] * fx + xi[1] * fy

    def null_coefficients(self):
        """Coefficients of the polynomial ``sum_j F_j'(z)^2`` (degree 2N-2)."""
        k = np.arange(1, self.degree + 1)
        D = k[:, None] * self.coeffs  # coefficients of F'
        N = self.degree
        out = np.zeros(2 * N - 1, dtype=complex)
        G = D @ D.T
        for a in range(N):
            out[a:a + N] += G[a]
        return out

    def null_residual(self):
        return float(np.max(np.abs(self.null_coefficients())))

    def scaled(self, s):
        """The disc ``z -> f(s z)``."""
        k = np.arange(1, self.degree + 1)
        return NullDisc(self.center, self.coeffs * (s ** k)[:, None])

    def with_degree(self, N):
        """Truncate or zero-pad to degree ``N``."""
        C = np.zeros((N, self.dim), dtype=complex)
        m = min(N, self.degree)
        C[:m] = self.coeffs[:m]
        return NullDisc(self.center, C)

    def lipschitz_on_circle(self):
        """Bound on ``|d/dtheta f(e^{i theta})|``."""
        k = np.arange(1, self.degree + 1)
        return float(np.sum(k * np.linalg.norm(self.coeffs, axis=1)))


def chebyshev_radii(nr):
    """Radii in (0, 1] clustered toward the boundary circle, ending at 1."""
    j = np.arange(1, nr + 1)
    return np.sin(0.5 * np.pi * j / nr)


def disc_grid(grid):
    nr, na = grid
    r = chebyshev_radii(nr)
    t = 2 * np.pi * np.arange(na) / na
    return (r[:, None] * np.exp(1j * t)[None, :]).ravel()


def containment_margin(d: NullDisc, dom, grid=(8, 32)):
    """Minimum signed clearance of ``f(z)`` over a polar grid.

    Negative values mean the disc escapes.  Sublevel domains raise
    ``OutsideBox`` when a grid image leaves the sampling box.
    """
    nr, na = grid
    if nr < 8 or na < 32:
        raise ValueError("grid must be at least (8, 32)")
    P = d.evaluate(np.concatenate([[0.0], disc_grid(grid)]))
    if isinstance(dom, Sublevel) and not np.all(dom.in_box(P)):
        raise OutsideBox("disc leaves the sampling box")
    return float(np.min(signed_clearance(dom, P)))


def circle_values(d: NullDisc, n):
    """``f(e^{2 pi i j / n})`` for ``j = 0 .. n-1`` by one inverse FFT."""
    if n <= d.degree:
        t = 2 * np.pi * np.arange(n) / n
        return d.evaluate(np.exp(1j * t))
    A = np.zeros((n, d.dim), dtype=complex)
    A[1:d.degree + 1] = d.coeffs
    return d.center + np.real(np.fft.ifft(A, axis=0) * n)


def circle_samples(d: NullDisc, rel_guard=2.5e-4, lo=CIRCLE_SAMPLES, hi=2**20):
    """Power-of-two sample count keeping the Lipschitz guard below
    ``rel_guard * |c_1|``."""
    scale = max(np.linalg.norm(d.coeffs[0]), 1e-300)
    need = np.pi * d.lipschitz_on_circle() / (rel_guard * scale)
    n = lo
    while n < need and n < hi:
        n *= 2
    return n


def circle_margin(d: NullDisc, dom, n=None):
    """Guarded clearance of the image of the unit circle.

    Returns ``min clearance - L h / 2`` where ``L`` bounds the angular speed
    and ``h`` is the sample spacing, so a nonnegative value proves that the
    whole circle stays inside.  For convex domains this proves containment
    of the closed disc, since a harmonic disc lies in the convex hull of its
    boundary values.  Sublevel domains use a sampled Lipschitz estimate for
    the defining function instead of an exact distance.
    """
    if n is None:
        n = circle_samples(d)
    P = circle_values(d, n)
    guard = 0.5 * d.lipschitz_on_circle() * (2 * np.pi / n)
    if isinstance(dom, Sublevel):
        if not np.all(dom.in_box(P)):
            return -np.inf
        J = dom.field.jet(P, order=1)
        lip = 1.25 * float(np.max(np.linalg.norm(J.grad, axis=1)))
        worst = float(np.max(J.val + lip * guard))
        return -worst / max(lip, 1e-12)
    return float(np.min(signed_clearance(dom, P))) - guard


def is_convex_domain(dom):
    return isinstance(dom, (Ball, HalfSpace, Polyhedral)) or (
        isinstance(dom, Sublevel) and dom.convex_hint)


# --------------------------------------------------------------------------
# Constructors
# --------------------------------------------------------------------------

def planar_disc(x, e1, e2, a):
    """Disc ``x + Re(phi) e1 + Im(phi) e2`` for ``phi(z) = sum a_k z^k``.

    ``e1, e2`` must be orthonormal; the result is exactly null.
    """
    w = np.asarray(e1, float) - 1j * np.asarray(e2, float)
    a = np.asarray(a, dtype=complex)
    return NullDisc(x, a[:, None] * w[None, :])


def affine_disc(x, fr, r=1.0):
    """``z -> x + r Re(z (u - i v))`` for a conformal frame ``(u, v)``."""
    return NullDisc(x, r * fr.null_vector()[None, :])


def strip_coefficients(N, summation="taylor"):
    """Taylor coefficients of ``(4/pi) arctan(z)`` up to degree ``N``.

    ``(4/pi) arctan`` maps the disc onto the strip ``|Re w| < 1`` with
    derivative ``4/pi`` at 0; it is the strip map ``(2i/pi) log((1+z)/(1-z))``
    precomposed with a quarter turn.  ``summation="fejer"`` applies Cesaro
    weights ``1 - k/(N+1)``: the Fejer kernel is positive, so the truncated
    map still sends the closed disc into the open strip, at the cost of a
    derivative ``(4/pi) N/(N+1)``.  Plain truncation keeps ``4/pi`` but its
    real part can overshoot 1 near ``z = +-i``; the tail at radius ``s`` is at
    most ``(4/pi) s^(N+2) / ((N+2)(1-s^2))``.
    """
    k = np.arange(1, N + 1)
    a = np.where(k % 2 == 1, (4 / np.pi) * (-1.0) ** ((k - 1) // 2) / k, 0.0)
    if summation == "fejer":
        a = a * (1 - k / (N + 1))
    elif summation != "taylor":
        raise ValueError("summation must be 'taylor' or 'fejer'")
    return a


def strip_disc(x, fr, N, summation="taylor", half_width=1.0):
    """Planar strip disc in the 2-plane of ``fr``.

    The bounded direction is ``fr.u``: ``|<f(z) - x, u/|u|>| < half_width``;
    the unbounded direction is ``fr.v``.  ``f_x(0) = (4/pi) half_width u/|u|``
    for Taylor summation.
    """
    if N < 8:
        raise ValueError("strip discs need degree >= 8")
    s = fr.scale
    a = half_width * strip_coefficients(N, summation)
    return planar_disc(x, fr.u / s, fr.v / s, a)


def mobius_coefficients(a0, N):
    """Taylor coefficients of ``(z + a0)/(1 + conj(a0) z) - a0`` up to degree N."""
    k = np.arange(1, N + 1)
    return (1 - abs(a0) ** 2) * (-np.conj(a0)) ** (k - 1)


def mobius_degree(a0, rel_tail=1e-6, cap=512, floor=8):
    """Degree at which the Mobius tail ``(1+|a|)|a|^N`` drops below ``rel_tail``."""
    r = abs(a0)
    if r < 1e-12:
        return floor
    N = int(np.ceil(np.log(rel_tail / (1 + r)) / np.log(r)))
    return int(min(max(N, floor), cap))


def mobius_disc(x, slice_center, rho, e1, e2, N=None, rel_tail=1e-6, cap=512):
    """Conformal parametrization of the round planar disc
    ``slice_center + rho * D`` in the plane ``(e1, e2)`` with ``f(0) = x``.

    ``f_x(0)`` points along ``e1`` with length ``rho (1 - |a0|^2)``.
    """
    x = np.asarray(x, float)
    e1 = np.asarray(e1, float)
    e2 = np.asarray(e2, float)
    w = (x - np.asarray(slice_center, float)) / rho
    a0 = complex(w @ e1, w @ e2)
    if N is None:
        N = mobius_degree(a0, rel_tail, cap)
    return planar_disc(x, e1, e2, rho * mobius_coefficients(a0, N))


def halfplane_coefficients(N):
    """Best degree-N Taylor data for a positive harmonic function.

    Returns ``a_1 .. a_N`` with ``1 + Re sum a_k z^k > 0`` on the open disc and
    ``a_1 = 2 cos(pi/(N+2))``, the largest value allowed at degree N.  The
    boundary values are ``|p(e^{it})|^2 / |p|_2^2`` for
    ``p_k = sin((k+1) pi/(N+2))``.
    """
    b = np.sin(np.arange(1, N + 2) * np.pi / (N + 2))
    gam = np.array([b[: len(b) - m] @ b[m:] for m in range(N + 1)])
    return 2 * gam[1:] / gam[0]


def halfplane_disc(x, normal, offset, tangent, N, plane_factor=1.0, distance=None):
    """Planar disc in ``span(normal, tangent)`` positive on ``y . n > offset``.

    ``normal`` and ``tangent`` are orthonormal and ``f_x(0)`` points along
    ``normal``.  When the disc plane only sees the projection of the true
    face normal, pass its length as ``plane_factor`` and the true clearance
    as ``distance``.
    """
    x = np.asarray(x, float)
    n = np.asarray(normal, float)
    dist = x @ n - offset if distance is None else distance
    a = dist * halfplane_coefficients(N) / plane_factor
    return planar_disc(x, n, tangent, a)


def rotate_parameter(d: NullDisc, alpha):
    """``z -> f(e^{i alpha} z)``."""
    k = np.arange(1, d.degree + 1)
    return NullDisc(d.center, d.coeffs * np.exp(1j * alpha * k)[:, None])


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscReport:
    null_residual: float
    containment_margin: float
    derivative_at_0: float
    circle_margin: float = float("nan")

    @property
    def ok(self):
        return self.null_residual <= 1e-8 and self.containment_margin >= 0


def validate(d: NullDisc, dom, grid=(8, 32), circle=True) -> DiscReport:
    try:
        margin = containment_margin(d, dom, grid)
    except OutsideBox:
        margin = -np.inf
    cm = circle_margin(d, dom) if circle and is_convex_domain(dom) else float("nan")
    fx, _ = d.derivative(0.0)
    return DiscReport(d.null_residual(), margin, float(np.linalg.norm(fx)), cm)
