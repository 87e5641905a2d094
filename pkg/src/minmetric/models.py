"""Closed-form comparison metrics.

Poincare disc (curvature -4 normalization), punctured disc, the minimal
metric of the Euclidean ball (Klein-type quadratic form), harmonic measure of
arcs and the Harnack radius.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import AtPuncture, OutsideBall, OutsideDisc

TWO_PI = 2 * np.pi


def _complex(z):
    if isinstance(z, (complex, float, int, np.number)):
        return complex(z)
    z = np.asarray(z, dtype=float)
    return complex(z[0], z[1])


def _norm2(xi):
    if isinstance(xi, (complex, np.complexfloating)):
        return abs(xi)
    return float(np.linalg.norm(np.asarray(xi, dtype=float)))


# --------------------------------------------------------------------------
# Disc and punctured disc
# --------------------------------------------------------------------------

def poincare_metric(z, xi):
    """``|xi| / (1 - |z|^2)`` on the unit disc."""
    z = _complex(z)
    if abs(z) >= 1:
        raise OutsideDisc(f"|z| = {abs(z)} >= 1")
    return _norm2(xi) / (1 - abs(z) ** 2)


def poincare_distance(z, w):
    """Integrated distance of ``poincare_metric``: ``artanh`` of the
    pseudo-hyperbolic distance."""
    z, w = _complex(z), _complex(w)
    if abs(z) >= 1 or abs(w) >= 1:
        raise OutsideDisc("point outside the unit disc")
    delta = abs(z - w) / abs(1 - np.conj(z) * w)
    return float(np.arctanh(min(delta, 1 - 1e-17)))


def punctured_metric(z, xi):
    """``|xi| / (2 |z| log(1/|z|))`` on the punctured disc."""
    z = _complex(z)
    r = abs(z)
    if r == 0:
        raise AtPuncture("metric is undefined at the puncture")
    if r >= 1:
        raise OutsideDisc(f"|z| = {r} >= 1")
    return _norm2(xi) / (2 * r * np.log(1 / r))


def circle_length(r):
    """Punctured-disc length of the circle ``|z| = r``: ``pi / log(1/r)``."""
    if not 0 < r < 1:
        raise OutsideDisc("radius must lie in (0, 1)")
    return float(np.pi / np.log(1 / r))


# --------------------------------------------------------------------------
# Ball
# --------------------------------------------------------------------------

def bck_metric(x, u):
    """Minimal metric of the unit ball:
    ``sqrt(|u|^2/(1-|x|^2) + (x.u)^2/(1-|x|^2)^2)``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    s = 1 - x @ x
    if s <= 0:
        raise OutsideBall(f"|x| = {np.sqrt(x @ x)} >= 1")
    return float(np.sqrt(u @ u / s + (x @ u) ** 2 / s**2))


def bck_ball_metric(center, radius, x, u):
    """Minimal metric of ``B(center, radius)``; scaling of ``bck_metric``."""
    y = (np.asarray(x, float) - np.asarray(center, float)) / radius
    return bck_metric(y, u) / radius


def bck_plane_metric(x, plane, center=None, radius=1.0):
    """Minimal metric of a ball on a 2-plane: the larger principal value of
    the quadratic form of ``bck_metric`` restricted to ``plane``."""
    x = np.asarray(x, dtype=float)
    if center is not None:
        x = (x - np.asarray(center, float)) / radius
    s = 1 - x @ x
    if s <= 0:
        raise OutsideBall("point outside the ball")
    B = plane.basis
    Q = np.eye(len(x)) / s + np.outer(x, x) / s**2
    return float(np.sqrt(np.linalg.eigvalsh(B.T @ Q @ B)[-1])) / radius


def _simpson_adaptive(f, a, b, tol, fa, fm, fb, whole, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6 * (fa + 4 * flm + fm)
    right = (b - m) / 6 * (fm + 4 * frm + fb)
    if depth <= 0 or abs(left + right - whole) <= 15 * tol:
        return left + right + (left + right - whole) / 15
    return (_simpson_adaptive(f, a, m, tol / 2, fa, flm, fm, left, depth - 1)
            + _simpson_adaptive(f, m, b, tol / 2, fm, frm, fb, right, depth - 1))


def adaptive_simpson(f, a, b, tol=1e-9, depth=50):
    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    whole = (b - a) / 6 * (fa + 4 * fm + fb)
    return _simpson_adaptive(f, a, b, tol, fa, fm, fb, whole, depth)


def ball_distance(x, y, center=None, radius=1.0, tol=1e-9):
    """Integrated ball metric along the chord from ``x`` to ``y``.

    Chords are geodesics of this metric, so the integral is the distance.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    c = np.zeros_like(x) if center is None else np.asarray(center, float)
    d = y - x
    if np.linalg.norm(d) == 0:
        return 0.0
    for p in (x, y):
        if np.linalg.norm(p - c) >= radius:
            raise OutsideBall("endpoint outside the ball")
    return float(adaptive_simpson(lambda t: bck_ball_metric(c, radius, x + t * d, d), 0.0, 1.0, tol))


# --------------------------------------------------------------------------
# Harmonic measure
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ArcSet:
    """Finite union of closed arcs ``[a, b]`` of the unit circle (radians).

    ``measure`` is the normalized length ``|K|``.

    Arcs are normalized to start in ``[0, 2 pi)`` and overlaps are merged.
    """

    arcs: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        pieces = []
        for a, b in self.arcs:
            a, b = float(a), float(b)
            if b < a:
                raise ValueError("arc end precedes its start")
            if b - a >= TWO_PI:
                pieces = [(0.0, TWO_PI)]
                break
            a0 = a % TWO_PI
            b0 = a0 + (b - a)
            if b0 > TWO_PI:
                pieces += [(a0, TWO_PI), (0.0, b0 - TWO_PI)]
            else:
                pieces.append((a0, b0))
        pieces.sort()
        merged = []
        for a, b in pieces:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        object.__setattr__(self, "arcs", tuple(merged))

    @property
    def length(self):
        """Total arc length in radians."""
        return float(sum(b - a for a, b in self.arcs))

    @property
    def measure(self):
        """Normalized measure ``|K| = length / (2 pi)``."""
        return self.length / TWO_PI


def _arc_measure(z, a, b):
    # (1/pi) * angle at z subtended by the chord endpoints minus the central share
    if b - a >= TWO_PI:
        return 1.0
    ang = np.angle((np.exp(1j * b) - z) / (np.exp(1j * a) - z)) % TWO_PI
    return ang / np.pi - (b - a) / TWO_PI


def harmonic_measure(z, K: ArcSet):
    """Harmonic measure of ``K`` at ``z`` (Poisson integral of its indicator)."""
    z = _complex(z)
    if abs(z) >= 1:
        raise OutsideDisc("point outside the unit disc")
    return float(sum(_arc_measure(z, a, b) for a, b in K.arcs))


def harnack_radius(mu, K: ArcSet):
    """Radius ``1 - (2/mu) |K|`` on which the harmonic measure of ``K`` stays
    at most ``mu``.  A nonpositive value means no disc is guaranteed."""
    if not 0 < mu < 1:
        raise ValueError("mu must lie in (0, 1)")
    return 1 - 2 * K.measure / mu
