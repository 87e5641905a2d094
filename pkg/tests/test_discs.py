import numpy as np
import pytest
from hypothesis import given, strategies as st

from minmetric.core import Ball, HalfSpace, Sublevel, frame_complete
from minmetric.discs import (NullDisc, affine_disc, circle_margin, containment_margin, disc_grid,
                             halfplane_coefficients, halfplane_disc, mobius_disc, planar_disc,
                             rotate_parameter, strip_coefficients, strip_disc, validate)
from minmetric.expr import parse

E3 = np.eye(3)
CYL = Sublevel(parse("x1^2+x2^2-1", 3), [[-2, 2], [-2, 2], [-10, 10]], convex_hint=True)
coeff_arrays = st.integers(1, 6).flatmap(lambda N: st.lists(
    st.floats(-1, 1), min_size=6 * N, max_size=6 * N).map(
        lambda a: np.array(a[:3 * N]).reshape(N, 3) + 1j * np.array(a[3 * N:]).reshape(N, 3)))


def test_evaluate_affine():
    d = NullDisc(np.zeros(3), [[1, 1j, 0]])
    z = 0.3 + 0.4j
    # f(z) = Re(c1 z) = (x, -y, 0)
    np.testing.assert_allclose(d(z), [0.3, -0.4, 0], atol=1e-15)
    fx, fy = d.derivative(0)
    np.testing.assert_allclose(fx, E3[0])
    np.testing.assert_allclose(fy, -E3[1])
    d = NullDisc(np.zeros(3), [[1, -1j, 0]])
    np.testing.assert_allclose(d(z), [0.3, 0.4, 0], atol=1e-15)


def test_evaluate_quadratic_term():
    d = NullDisc(np.ones(3), [[0, 0, 0], [1, 1j, 0]])
    x, y = 0.2, -0.7
    np.testing.assert_allclose(d(complex(x, y)), [1 + x * x - y * y, 1 - 2 * x * y, 1], atol=1e-15)


def test_null_residual_examples():
    assert NullDisc(np.zeros(3), [[1, 1j, 0]]).null_residual() == 0
    assert NullDisc(np.zeros(3), [[1, 0, 0]]).null_residual() == 1
    # (2 c2 z)^2 summed: 4 (1 + 0 + 0) z^2
    assert NullDisc(np.zeros(3), [[1, 1j, 0], [1, 0, 0]]).null_residual() == pytest.approx(4)


@given(coeff_arrays, st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_derivative_matches_finite_differences(C, x, y):
    if x * x + y * y > 0.8:
        return
    d = NullDisc(np.zeros(3), C)
    h = 1e-6
    fx, fy = d.derivative(complex(x, y))
    np.testing.assert_allclose(fx, (d(complex(x + h, y)) - d(complex(x - h, y))) / (2 * h),
                               atol=1e-7)
    np.testing.assert_allclose(fy, (d(complex(x, y + h)) - d(complex(x, y - h))) / (2 * h),
                               atol=1e-7)
    F0 = d.complex_derivative(0)
    fx0, fy0 = d.derivative(0)
    np.testing.assert_allclose(F0, fx0 - 1j * fy0, atol=1e-15)


@given(coeff_arrays)
def test_harmonic(C):
    d = NullDisc(np.zeros(3), C)
    h = 1e-4
    for z in (0.1 + 0.2j, -0.3j, 0.5):
        lap = (d(z + h) + d(z - h) + d(z + 1j * h) + d(z - 1j * h) - 4 * d(z)) / h**2
        assert np.max(np.abs(lap)) <= 1e-6 * (1 + np.abs(C).sum())


@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8))
def test_null_discs_are_conformal(a):
    a = np.array(a[:4]) + 1j * np.array(a[4:])
    d = planar_disc(np.zeros(3), E3[0], E3[2], a)
    assert d.null_residual() <= 1e-14
    for z in disc_grid((8, 32))[::7]:
        fx, fy = d.derivative(z)
        scale = 1 + fx @ fx + fy @ fy
        assert abs(np.linalg.norm(fx) - np.linalg.norm(fy)) <= 1e-9 * scale
        assert abs(fx @ fy) <= 1e-9 * scale


def test_containment_margin_examples():
    B = Ball(np.zeros(3), 1.0)
    fr = frame_complete(E3[0], E3[1])
    m = containment_margin(affine_disc(np.zeros(3), fr), B)
    assert m == pytest.approx(0, abs=1e-12)
    assert containment_margin(affine_disc(np.zeros(3), fr, 1.1), B) < 0
    with pytest.raises(ValueError):
        containment_margin(affine_disc(np.zeros(3), fr), B, grid=(4, 16))


def test_affine_disc():
    fr = frame_complete(E3[0], E3[1])
    d = affine_disc(np.zeros(3), fr)
    assert np.linalg.norm(d.derivative(0)[0]) == 1
    assert d.null_residual() == 0
    np.testing.assert_allclose(d.coeffs[0], E3[0] - 1j * E3[1])


def test_strip_disc_derivative_and_containment():
    fr = frame_complete(E3[0], E3[2])
    for N, tol in ((31, 0.021), (255, 0.0026)):
        d = strip_disc(np.zeros(3), fr, N)
        assert np.linalg.norm(d.derivative(0)[0]) == pytest.approx(4 / np.pi, rel=1e-12)
        assert d.null_residual() <= 1e-14
    d = strip_disc(np.zeros(3), fr, 31)
    assert containment_margin(d.scaled(0.99), CYL) >= 0
    # Taylor truncation stays within the tail bound of the exact strip map
    t = np.linspace(0, 2 * np.pi, 720)
    for rad in (0.5, 0.9, 0.97):
        Z = rad * np.exp(1j * t)
        exact = (4 / np.pi) * np.arctan(Z).real
        tail = (4 / np.pi) * rad**33 / (33 * (1 - rad**2))
        assert np.max(np.abs(d(Z)[:, 0] - exact)) <= tail * (1 + 1e-9) + 1e-14
    # Fejer summation keeps |Re f| < 1 - 1e-3 on the whole closed disc
    fe31 = strip_disc(np.zeros(3), fr, 31, summation="fejer")
    Z = ((1 - np.geomspace(1e-6, 1, 200))[:, None] * np.exp(1j * t)).ravel()
    assert np.max(np.abs(fe31(Z)[:, 0])) < 1 - 1e-3
    fe = strip_disc(np.zeros(3), fr, 64, summation="fejer")
    assert containment_margin(fe, CYL) >= 0
    with pytest.raises(ValueError):
        strip_disc(np.zeros(3), fr, 4)


def test_strip_coefficients_tend_to_4_over_pi():
    assert strip_coefficients(9)[0] == pytest.approx(4 / np.pi)
    assert strip_coefficients(9)[2] == pytest.approx(-4 / (3 * np.pi))
    assert strip_coefficients(9)[1] == 0


def test_halfplane_coefficients_positive():
    for N in (4, 8, 16):
        a = halfplane_coefficients(N)
        assert a[0] == pytest.approx(2 * np.cos(np.pi / (N + 2)))
        t = np.linspace(0, 2 * np.pi, 4001)
        k = np.arange(1, N + 1)
        re = 1 + np.real(np.exp(1j * np.outer(t, k)) @ a)
        assert np.min(re) >= -1e-12


def test_halfplane_disc_in_halfspace():
    H = HalfSpace(E3[0], 0.0)
    d = halfplane_disc(E3[0], E3[0], 0.0, E3[1], 12)
    assert validate(d, H).ok
    # the boundary circle touches the face, so only the Lipschitz guard is lost
    assert circle_margin(d, H) >= -np.pi * d.lipschitz_on_circle() / 4096


def test_mobius_disc_through_point():
    c, rho = np.zeros(3), 1.0
    x = np.array([0.3, 0.2, 0])
    d = mobius_disc(x, c, rho, E3[0], E3[1], N=200)
    np.testing.assert_allclose(d(0), x)
    assert np.max(np.linalg.norm(d(np.exp(1j * np.linspace(0, 6, 50))), axis=1)) == pytest.approx(1, abs=1e-6)
    assert np.linalg.norm(d.derivative(0)[0]) == pytest.approx(1 - 0.13)


@given(st.floats(0, 2 * np.pi))
def test_rotate_parameter(alpha):
    d = NullDisc(np.zeros(3), [[1, 1j, 0], [0.2, 0, 0.1j]])
    r = rotate_parameter(d, alpha)
    z = 0.3 - 0.5j
    np.testing.assert_allclose(r(z), d(np.exp(1j * alpha) * z), atol=1e-14)


def test_scaled_and_with_degree():
    d = NullDisc(np.zeros(3), [[1, 1j, 0], [0.5, 0, 0]])
    np.testing.assert_allclose(d.scaled(0.5)(0.8), d(0.4))
    assert d.with_degree(5).degree == 5
    np.testing.assert_allclose(d.with_degree(5)(0.3j), d(0.3j))
    with pytest.raises(ValueError):
        NullDisc(np.zeros(3), [[1, 1j]])
