import numpy as np
import pytest

from minmetric.core import Ball, HalfSpace, Sublevel, TwoPlane
from minmetric.discs import NullDisc, containment_margin
from minmetric.errors import Infeasible, ZeroDirection
from minmetric.expr import parse
from minmetric.extremal import SolverConfig, maximize_M, maximize_g, null_project, seed_candidates

E3 = np.eye(3)
FAST = SolverConfig(multistarts=2, rounds=2)
BALL = Ball(np.zeros(3), 1.0)
HALF = HalfSpace(E3[0], 0.0)
CYL = Sublevel(parse("x1^2+x2^2-1", 3), [[-2, 2], [-2, 2], [-10, 10]], convex_hint=True)


def assert_sound(res, dom):
    w = res.witness
    assert w.null_residual() <= 1e-8
    assert containment_margin(w, dom, (32, 128)) >= 0
    assert res.bound == pytest.approx(1 / np.linalg.norm(w.derivative(0)[0]), rel=1e-12)


def test_ball_center():
    res = maximize_g(BALL, np.zeros(3), E3[0])
    assert 1.0 <= res.bound <= 1.02
    assert_sound(res, BALL)
    # the witness is an affine disc: no higher coefficients
    assert np.max(np.abs(res.witness.coeffs[1:])) <= 0.05


def test_halfspace_radial():
    res = maximize_g(HALF, E3[0], E3[0], FAST)
    assert 0.5 <= res.bound <= 0.55
    assert_sound(res, HALF)


def test_cylinder_g_and_M():
    cfg = SolverConfig(multistarts=2, rounds=2)
    g = maximize_g(CYL, np.zeros(3), E3[0], cfg)
    assert g.bound <= np.pi / 4 + 0.02
    assert_sound(g, CYL)
    M = maximize_M(CYL, np.zeros(3), TwoPlane(E3[0], E3[1]), cfg)
    assert 1.0 <= M.bound <= 1.05
    M13 = maximize_M(CYL, np.zeros(3), TwoPlane(E3[0], E3[2]), cfg)
    assert M13.bound <= np.pi / 4 + 0.02


def test_ball_M_any_plane():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(2, 3))
    res = maximize_M(BALL, np.zeros(3), TwoPlane(a, b), FAST)
    assert 1.0 <= res.bound <= 1.02
    fx, fy = res.witness.derivative(0)
    P = TwoPlane(a, b).projector()
    np.testing.assert_allclose(P @ fx, fx, atol=1e-9)
    np.testing.assert_allclose(P @ fy, fy, atol=1e-9)


def test_homogeneous_in_direction():
    a = maximize_g(BALL, [0.3, 0, 0], E3[1], FAST).bound
    b = maximize_g(BALL, [0.3, 0, 0], 3 * E3[1], FAST).bound
    assert b == pytest.approx(3 * a, rel=1e-12)


@pytest.mark.parametrize("x", [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.2, -0.3, 0.4]])
def test_monotone_under_inclusion(x):
    u = np.array([0.3, 1.0, -0.2])
    small = maximize_g(BALL, x, u, FAST).bound
    big = maximize_g(Ball(np.zeros(3), 2.0), x, u, FAST).bound
    assert big <= small + 2e-8


def test_errors():
    with pytest.raises(ZeroDirection):
        maximize_g(BALL, np.zeros(3), np.zeros(3))
    with pytest.raises(Infeasible):
        maximize_g(BALL, [2.0, 0, 0], E3[0])
    with pytest.raises(Infeasible):
        maximize_g(BALL, [0.95, 0, 0], E3[0], SolverConfig(margin=0.1))
    with pytest.raises(ValueError):
        SolverConfig(degree=0)
    with pytest.raises(ValueError):
        SolverConfig(margin=-1)


def test_seed_candidates():
    seeds = dict(seed_candidates(BALL, np.zeros(3), u=E3[0]))
    assert np.linalg.norm(seeds["affine"].derivative(0)[0]) == pytest.approx(1)
    seeds = dict(seed_candidates(HALF, [2.0, 0, 0], u=E3[1]))
    assert np.linalg.norm(seeds["affine"].derivative(0)[0]) == pytest.approx(2)
    names = [n for n, _ in seed_candidates(CYL, np.zeros(3), u=E3[0])]
    assert "strip" in names
    for _, d in seed_candidates(CYL, np.zeros(3), u=E3[2]):
        fx = d.derivative(0)[0]
        np.testing.assert_allclose(fx / np.linalg.norm(fx), E3[2], atol=1e-12)


def test_null_project_keeps_center_and_first_coefficient():
    rng = np.random.default_rng(0)
    C = np.zeros((6, 3), complex)
    C[0] = [1, 1j, 0]
    C[1:] = 0.05 * (rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3)))
    d = NullDisc(np.ones(3), C)
    p = null_project(d)
    assert p.null_residual() <= 1e-12
    np.testing.assert_array_equal(p.coeffs[0], C[0])
    np.testing.assert_array_equal(p.center, d.center)


def test_deterministic():
    a = maximize_g(HALF, [1.0, 0.5, 0], [1, 1, 0], FAST)
    b = maximize_g(HALF, [1.0, 0.5, 0], [1, 1, 0], FAST)
    assert a.bound == b.bound
    np.testing.assert_array_equal(a.witness.coeffs, b.witness.coeffs)
