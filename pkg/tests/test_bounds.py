import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import special_ortho_group

from minmetric.bounds import (MpshCertificate, Region, Toolbox, axial_bound, best_lower,
                              circumscribed_ball_bound, convex_bound, global_mpsh_bound,
                              halfspace_bound, localization_bound, localization_constant,
                              log_theta_radial_jet, make_theta, mpsh_check, psi_jet,
                              psi_lower_bound, sibony_value, smc_bound, trace_plane_hessian)
from minmetric.core import Ball, HalfSpace, Polyhedral, Sublevel, TwoPlane
from minmetric.errors import (CandidateInvalid, HypothesisFailed, NonpositiveFactor, NotContained,
                              PointOutside, RankDeficient)
from minmetric.expr import parse
from minmetric.extremal import SolverConfig, maximize_g
from minmetric.models import bck_ball_metric, bck_metric

E3 = np.eye(3)
BALL = Ball(np.zeros(3), 1.0)
BOX = [[-1, 1]] * 3
H = np.diag([2.0, 2.0, -1.0])
unit_vectors = st.lists(st.floats(-1, 1), min_size=3, max_size=3).map(np.array).filter(
    lambda v: np.linalg.norm(v) > 1e-2).map(lambda v: v / np.linalg.norm(v))


def strong_cert(text, box, resolution=11):
    return mpsh_check(parse(text, 3), Region(np.array(box, float), resolution))


def test_trace_plane_hessian():
    assert trace_plane_hessian(H, TwoPlane(E3[0], E3[1])) == pytest.approx(4)
    assert trace_plane_hessian(H, TwoPlane(E3[0], E3[2])) == pytest.approx(1)
    assert trace_plane_hessian(np.eye(3), TwoPlane([1, 2, 3], [0, 1, -1])) == pytest.approx(2)


def test_mpsh_check_examples():
    log = mpsh_check(parse("log(abs2(x1:x3))/2", 3), Region.shell(3, 0.5, 2.0, n_random=1000))
    assert abs(log.c) <= 1e-9 and log.is_mpsh
    quad = strong_cert("x1^2+x2^2-0.5*x3^2", [[-3, 3]] * 3)
    assert quad.c == pytest.approx(1, abs=1e-12) and quad.is_strong
    hyper = mpsh_check(parse("-1/(1+x1^2)+x2^2+x3^2", 3),
                       Region(np.array([[-10, 10], [-2, 2], [-2, 2]]), 41))
    assert hyper.is_mpsh
    bad = strong_cert("x1^2-x2^2", BOX)
    assert not bad.is_mpsh
    with pytest.raises(HypothesisFailed):
        mpsh_check(parse("x1^2-x2^2", 3), Region(np.array(BOX, float), 5), strong=True)


def test_mpsh_lipschitz_slack_is_nonnegative():
    cert = mpsh_check(parse("x1^4+x2^2+x3^2", 3), Region(np.array(BOX, float), 11), lipschitz=True)
    assert cert.slack > 0
    assert cert.c == pytest.approx(cert.sample_min - cert.slack)


def test_sibony_examples():
    plane = TwoPlane([1, 2, 0], [0, 1, 1])
    assert sibony_value(parse("abs2(x1:x3)", 3), np.zeros(3), plane, dom=BALL) == pytest.approx(1)
    d = 0.5
    small = Ball(np.array([0.2, 0, 0]), d)
    u = parse("((x1-0.2)^2+x2^2+x3^2)/0.25", 3)
    assert sibony_value(u, [0.2, 0, 0], plane, dom=small) == pytest.approx(1 / d)
    with pytest.raises(CandidateInvalid, match="0 <= u <= 1"):
        sibony_value(parse("2*abs2(x1:x3)", 3), np.zeros(3), plane, dom=BALL)
    with pytest.raises(CandidateInvalid, match="is not 0"):
        sibony_value(parse("abs2(x1:x3)", 3), [0.1, 0, 0], plane, dom=BALL)


def test_theta():
    th = make_theta()
    assert th(0.25) == 0.25
    assert th(2.0) == 1.0
    assert 0 < th.A < np.inf
    fine = make_theta(grid_size=40_000)
    assert fine.A == pytest.approx(th.A, rel=0.01)
    t = np.linspace(0, 3, 3001)
    assert np.all(np.diff(th(t)) >= -1e-15)
    # C^2 matching at the junctions
    for t0 in (0.5, 1.0):
        a = np.array(th.derivatives(t0 - 1e-9))
        b = np.array(th.derivatives(t0 + 1e-9))
        np.testing.assert_allclose(a, b, atol=1e-6)
    assert np.all(th.log_second(np.linspace(0.5, 5, 5000)) >= -th.A)


@given(st.floats(0.1, 5), st.lists(st.floats(-2, 2), min_size=3, max_size=3), unit_vectors,
       unit_vectors)
def test_log_theta_trace_bound(beta, y, a, b):
    y = np.array(y)
    if np.linalg.norm(y) < 1e-6 or abs(a @ b) > 0.99:
        return
    A = make_theta().A
    J = log_theta_radial_jet(y, beta)
    assert trace_plane_hessian(J.hess[0], TwoPlane(a, b)) >= -4 * A * beta - 1e-6


@given(st.lists(st.floats(-0.6, 0.6), min_size=3, max_size=3), st.floats(0.1, 1),
       st.floats(0.1, 20), unit_vectors, unit_vectors)
def test_psi_trace_identity(x, r, lam, a, b):
    if abs(a @ b) > 0.99:
        return
    u = parse("abs2(x1:x3)-1", 3)
    x = np.array(x)
    J = psi_jet(u, x, r, lam, x)
    expected = 4 / r**2 * np.exp(lam * u(x))
    assert trace_plane_hessian(J.hess[0], TwoPlane(a, b)) == pytest.approx(expected, rel=1e-6)


def test_psi_lower_bound_examples():
    u = parse("abs2(x1:x3)-1", 3)
    cert = strong_cert("abs2(x1:x3)-1", BOX)
    assert cert.c == pytest.approx(4)
    A = make_theta().A
    b = psi_lower_bound(u, cert, np.zeros(3), 0.5, v=E3[0], dom=BALL)
    assert b.value == pytest.approx(2 * np.exp(-2 * A))
    # near the boundary the exponent vanishes
    x = np.array([0.999999, 0, 0])
    wide = strong_cert("abs2(x1:x3)-1", [[-2, 2]] * 3)
    near = psi_lower_bound(u, wide, x, 0.25, v=E3[0], p=[0.9, 0, 0])
    assert near.value == pytest.approx(4, rel=1e-3)
    doubled = MpshCertificate(cert.field, cert.region, 2 * cert.c, cert.sample_min, 0.0,
                              cert.n_points, cert.argmin, cert.box)
    assert psi_lower_bound(u, doubled, np.zeros(3), 0.5, v=E3[0]).value > b.value
    with pytest.raises(HypothesisFailed, match="B\\(p, 2r\\)"):
        psi_lower_bound(u, cert, np.zeros(3), 0.75, v=E3[0])
    with pytest.raises(HypothesisFailed, match="B\\(p, r\\)"):
        psi_lower_bound(u, cert, np.zeros(3), 0.25, v=E3[0], p=[0.5, 0, 0])


def test_global_mpsh_bound_examples():
    u = parse("x1^2+x2^2-0.5*x3^2-1", 3)
    cert = strong_cert("x1^2+x2^2-0.5*x3^2-1", [[-3, 3]] * 3)
    A = make_theta().A
    at0 = global_mpsh_bound(u, cert, np.zeros(3), E3[0]).value
    assert at0 == pytest.approx(np.sqrt(1 / (4 * A * np.e)))
    x = np.array([np.sqrt(0.75), 0, 0])  # u(x) = -1/4
    assert global_mpsh_bound(u, cert, x, E3[1]).value == pytest.approx(2 * at0)
    assert global_mpsh_bound(u, cert, x, np.zeros(3)).value == 0
    with pytest.raises(HypothesisFailed):
        global_mpsh_bound(u, cert, [2.0, 0, 0], E3[0])


def test_smc_bound_on_ball():
    dom = Sublevel(parse("abs2(x1:x3)-1", 3), [[-1.5, 1.5]] * 3)
    cert = strong_cert("abs2(x1:x3)-1", [[-1.5, 1.5]] * 3)
    A = make_theta().A
    C = np.sqrt(1 / (2 * A * np.e))
    b = smc_bound(dom, cert, np.zeros(3), E3[0], k2=2.0)
    assert b.value == pytest.approx(C, rel=1e-3)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.normal(size=3)
        x *= rng.uniform(0, 0.95) / np.linalg.norm(x)
        v = rng.normal(size=3)
        val = smc_bound(dom, cert, x, v, k2=2.0).value
        assert val <= bck_metric(x, v) + 1e-9
        assert val <= C * np.linalg.norm(v) / np.sqrt(1 - np.linalg.norm(x)) * (1 + 1e-3)


def test_halfspace_bound_examples():
    Hs = HalfSpace(E3[0], 0.0)
    assert halfspace_bound(Hs, E3[0], E3[0]).value == 0.5
    assert halfspace_bound(Hs, [2, 5, 7], E3[0]).value == 0.25
    assert halfspace_bound(Hs, E3[0], E3[2]).value == 0
    with pytest.raises(PointOutside):
        halfspace_bound(Hs, -E3[0], E3[0])


@given(st.integers(0, 10_000), st.lists(st.floats(-3, 3), min_size=3, max_size=3), unit_vectors)
def test_halfspace_bound_rigid_invariance(seed, t, v):
    Hs = HalfSpace(E3[0], 0.0)
    x = np.array([1.3, 0.2, -0.4])
    O = special_ortho_group.rvs(3, random_state=seed)
    t = np.array(t)
    moved = HalfSpace(O @ E3[0], (O @ E3[0]) @ t)
    assert halfspace_bound(moved, O @ x + t, O @ v).value == pytest.approx(
        halfspace_bound(Hs, x, v).value, rel=1e-9, abs=1e-12)


def test_convex_and_axial():
    slab = Polyhedral((HalfSpace(E3[0], 0.0), HalfSpace(-E3[0], -1.0)))
    assert convex_bound(slab, [0.25, 0, 0], E3[0]).value == pytest.approx(2)
    k = 8
    ang = 2 * np.pi * np.arange(k) / k
    cyl = Polyhedral(tuple(HalfSpace([-np.cos(a), -np.sin(a), 0], -1.0) for a in ang))
    # faces 0 and 2 have normals -e1 and -e2
    b = axial_bound(cyl, [0.3, 0.1, 1.0], 2.0, faces=(0, 2))
    assert b.inputs["c3"] == pytest.approx(1)
    assert b.value == pytest.approx(1 / 8)
    assert axial_bound(cyl, [1.0, 1.0, 0.0], 2.0, faces=(0, 2)).value == pytest.approx(0)
    with pytest.raises(RankDeficient):
        axial_bound(slab, E3[2], 2.0)
    with pytest.raises(RankDeficient):
        axial_bound(cyl, E3[2], 2.0, faces=(0, 4))


def test_circumscribed_ball_bound():
    assert circumscribed_ball_bound(BALL, np.zeros(3), 1.0, [0.5, 0, 0], E3[0]).value == \
        pytest.approx(4 / 3)
    # inside the short cylinder x1^2 + x2^2 < 1, |x3| < 1
    short = Sublevel(parse("(x1^2+x2^2)^8+x3^16-1", 3), [[-1.5, 1.5]] * 3)
    b = circumscribed_ball_bound(short, np.zeros(3), np.sqrt(2), np.zeros(3), E3[0])
    assert b.value == pytest.approx(1 / np.sqrt(2))
    with pytest.raises(NotContained):
        circumscribed_ball_bound(short, np.zeros(3), 1.2, np.zeros(3), E3[0])
    with pytest.raises(NotContained):
        circumscribed_ball_bound(HalfSpace(E3[0], 0), np.zeros(3), 10, E3[0], E3[0])


def test_localization_constant_on_ball():
    peak = parse("x1-1", 3)
    for r0 in (0.5, 0.7):
        c, eps0 = localization_constant(BALL, peak, E3[0], r0, c0=1.0)
        assert eps0 == pytest.approx(r0**4 / 2, rel=1e-6)
        assert c <= 8 / (0.95 * r0**4) * (1 + 1e-6)
    c, eps0 = localization_constant(BALL, peak, E3[0], 0.5, c0=1.0, phi=lambda t: np.sqrt(2 * t))
    assert eps0 == pytest.approx(0.5**4 / 2, rel=1e-9)


def test_localization_bound_factor():
    peak = parse("x1-1", 3)
    const = localization_constant(BALL, peak, E3[0], 0.5, c0=1.0)
    c = const[0]
    for dist in (1e-2 / c, 1e-4 / c):
        x = np.array([1 - dist, 0, 0])
        b = localization_bound(BALL, peak, E3[0], 0.5, x, E3[1], 1.0, constant=const)
        assert b.inputs["factor"] == pytest.approx(1 - c * dist)
        assert b.value == pytest.approx(b.inputs["factor"] * bck_ball_metric(E3[0], 0.5, x, E3[1]))
        assert b.value <= bck_metric(x, E3[1])
    with pytest.raises(NonpositiveFactor):
        localization_bound(BALL, peak, E3[0], 0.5, [1 - 2 / c, 0, 0], E3[1], 1.0, constant=const)
    with pytest.raises(HypothesisFailed):
        localization_constant(BALL, parse("x1-0.5", 3), E3[0], 0.5, c0=1.0)


def test_best_lower_examples():
    x, v = np.array([0.5, 0, 0]), E3[1]
    b = best_lower(BALL, x, v)
    assert b.kind == "circumscribed_ball" and b.value == pytest.approx(2 / np.sqrt(3))
    b = best_lower(HalfSpace(E3[0], 0.0), E3[0], E3[0])
    assert b.value == 0.5
    slab = Polyhedral((HalfSpace(E3[0], 0.0), HalfSpace(-E3[0], -1.0)))
    assert best_lower(slab, [0.5, 0, 0], E3[1]).value == 0
    tb = Toolbox(balls=[(np.zeros(3), 3.0)])
    assert best_lower(slab, [0.5, 0, 0], E3[1], tb).kind == "circumscribed_ball"


@pytest.mark.parametrize("dom,x,v", [
    (BALL, [0.3, 0.2, 0.1], [1, 2, 0]),
    (HalfSpace(E3[0], 0.0), [0.5, 1, 0], [1, 1, 1]),
    (Polyhedral(tuple(HalfSpace(e, 0.0) for e in E3)), [1, 2, 0.5], [0, 0, 1]),
])
def test_sandwich(dom, x, v):
    up = maximize_g(dom, x, v, SolverConfig(multistarts=2, rounds=2)).bound
    assert best_lower(dom, x, v).value <= up + 2e-8
