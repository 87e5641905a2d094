import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import special_ortho_group

from minmetric.classify import (COMPLETE, HYPERBOLIC, NON_HYPERBOLIC, UNKNOWN, classify_convex,
                                classify_general, interior_point, numerical_rank, smc_upgrade,
                                witness_plane_valid)
from minmetric.core import Ball, HalfSpace, Polyhedral, Sublevel, contains
from minmetric.errors import EmptyDomain, HypothesisFailed
from minmetric.expr import parse

E3 = np.eye(3)
SLAB = Polyhedral((HalfSpace(E3[0], 0.0), HalfSpace(-E3[0], -1.0)))
OCTANT = Polyhedral(tuple(HalfSpace(e, 0.0) for e in E3))
PRISM = Polyhedral((HalfSpace(E3[0], -1.0), HalfSpace(E3[1], -1.0),
                    HalfSpace([-1.0, -1.0, 0.0], -1.0)))


def test_slab_non_hyperbolic():
    v = classify_convex(SLAB)
    assert v.status == NON_HYPERBOLIC
    plane = v.certificate["plane"]
    assert plane["point"][0] == pytest.approx(0.5)
    np.testing.assert_allclose(np.asarray(plane["basis"]) @ E3[0], 0, atol=1e-12)
    assert witness_plane_valid(SLAB, plane["point"], plane["basis"], seed=7)


@pytest.mark.parametrize("dom", [OCTANT, PRISM])
def test_complete_hyperbolic(dom):
    v = classify_convex(dom)
    assert v.status == COMPLETE
    Y = np.array([h["normal"] for h in v.certificate["hyperplanes"]])
    assert len(Y) == 2 and numerical_rank(Y) == 2
    assert contains(dom, v.certificate["interior_point"])


def test_halfspace_and_empty():
    v = classify_convex(HalfSpace(E3[2], 1.0))
    assert v.status == NON_HYPERBOLIC
    with pytest.raises(EmptyDomain):
        interior_point(Polyhedral((HalfSpace(E3[0], 1.0), HalfSpace(-E3[0], 0.0))))


def test_numerical_rank():
    assert numerical_rank(np.array([[1, 0, 0], [2, 0, 0]])) == 1
    assert numerical_rank(np.array([[1, 0, 0], [1, 1e-12, 0]])) == 1
    assert numerical_rank(np.zeros((2, 3))) == 0


@settings(max_examples=20)
@given(st.integers(0, 100_000), st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_rigid_motion_invariance(seed, t):
    O = special_ortho_group.rvs(3, random_state=seed)
    t = np.array(t)
    for dom in (SLAB, OCTANT, PRISM):
        moved = Polyhedral(tuple(HalfSpace(O @ h.normal, h.offset + (O @ h.normal) @ t)
                                 for h in dom.halfspaces))
        v = classify_convex(moved)
        assert v.status == classify_convex(dom).status
        if v.status == NON_HYPERBOLIC:
            p = v.certificate["plane"]
            assert witness_plane_valid(moved, p["point"], p["basis"])


def test_general_verdicts():
    v = classify_general(Ball(np.zeros(3), 1.0))
    assert v.status == HYPERBOLIC
    assert "smc_upgrade" in v.certificate["note"]
    ell = Sublevel(parse("x1^2+x2^2+2*x3^2-1", 3), [[-2, 2]] * 3)
    assert classify_general(ell).status == HYPERBOLIC
    cyl = Sublevel(parse("x1^2+x2^2-1", 3), [[-2, 2], [-2, 2], [-10, 10]])
    assert classify_general(cyl).status == UNKNOWN
    assert classify_general(OCTANT).status == COMPLETE


def test_witness_hyperboloid():
    dom = Sublevel(parse("x1^2+x2^2-0.5*x3^2-1", 3), [[-4, 4], [-4, 4], [-5, 5]])
    v = classify_general(dom, witness=dom.field, witness_clip=-1.0)
    assert v.status == HYPERBOLIC
    assert v.certificate["witness"].c == pytest.approx(1)


def test_witness_hyperconvex():
    u = parse("-1/(1+x1^2)+x2^2+x3^2", 3)
    dom = Sublevel(u, [[-10, 10], [-2, 2], [-2, 2]])
    v = classify_general(dom, witness=u)
    assert v.status == HYPERBOLIC
    assert v.certificate["witness"].is_mpsh


def test_bad_witness_is_not_used():
    cyl = Sublevel(parse("x1^2+x2^2-1", 3), [[-2, 2], [-2, 2], [-10, 10]])
    v = classify_general(cyl, witness=parse("x1^2-x3^2-1", 3))
    assert v.status == UNKNOWN


def test_smc_upgrade():
    ball = Sublevel(parse("abs2(x1:x3)-1", 3), [[-1.5, 1.5]] * 3)
    assert smc_upgrade(ball).status == COMPLETE
    ell = Sublevel(parse("x1^2+x2^2+2*x3^2-1", 3), [[-1.5, 1.5]] * 3)
    v = smc_upgrade(ell)
    assert v.status == COMPLETE and v.certificate["c"] == pytest.approx(4)
    # pinched neck: a saddle-shaped waist where the two smallest curvatures sum below 0
    neck = Sublevel(parse("x1^2+x2^2-4*x3^2+4*x3^4-0.05", 3), [[-1.5, 1.5]] * 3)
    with pytest.raises(HypothesisFailed, match="not strongly MPSH"):
        smc_upgrade(neck)
    cyl = Sublevel(parse("x1^2+x2^2-1", 3), [[-2, 2], [-2, 2], [-10, 10]])
    with pytest.raises(HypothesisFailed, match="box"):
        smc_upgrade(cyl)


def test_verdict_serializes():
    d = classify_convex(SLAB).to_dict()
    assert d["status"] == NON_HYPERBOLIC
    assert isinstance(d["certificate"]["plane"]["point"], list)
