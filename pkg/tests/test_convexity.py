"""Polyhedral convexity: subdifferentials, inradii, scalarized verdicts."""

import math

import numpy as np
import pytest

from subreg.convexity import (
    MaxAffineFn,
    OrderCone,
    Polytope,
    inradius_origin,
    inradius_origin_info,
    intrad_info,
    minkowski_sum,
    sharp_min_convex,
    sms_convex_scalarization,
    sms_frechet_scalarization,
    subdifferential_at,
)
from subreg.mappings import SingleMap
from subreg.rates import descent_rate
from subreg.spaces import Norm, rng_from


def _abs_sum():
    # phi(x) = |x1| + |x2|
    return MaxAffineFn([((1.0, 1.0), 0.0), ((1.0, -1.0), 0.0), ((-1.0, 1.0), 0.0), ((-1.0, -1.0), 0.0)])


# ---------------------------------------------------------------------------
# Max-affine functions


def test_max_affine_values_and_gradient():
    phi = MaxAffineFn([((1.0,), 0.0), ((-2.0,), 0.0)])
    assert phi.value([3.0]) == 3.0
    assert phi.value([-1.0]) == 2.0
    assert np.allclose(phi.value_batch(np.array([[3.0, -1.0, 0.0]])), [3.0, 2.0, 0.0])
    assert phi.gradient([3.0]) == pytest.approx(1.0)
    assert phi.gradient([-1.0]) == pytest.approx(-2.0)


def test_max_affine_quadratic_term():
    phi = MaxAffineFn([((1.0,), 0.0), ((-1.0,), 0.0)], quad=[[1.0]])
    assert phi.value([2.0]) == pytest.approx(2.0 + 2.0)
    assert phi.gradient([1.0]) == pytest.approx(2.0)  # active slope 1 plus Qx


def test_max_affine_validation():
    with pytest.raises(ValueError, match="at least one"):
        MaxAffineFn([])
    with pytest.raises(ValueError, match="shape"):
        MaxAffineFn([((1.0, 0.0), 0.0)], quad=[[1.0]])
    with pytest.raises(ValueError, match="symmetric"):
        MaxAffineFn([((1.0, 0.0), 0.0)], quad=[[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ValueError, match="semidefinite"):
        MaxAffineFn([((1.0, 0.0), 0.0)], quad=[[-1.0, 0.0], [0.0, 1.0]])


def test_subdifferential_vertices():
    sub = subdifferential_at(_abs_sum(), (0.0, 0.0))
    assert sorted(map(tuple, sub.vertices)) == [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]
    # away from the kink only one piece is active
    smooth = subdifferential_at(_abs_sum(), (0.3, 0.2))
    assert smooth.vertices.shape == (1, 2)
    assert tuple(smooth.vertices[0]) == (1.0, 1.0)


def test_subdifferential_active_set_inclusion():
    phi = _abs_sum()
    full = {tuple(v) for v in subdifferential_at(phi, (0.0, 0.0)).vertices}
    rng = rng_from(41)
    for _ in range(20):
        x = rng.uniform(-0.5, 0.5, size=2)
        near = {tuple(v) for v in subdifferential_at(phi, x).vertices}
        assert near <= full


def test_subdifferential_quadratic_shift():
    phi = MaxAffineFn([((1.0,), 0.0), ((-1.0,), 0.0)], quad=[[1.0]])
    sub = subdifferential_at(phi, (1.0,))
    assert np.allclose(sub.vertices, [[2.0]])


# ---------------------------------------------------------------------------
# Inradius of a polytope around the origin


def test_inradius_square():
    square = Polytope(np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]))
    assert inradius_origin(square) == pytest.approx(1.0, abs=1e-12)


def test_inradius_interval():
    assert inradius_origin(Polytope(np.array([[-1.0], [1.0]]))) == pytest.approx(1.0)
    assert inradius_origin(Polytope(np.array([[-2.0], [0.5]]))) == pytest.approx(0.5)


def test_inradius_triangle():
    tri = Polytope(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]))
    assert inradius_origin(tri) == pytest.approx(1.0 / math.sqrt(5.0), rel=1e-12)


def test_inradius_origin_on_boundary():
    tri = Polytope(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    assert inradius_origin(tri) == 0.0


def test_inradius_origin_outside():
    tri = Polytope(np.array([[1.0, 0.0], [2.0, 0.0], [1.0, 1.0]]))
    res = inradius_origin_info(tri)
    assert res.value == 0.0
    assert "outside" in res.note


def test_inradius_degenerate_segment():
    seg = Polytope(np.array([[-1.0, 0.0], [1.0, 0.0]]))
    res = inradius_origin_info(seg)
    assert res.value == 0.0
    assert res.note == "not full-dimensional"


def test_inradius_dual_norm_weighting():
    # l1-ball gauge of the square's facet normals doubles the margin count
    square = Polytope(np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]))
    assert inradius_origin(square, dual_norm=Norm("linf")) == pytest.approx(1.0)


def test_inradius_sampled_mode():
    square = Polytope(np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]))
    res = inradius_origin_info(square, mode="sampled")
    assert res.mode == "sampled-upper"
    # axis directions sit in the sample prefix, so the binding facet is hit
    assert res.value == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError, match="mode"):
        inradius_origin_info(square, mode="verbatim")


def test_facet_form_dimension_cap():
    cube = Polytope(np.array(list(np.ndindex(2, 2, 2, 2)), dtype=float))
    with pytest.raises(ValueError, match="dimension <= 3"):
        cube.facet_form()


def test_minkowski_sum_of_squares():
    square = Polytope(np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]))
    doubled = minkowski_sum([square, square], [1.0, 1.0])
    assert inradius_origin(doubled) == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# Sharp minimality, structurally


def test_sharp_min_convex_certified():
    cert = sharp_min_convex(_abs_sum(), (0.0, 0.0))
    assert cert.verdict == "certified-numerically"
    assert cert.modulus == pytest.approx(1.0, abs=1e-12)
    assert cert.evidence == "structural"
    # sampled descent rate agrees with the structural growth constant
    assert cert.rate.extrapolated == pytest.approx(1.0, rel=0.05)


def test_sharp_min_convex_refuted_flat():
    cert = sharp_min_convex(MaxAffineFn([((1.0,), 0.0), ((0.0,), 0.0)]), (0.0,))
    assert cert.verdict == "refuted-with-witness"
    assert cert.modulus == 0.0
    assert any("flat direction" in n for n in cert.notes)


def test_sharp_min_matches_descent_rate_randomized():
    rng = rng_from(42)
    for _ in range(5):
        p = int(rng.integers(3, 6))
        theta = np.sort(rng.uniform(0, 2 * np.pi, size=p))
        radii = rng.uniform(0.6, 1.25, size=p)
        a = radii[:, None] * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        phi = MaxAffineFn([(tuple(row), 0.0) for row in a])
        inr = inradius_origin(subdifferential_at(phi, (0.0, 0.0)))
        if inr <= 0.05:
            continue
        est = descent_rate(phi.as_handle(), (0.0, 0.0))
        assert est.extrapolated == pytest.approx(inr, rel=0.05)


# ---------------------------------------------------------------------------
# Order cones and scalarization


def test_order_cone_basics():
    orthant = OrderCone.nonneg(2)
    assert orthant.is_nonneg_orthant
    assert orthant.dual_contains((0.5, 0.2))
    assert not orthant.dual_contains((-0.1, 1.0))
    slanted = OrderCone(((1.0,), (1.0,)))  # single generator (1, 1)
    assert not slanted.is_nonneg_orthant
    assert slanted.dual_contains((1.0, -0.5))
    assert not slanted.dual_contains((-1.0, -0.5))


def test_intrad_abs_sum_with_zero_component():
    zero = MaxAffineFn([((0.0, 0.0), 0.0)])
    info = intrad_info([_abs_sum(), zero], (0.0, 0.0))
    assert info.value == pytest.approx(1.0, abs=1e-12)
    assert info.ystar == (1.0, 0.0)
    assert info.evidence == "structural"


def test_intrad_two_scalar_folds():
    comps = [
        MaxAffineFn([((1.0,), 0.0), ((-1.0,), 0.0)]),
        MaxAffineFn([((2.0,), 0.0), ((-2.0,), 0.0)]),
    ]
    info = intrad_info(comps, (0.0,))
    # best functional approaches (1, 2)/sqrt(5); the sampled circle sits a
    # hair below the closed form sqrt(5)
    assert info.value == pytest.approx(2.236059932045637, rel=1e-12)
    assert info.value <= math.sqrt(5.0)
    assert info.evidence == "structural"


def test_intrad_respects_cone():
    comps = [_abs_sum(), MaxAffineFn([((0.0, 0.0), 0.0)])]
    # the dual of the upper half-plane is the ray (0, 1): all weight lands on
    # the flat component and no scalarization works
    half_plane = OrderCone(((1.0, -1.0, 0.0), (0.0, 0.0, 1.0)))
    info = intrad_info(comps, (0.0, 0.0), cone=half_plane)
    assert info.value == 0.0


def test_sms_convex_scalarization_holds():
    zero = MaxAffineFn([((0.0, 0.0), 0.0)])
    rep = sms_convex_scalarization([_abs_sum(), zero], (0.0, 0.0))
    assert rep.holds is True
    assert rep.bound == pytest.approx(1.0, abs=1e-12)
    assert rep.measured == pytest.approx(1.0, rel=1e-9)
    assert any("witness functional" in n for n in rep.notes)


def test_sms_convex_scalarization_not_applicable():
    # single affine piece: subdifferential is a point, intrad 0, criterion mute
    rep = sms_convex_scalarization([MaxAffineFn([((1.0,), 0.0)])], (0.0,))
    assert rep.holds is None
    assert math.isnan(rep.bound)
    assert any("no sampled dual functional" in n for n in rep.notes)


def test_frechet_scalarization_certifies_abs_pair():
    cert = sms_frechet_scalarization(SingleMap(expr="[abs(x1), x1]"), (0.0,))
    assert cert.verdict == "certified-numerically"
    assert cert.modulus == pytest.approx(1.0, rel=1e-9)
    assert cert.rate.extrapolated == pytest.approx(1.0, rel=1e-9)
    assert any("y* = (1.0, 0.0)" in n for n in cert.notes)


def test_frechet_scalarization_inconclusive_quadratic():
    cert = sms_frechet_scalarization(SingleMap(expr="x1*x1"), (0.0,))
    assert cert.verdict == "inconclusive"
    assert cert.modulus == math.inf


def test_frechet_scalarization_inconclusive_balanced():
    # every scalarization of (x, -x) descends in one direction
    cert = sms_frechet_scalarization(SingleMap(expr="[x1, -x1]"), (0.0,))
    assert cert.verdict == "inconclusive"
    assert abs(cert.rate.extrapolated) < 1e-9
