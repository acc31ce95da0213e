"""Mapping handles, alpha/beta constants, and batch-vs-scalar agreement."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subreg.expr import parse_condition
from subreg.mappings import (
    CompositionMap,
    EpigraphMap,
    Fan,
    LinearOp,
    NormalConeBox,
    PHMapping,
    SetValuedMap,
    SingleMap,
    SumMap,
    alpha0_ph_info,
    alpha_fan_info,
    alpha_linear,
    alpha_linear_info,
    beta_linear,
    image,
)
from subreg.spaces import (
    BoxSet,
    EmptySet,
    FinitePoints,
    Norm,
    dist_point_set,
    parse_set,
    rng_from,
)


# ---------------------------------------------------------------------------
# Linear operators


def test_linear_op_basics():
    op = LinearOp([[2.0, 0.0], [0.0, 3.0]])
    assert (op.dim_in, op.dim_out) == (2, 2)
    assert np.allclose(op.value([1.0, 1.0]), [2.0, 3.0])
    assert np.allclose(op.value_batch(np.array([[1.0, 0.0], [0.0, 1.0]])), [[2.0, 0.0], [0.0, 3.0]])
    img = op.image([1.0, -1.0])
    assert isinstance(img, FinitePoints)
    assert img.points == ((2.0, -3.0),)
    assert op.single_valued


def test_transpose_dual_swaps_norms():
    op = LinearOp([[1.0, 2.0]], norm_in=Norm("l1"), norm_out=Norm("linf"))
    t = op.transpose_dual()
    assert np.allclose(t.matrix, [[1.0], [2.0]])
    assert t.norm_in.tag == "l1"  # dual of linf
    assert t.norm_out.tag == "linf"  # dual of l1


def test_alpha_linear_structural_diagonal():
    info = alpha_linear_info(LinearOp([[2.0, 0.0], [0.0, 3.0]]))
    assert info.evidence == "structural"
    assert info.value == pytest.approx(2.0, abs=1e-12)


def test_alpha_linear_structural_matches_svd_5x5():
    rng = rng_from(31)
    a = rng.normal(size=(5, 5))
    info = alpha_linear_info(LinearOp(a))
    assert info.evidence == "structural"
    assert info.value == pytest.approx(np.linalg.svd(a, compute_uv=False)[-1], abs=1e-8)


def test_alpha_identity_l1_to_linf():
    # closed form: inf over the l1 sphere of |u|_inf is 1/n
    for n in (2, 5, 10):
        op = LinearOp(np.eye(n), norm_in=Norm("l1"), norm_out=Norm("linf"))
        info = alpha_linear_info(op)
        assert info.evidence == "sampled"
        assert info.value == pytest.approx(1.0 / n, rel=0.05)
        # sampled estimates are achieved values, hence never below the true inf
        assert info.value >= 1.0 / n - 1e-12


@given(st.integers(min_value=1, max_value=3), st.integers(min_value=0, max_value=2_000))
@settings(max_examples=25, deadline=None)
def test_alpha_sampled_upper_bounds_exact(dim, key):
    rng = rng_from(32, dim, key)
    a = rng.normal(size=(dim, dim))
    exact = float(np.linalg.svd(a, compute_uv=False)[-1])
    info = alpha_linear_info(LinearOp(a), count=4000, structural_dim_cap=0)
    assert info.evidence == "sampled"
    assert info.value >= exact - 1e-9
    assert info.value <= exact * 1.05 + 1e-9


def test_beta_linear_diagonal():
    # invertible under plain l2: beta coincides with the smallest singular value
    assert beta_linear(LinearOp([[2.0, 0.0], [0.0, 3.0]])) == pytest.approx(2.0, abs=1e-12)
    assert alpha_linear(LinearOp([[3.0]])) == pytest.approx(3.0, abs=1e-12)


def test_beta_linear_wide_vs_tall():
    # surjective wide operator has beta > 0 while alpha = 0
    wide = LinearOp([[1.0, 0.0]])
    assert alpha_linear(wide) == pytest.approx(0.0, abs=1e-12)
    assert beta_linear(wide) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# Positively homogeneous maps and fans


def test_ph_validation_accepts_abs():
    h = PHMapping(expr="abs(x1)")
    assert h.dim_in == 1
    assert np.allclose(h.value([-2.0]), [2.0])


def test_ph_validation_rejects_offset():
    with pytest.raises(ValueError, match="h\\(0\\)"):
        PHMapping(expr="x1 + 1")


def test_ph_validation_rejects_quadratic():
    with pytest.raises(ValueError, match="homogeneous"):
        PHMapping(expr="x1*x1")


def test_alpha0_ph_one_dim():
    info = alpha0_ph_info(PHMapping(expr="abs(x1)"))
    assert info.value == pytest.approx(1.0, abs=1e-12)
    info2 = alpha0_ph_info(PHMapping(expr="2*x1"))
    assert info2.value == pytest.approx(2.0, abs=1e-12)


def test_alpha0_ph_two_dim_norm():
    # h(u) = |u|_2 has |h(u)| = 1 on the whole unit sphere
    info = alpha0_ph_info(PHMapping(expr="norm2([x1, x2])"))
    assert info.value == pytest.approx(1.0, rel=1e-6)


def test_fan_images_and_dist():
    fan = Fan(generators=[np.array([[1.0]]), np.array([[-1.0]])])
    img = fan.image([0.5])
    assert isinstance(img, FinitePoints)
    assert set(img.points) == {(0.5,), (-0.5,)}
    assert fan.dist_zero([1.0]) == pytest.approx(1.0)
    assert np.allclose(fan.dist_zero_batch(np.array([[1.0, -2.0]])), [1.0, 2.0])


def test_fan_alpha_finite_vs_hull():
    gens = [np.array([[1.0]]), np.array([[-1.0]])]
    finite = alpha_fan_info(Fan(generators=gens))
    assert finite.value == pytest.approx(1.0, abs=1e-12)
    # the convex hull of {u, -u} contains 0, so the hull fan has alpha 0
    hull = alpha_fan_info(Fan(generators=gens, hull="convex-hull"))
    assert hull.value == pytest.approx(0.0, abs=1e-9)


def test_fan_single_generator_structural():
    fan = Fan(generators=[np.array([[2.0, 0.0], [0.0, 3.0]])])
    info = alpha_fan_info(fan)
    assert info.evidence == "structural"
    assert info.value == pytest.approx(2.0, abs=1e-12)


def test_fan_rejects_mixed_shapes():
    with pytest.raises(ValueError, match="mixed shape"):
        Fan(generators=[np.eye(2), np.array([[1.0]])])
    with pytest.raises(ValueError, match="at least one"):
        Fan(generators=[])
    with pytest.raises(ValueError, match="hull"):
        Fan(generators=[np.eye(1)], hull="affine")


# ---------------------------------------------------------------------------
# Set-valued clause tables


def _gap_map():
    return SetValuedMap(
        clauses=(
            (parse_condition("x1 == 0"), parse_set("interval(0, 0.5)")),
            (None, parse_set("interval(1, inf)")),
        ),
        dim_in=1,
        dim_out=1,
    )


def test_setvalued_clause_dispatch():
    f = _gap_map()
    assert not f.single_valued
    assert f.dist_to_image([0.75], [0.0]) == pytest.approx(0.25)
    assert f.dist_to_image([0.75], [0.3]) == pytest.approx(0.25)
    assert f.dist_to_image([0.25], [0.0]) == pytest.approx(0.0)


def test_setvalued_empty_when_no_clause_matches():
    f = SetValuedMap(
        clauses=((parse_condition("x1 > 0"), parse_set("point(1)")),),
        dim_in=1,
        dim_out=1,
    )
    assert isinstance(f.image([-1.0]), EmptySet)
    assert f.dist_to_image([0.0], [-1.0]) == np.inf


def test_setvalued_batch_matches_scalar():
    f = SetValuedMap(
        clauses=(
            (parse_condition("x1 <= 0"), parse_set("interval(x1, 1)")),
            (None, parse_set("points([0], [x1 + 2])")),
        ),
        dim_in=1,
        dim_out=1,
    )
    rng = rng_from(33)
    xs = rng.uniform(-2.0, 2.0, size=(1, 40))
    batch = f.dist_to_image_batch([0.4], xs)
    scalar = [f.dist_to_image([0.4], xs[:, j]) for j in range(xs.shape[1])]
    assert np.allclose(batch, scalar, atol=1e-12)


def test_setvalued_var_y_batch():
    f = _gap_map()
    xs = np.array([[0.0, 0.5, 0.0]])
    ys = np.array([[0.75, 0.75, 0.25]])
    out = f.dist_var_y_batch(ys, xs)
    assert np.allclose(out, [0.25, 0.25, 0.0], atol=1e-12)


# ---------------------------------------------------------------------------
# Normal cone of a box


def test_normal_cone_halfline_cases():
    t = NormalConeBox([0.0], [np.inf])
    assert t.image([0.5]) == BoxSet((0.0,), (0.0,))
    assert t.image([0.0]) == BoxSet((-np.inf,), (0.0,))
    assert isinstance(t.image([-1.0]), EmptySet)
    assert t.dist_to_image([1.0], [0.0]) == pytest.approx(1.0)
    assert t.dist_to_image([-3.0], [0.0]) == pytest.approx(0.0)
    assert t.dist_to_image([0.0], [-1.0]) == np.inf


def test_normal_cone_two_sided_box():
    t = NormalConeBox([0.0, 0.0], [1.0, 0.0])
    # first coordinate interior, second degenerate (full line)
    img = t.image([0.5, 0.0])
    assert img == BoxSet((0.0, -np.inf), (0.0, np.inf))
    assert t.dist_to_image([0.3, 9.0], [0.5, 0.0]) == pytest.approx(0.3)
    # upper facet of the first coordinate
    assert t.image([1.0, 0.0]) == BoxSet((0.0, -np.inf), (np.inf, np.inf))


def test_normal_cone_batch_matches_scalar():
    t = NormalConeBox([0.0, -1.0], [1.0, 1.0])
    rng = rng_from(34)
    xs = rng.uniform(-1.5, 1.5, size=(2, 60))
    y = [0.7, -0.4]
    batch = t.dist_to_image_batch(y, xs)
    scalar = [t.dist_to_image(y, xs[:, j]) for j in range(xs.shape[1])]
    assert np.allclose(batch, scalar, atol=1e-12)


# ---------------------------------------------------------------------------
# Composition, sum, epigraph


def test_composition_constant_collapse():
    g = SingleMap(expr="piecewise(x1 == 0, 0, 2)")
    f = SingleMap(expr="piecewise(abs(x1) <= 1, abs(x1), 2 - abs(x1))")
    comp = CompositionMap(inner=g, outer=f)
    for x in (-1.0, 0.0, 0.3, 2.0):
        assert comp.value([x]) == pytest.approx(0.0)
    assert comp.single_valued
    assert np.allclose(comp.value_batch(np.array([[-1.0, 0.0, 2.0]])), 0.0)


def test_composition_requires_single_valued_inner():
    with pytest.raises(ValueError, match="single-valued"):
        CompositionMap(inner=_gap_map(), outer=SingleMap(expr="x1"))


def test_composition_dimension_chain():
    with pytest.raises(ValueError, match="chain"):
        CompositionMap(inner=SingleMap(expr="[x1, x1]"), outer=SingleMap(expr="x1"))


def test_sum_map_translates_images():
    base = _gap_map()
    shift = SingleMap(expr="x1")
    s = SumMap(base=base, shift=shift)
    # at x = 0.3 the base image is [1, inf) and the shift adds 0.3
    assert s.dist_to_image([1.0], [0.3]) == pytest.approx(0.3)
    assert dist_point_set(np.array([2.0]), s.image([0.3])) == pytest.approx(0.0)
    xs = np.array([[0.3, 0.0, -0.5]])
    batch = s.dist_to_image_batch([1.0], xs)
    scalar = [s.dist_to_image([1.0], xs[:, j]) for j in range(3)]
    assert np.allclose(batch, scalar, atol=1e-12)


def test_sum_map_rejects_set_valued_shift():
    with pytest.raises(ValueError, match="single-valued"):
        SumMap(base=SingleMap(expr="x1"), shift=_gap_map())


def test_epigraph_map_distances():
    epi = EpigraphMap(phi=SingleMap(expr="abs(x1)"))
    assert epi.dist_to_image([0.0], [2.0]) == pytest.approx(2.0)
    assert epi.dist_to_image([3.0], [2.0]) == pytest.approx(0.0)
    xs = np.array([[2.0, -1.0, 0.0]])
    assert np.allclose(epi.dist_to_image_batch([0.5], xs), [1.5, 0.5, 0.0])


def test_image_helper_delegates():
    op = LinearOp([[2.0]])
    assert image(op, [1.0]) == op.image([1.0])


def test_single_map_dim_mismatch():
    with pytest.raises(ValueError, match="dim_in"):
        SingleMap(expr="x3", dim_in=2)
