"""Generalized equations: residuals, solution tracing, calmness bounds."""

import math

import numpy as np
import pytest

from subreg.convexity import MaxAffineFn
from subreg.geneq import (
    GenEqProblem,
    ageq_handle,
    convex_scalarized_geneq_bound,
    isolated_calmness_bound,
    param_grid,
    partial_prederivative_defect,
    residual,
    single_valued_field_bound,
    trace_solution_map,
)
from subreg.mappings import Fan, NormalConeBox, SingleMap
from subreg.spaces import rng_from


def _complementarity():
    # 0 in x - p + N_[0,inf)(x); solutions x = max(p, 0)
    return GenEqProblem(
        base=SingleMap(expr="x2 - x1", dim_in=2),
        field_map=NormalConeBox([0.0], [np.inf]),
        param_dim=1,
        pbar=(0.0,),
        xbar=(0.0,),
    )


def _sv_field():
    # 0 = 2x - p + 0.5 sin x
    return GenEqProblem(
        base=SingleMap(expr="2*x2 - x1", dim_in=2),
        field_map=SingleMap(expr="0.5*sin(x1)", dim_in=1),
        param_dim=1,
        pbar=(0.0,),
        xbar=(0.0,),
    )


def _scalarized():
    # 0 in (|x| - p, 0) + (0.4 x, 0)
    comps = [MaxAffineFn([((1.0,), 0.0), ((-1.0,), 0.0)]), MaxAffineFn([((0.0,), 0.0)])]
    return GenEqProblem(
        base=SingleMap(expr="[abs(x2) - x1, 0]", dim_in=2),
        field_map=SingleMap(expr="[0.4*x1, 0]", dim_in=1),
        param_dim=1,
        pbar=(0.0,),
        xbar=(0.0,),
        base_components=comps,
    )


# ---------------------------------------------------------------------------
# Problem plumbing


def test_problem_validation():
    with pytest.raises(ValueError, match="stacked"):
        GenEqProblem(base=SingleMap(expr="x1", dim_in=1),
                     field_map=SingleMap(expr="x1", dim_in=1), param_dim=1)
    with pytest.raises(ValueError, match="target dimensions"):
        GenEqProblem(base=SingleMap(expr="[x2, x2]", dim_in=2),
                     field_map=SingleMap(expr="x1", dim_in=1), param_dim=1)
    with pytest.raises(ValueError, match="positive"):
        GenEqProblem(base=SingleMap(expr="x2 - x1", dim_in=2),
                     field_map=SingleMap(expr="x1", dim_in=1), param_dim=1, delta=0.0)
    with pytest.raises(ValueError, match="does not solve"):
        GenEqProblem(base=SingleMap(expr="x2 - x1 + 1", dim_in=2),
                     field_map=SingleMap(expr="0", dim_in=1), param_dim=1)


def test_residual_signs():
    prob = _complementarity()
    # p enters through the first slot: f(p, x) = x - p
    assert residual(prob, (-1.0,), (0.0,)) == pytest.approx(0.0, abs=1e-15)
    assert residual(prob, (1.0,), (0.0,)) == pytest.approx(1.0, abs=1e-15)
    for p in (-0.2, 0.0, 0.1, 0.25):
        assert residual(prob, (p,), (max(p, 0.0),)) <= 1e-12


def test_param_grid_excludes_anchor():
    prob = _complementarity()
    grid = param_grid(prob)
    assert grid.shape == (32, 1)
    assert np.all(np.abs(grid) > 1e-15)
    assert np.max(np.abs(grid)) <= prob.zeta + 1e-12


def test_trace_solution_map_complementarity():
    prob = _complementarity()
    samples = trace_solution_map(prob)
    assert len(samples) == 32
    for sample in samples:
        p = sample.p[0]
        assert len(sample.points) == 1
        assert sample.points[0][0] == pytest.approx(max(p, 0.0), abs=1e-9)
        for pt, r in zip(sample.points, sample.residuals):
            assert r <= 1e-7
            assert residual(prob, sample.p, pt) == pytest.approx(r, abs=1e-12)


def test_trace_dimension_cap():
    prob = GenEqProblem(
        base=SingleMap(expr="[x2, x3, x4, x5]", dim_in=5),
        field_map=SingleMap(expr="[x1, x2, x3, x4]", dim_in=4),
        param_dim=1,
        pbar=(0.0,),
        xbar=(0.0, 0.0, 0.0, 0.0),
    )
    with pytest.raises(ValueError, match="dimension <= 3"):
        trace_solution_map(prob)


def test_ageq_handle_complementarity():
    h = ageq_handle(_complementarity())
    # x + N_[0,inf)(x): distance to 0 is x on the positive axis, 0 at the
    # origin, inf outside the box
    assert h.dist_to_image([0.0], [0.2]) == pytest.approx(0.2)
    assert h.dist_to_image([0.0], [0.0]) == pytest.approx(0.0)
    assert h.dist_to_image([0.0], [-0.1]) == np.inf
    xs = np.array([[0.2, 0.0, -0.1]])
    assert np.allclose(h.dist_to_image_batch([0.0], xs), [0.2, 0.0, np.inf])


def test_partial_defect_linear_base():
    assert partial_prederivative_defect(_complementarity()) <= 1e-12


# ---------------------------------------------------------------------------
# Catalog instances with hand-checkable bounds


def test_complementarity_bound_equality_case():
    rep = isolated_calmness_bound(_complementarity())
    assert rep.holds is True
    assert rep.bound == pytest.approx(1.0, rel=1e-12)
    assert rep.measured == pytest.approx(1.0, rel=1e-12)
    assert rep.measured <= rep.bound + 1e-6
    assert rep.hypotheses["kappa"] == pytest.approx(1.0, rel=1e-12)
    assert rep.hypotheses["eps"] <= 1e-12
    assert rep.hypotheses["defect_decays"] is True
    assert rep.hypotheses["limiting_bound"] == pytest.approx(1.0, rel=1e-12)


def test_sv_field_bound():
    rep = single_valued_field_bound(_sv_field())
    assert rep.holds is True
    assert rep.bound == pytest.approx(0.6666663281338083, rel=1e-12)
    assert rep.measured == pytest.approx(0.400133400015841, rel=1e-12)
    assert rep.hypotheses["alpha"] == pytest.approx(2.0, abs=1e-12)
    assert rep.hypotheses["alpha_evidence"] == "structural"
    assert rep.hypotheses["clm_field"] == pytest.approx(0.4999992383006731, rel=1e-12)
    assert rep.hypotheses["margin"] == pytest.approx(1.500000761699318, rel=1e-12)


def test_scalarized_bound():
    rep = convex_scalarized_geneq_bound(_scalarized())
    assert rep.holds is True
    assert rep.bound == pytest.approx(1.6666666666667245, rel=1e-12)
    assert rep.measured == pytest.approx(1.6666666666668315, rel=1e-12)
    assert rep.hypotheses["intrad"] == pytest.approx(1.0, abs=1e-12)
    assert rep.hypotheses["intrad_evidence"] == "structural"
    assert rep.hypotheses["ystar"] == (1.0, 0.0)
    assert rep.hypotheses["ratio"] == pytest.approx(0.4, rel=1e-6)


def test_sv_field_bound_rejects_set_valued():
    with pytest.raises(ValueError, match="single-valued"):
        single_valued_field_bound(_complementarity())


def test_scalarized_requires_components():
    with pytest.raises(ValueError, match="components"):
        convex_scalarized_geneq_bound(_sv_field())


# ---------------------------------------------------------------------------
# Randomized hypothesis-satisfying families

GRID9 = np.linspace(-0.25, 0.25, 9)[:, None]
GRID9 = GRID9[np.abs(GRID9[:, 0]) > 1e-15]


def _fam_isolated(rng):
    a = rng.uniform(0.7, 2.0)
    b = rng.uniform(0.3, 1.5)
    c = rng.uniform(0.05, 0.3) * a / 0.5 * 0.25  # eps = c*delta <= 0.15 a
    use_cone = rng.uniform() < 0.5
    T = NormalConeBox([0.0], [np.inf]) if use_cone else SingleMap(expr="0", dim_in=1)
    base = SingleMap(expr=f"{a}*x2 - {b}*x1 + {c}*x2*abs(x2)", dim_in=2)
    return GenEqProblem(base=base, field_map=T, param_dim=1, pbar=(0.0,), xbar=(0.0,),
                        fan=Fan(generators=[a * np.eye(1)]), delta=0.5, zeta=0.25)


def _fam_sv(rng):
    a = rng.uniform(0.7, 2.0)
    b = rng.uniform(0.3, 1.5)
    t = rng.uniform(0.05, 0.3) * a
    c = rng.uniform(0.05, 0.3) * (a - t) / 0.5 * 0.25
    base = SingleMap(expr=f"{a}*x2 - {b}*x1 + {c}*x2*abs(x2)", dim_in=2)
    return GenEqProblem(base=base, field_map=SingleMap(expr=f"{t}*sin(x1)", dim_in=1),
                        param_dim=1, pbar=(0.0,), xbar=(0.0,),
                        fan=Fan(generators=[a * np.eye(1)]), delta=0.5, zeta=0.25)


def _fam_scal(rng):
    w = rng.uniform(0.5, 1.5)
    b = rng.uniform(0.3, 1.5)
    t = rng.uniform(0.0, 0.4) * w
    base = SingleMap(expr=f"[{w}*abs(x2) - {b}*x1, 0]", dim_in=2)
    comps = [MaxAffineFn([((w,), 0.0), ((-w,), 0.0)]), MaxAffineFn([((0.0,), 0.0)])]
    return GenEqProblem(base=base, field_map=SingleMap(expr=f"[{t}*x1, 0]", dim_in=1),
                        param_dim=1, pbar=(0.0,), xbar=(0.0,),
                        base_components=comps, delta=0.5, zeta=0.25)


@pytest.mark.parametrize("key", range(15))
def test_family_isolated_calmness_sound(key):
    rep = isolated_calmness_bound(_fam_isolated(rng_from(61, key)), p_grid=GRID9)
    assert rep.hypothesis_ok
    assert rep.holds is True
    assert rep.measured <= rep.bound + 1e-6


@pytest.mark.parametrize("key", range(15))
def test_family_single_valued_field_sound(key):
    rep = single_valued_field_bound(_fam_sv(rng_from(62, key)), p_grid=GRID9)
    assert rep.hypothesis_ok
    assert rep.holds is True
    assert rep.measured <= rep.bound + 1e-6


@pytest.mark.parametrize("key", range(15))
def test_family_scalarized_sound(key):
    rep = convex_scalarized_geneq_bound(_fam_scal(rng_from(63, key)), p_grid=GRID9)
    assert rep.hypothesis_ok
    assert rep.holds is True
    assert rep.measured <= rep.bound + 1e-6
