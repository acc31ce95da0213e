"""Certified modulus bounds: catalog instances, hypotheses, soundness."""

import math

import numpy as np
import pytest

from subreg.bounds import (
    SUITE_IDS,
    composition_bound,
    eps_approx_defect,
    fd_jacobian,
    perturbation_bound,
    prederivative_defect,
    sms_from_approx,
    sms_from_prederivative,
    smooth_kernel_check,
    soundness_suite,
)
from subreg.catalog import suite_catalog_instance
from subreg.mappings import Fan, FuncMap, LinearOp, PHMapping, SingleMap


# ---------------------------------------------------------------------------
# Hand-checkable catalog instances, one per suite


def test_catalog_composition_chain():
    rep = suite_catalog_instance("composition-chain")
    assert rep.holds is True
    # both factors linear: kappa_inner * kappa_outer = (1/2)(1/3)
    assert rep.bound == pytest.approx(1.0 / 6.0, rel=1e-9)
    assert rep.measured == pytest.approx(1.0 / 6.0, rel=1e-9)
    assert rep.hypotheses["continuous"]


def test_catalog_calm_perturbation():
    rep = suite_catalog_instance("calm-perturbation")
    assert rep.holds is True
    assert rep.bound == pytest.approx(0.5263157683739759, rel=1e-12)
    assert rep.measured == pytest.approx(0.47619253281605073, rel=1e-12)
    assert rep.hypotheses["kappa_times_clm"] < 1.0


def test_catalog_ph_approximation():
    rep = suite_catalog_instance("ph-approximation")
    assert rep.holds is True
    # eps = 0.2 against alpha0 = 1: bound 1/0.8
    assert rep.bound == pytest.approx(1.25, rel=1e-9)
    assert rep.measured == pytest.approx(1.25, rel=1e-6)
    assert any("converse check" in n for n in rep.notes)


def test_catalog_fan_prederivative():
    rep = suite_catalog_instance("fan-prederivative")
    assert rep.holds is True
    # the fan reproduces abs exactly: zero defect, alpha = 1
    assert rep.bound == pytest.approx(1.0, rel=1e-9)
    assert rep.measured == pytest.approx(1.0, rel=1e-9)
    assert rep.hypotheses["eps"] == pytest.approx(0.0, abs=1e-12)
    assert rep.hypotheses["defect_decays"]


def test_catalog_smooth_kernel():
    rep = suite_catalog_instance("smooth-kernel")
    assert rep.holds is True
    assert rep.bound == pytest.approx(1.0, rel=1e-6)
    assert rep.measured == pytest.approx(0.9999908596874458, rel=1e-9)
    assert rep.hypotheses["alpha_evidence"] == "structural"
    assert rep.hypotheses["fd_gap"] < 1e-4


def test_unknown_suite_id():
    with pytest.raises(ValueError, match="unknown suite id"):
        suite_catalog_instance("norm-duality")
    with pytest.raises(ValueError, match="unknown suite id"):
        soundness_suite("norm-duality", count=1)


# ---------------------------------------------------------------------------
# Hypothesis screens


def test_composition_flags_discontinuous_inner():
    g = SingleMap(expr="piecewise(x1 == 0, 0, 2)")
    outer = SingleMap(expr="piecewise(abs(x1) <= 1, abs(x1), 2 - abs(x1))")
    rep = composition_bound(g, outer, [0.0], [0.0])
    assert rep.holds is None
    assert math.isnan(rep.bound)
    assert any("continuity hypothesis fails" in n for n in rep.notes)


def test_perturbation_flags_large_product():
    rep = perturbation_bound(LinearOp([[1.0]]), SingleMap(expr="2*x1"), [0.0], [0.0])
    assert rep.holds is None
    assert rep.hypotheses["kappa_times_clm"] == pytest.approx(2.0, rel=1e-9)
    assert any("not < 1" in n for n in rep.notes)


def test_smooth_kernel_flags_kink():
    f = FuncMap(
        fn=lambda x: np.sign(x) * np.abs(x) ** 0.75,
        batch_fn=lambda xs: np.sign(xs) * np.abs(xs) ** 0.75,
        dim_in=1,
        dim_out=1,
    )
    rep = smooth_kernel_check(f, [0.0])
    assert rep.holds is None
    assert not rep.hypotheses["differentiable"]
    assert any("prederivative route" in n for n in rep.notes)


def test_smooth_kernel_flags_singular_jacobian():
    rep = smooth_kernel_check(SingleMap(expr="x1*x1"), [0.0])
    assert rep.holds is None
    assert not rep.hypotheses["kernel_trivial"]
    assert any("singular" in n for n in rep.notes)


def test_approx_assume_eps_only_lowers():
    f = SingleMap(expr="x1 + 0.2*abs(x1)")
    h = PHMapping(expr="x1")
    with pytest.raises(ValueError, match="lower"):
        sms_from_approx(f, h, [0.0], assume_eps=0.5)
    rep = sms_from_approx(f, h, [0.0], assume_eps=0.1)
    assert rep.hypotheses["eps"] == pytest.approx(0.1)
    assert any("eps assumed" in n for n in rep.notes)


def test_prederivative_delta_validation():
    fan = Fan(generators=[np.array([[1.0]])])
    with pytest.raises(ValueError, match="delta"):
        sms_from_prederivative(SingleMap(expr="x1"), fan, [0.0], 0.0)
    with pytest.raises(ValueError, match="delta"):
        prederivative_defect(SingleMap(expr="x1"), fan, [0.0], -1.0)


# ---------------------------------------------------------------------------
# Defect measurements


def test_eps_defect_zero_for_exact_model():
    assert eps_approx_defect(SingleMap(expr="3*x1"), PHMapping(expr="3*x1"), [0.0]) == 0.0


def test_eps_defect_linear_remainder():
    # remainder 0.2|x| has calmness exactly 0.2
    f = SingleMap(expr="x1 + 0.2*abs(x1)")
    assert eps_approx_defect(f, PHMapping(expr="x1"), [0.0]) == pytest.approx(0.2, rel=1e-9)


def test_eps_defect_quadratic_remainder_shrinks():
    # remainder 0.5 x^2: the measured defect tracks the tail-shell radius
    f = SingleMap(expr="x1 + 0.5*x1*x1")
    defect = eps_approx_defect(f, PHMapping(expr="x1"), [0.0])
    assert defect == pytest.approx(0.5 * 0.5 * 0.6**6, rel=1e-6)


def test_prederivative_defect_uniform_sup():
    # f = abs against the fan {1}: gap at x < 0 is 2|x|, so the sup rate is 2
    fan = Fan(generators=[np.array([[1.0]])])
    defect = prederivative_defect(SingleMap(expr="abs(x1)"), fan, [0.0], 0.5)
    assert defect == pytest.approx(2.0, rel=1e-9)


def test_fd_jacobian_matches_analytic():
    f = SingleMap(expr="[2*x1 + x2, x2*x2]")
    j = fd_jacobian(f, [0.3, -0.2])
    assert np.allclose(j, [[2.0, 1.0], [0.0, -0.4]], atol=1e-6)


# ---------------------------------------------------------------------------
# Randomized soundness (slices; the acceptance suite runs the full hundred)


@pytest.mark.parametrize("suite", SUITE_IDS)
def test_soundness_slice(suite):
    reports = soundness_suite(suite, count=8)
    for rep in reports:
        assert rep.hypothesis_ok
        assert rep.holds is True
        assert rep.measured <= rep.bound + 1e-6


def test_soundness_suite_deterministic():
    a = soundness_suite("composition-chain", count=3)
    b = soundness_suite("composition-chain", count=3)
    assert [r.to_json_dict() for r in a] == [r.to_json_dict() for r in b]
