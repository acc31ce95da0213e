"""Certificates: verdicts, moduli, refutation witnesses, companions."""

import math

import numpy as np
import pytest

from subreg.catalog import CLOSED_FORM_RATES, mapping_for
from subreg.certify import (
    DEFAULT_TAU,
    REFUTE_SHELLS,
    certify_sms,
    isolated_calmness_via_inverse,
    sharp_min_check,
)
from subreg.mappings import SingleMap


def test_gap_map_certified_with_zero_modulus():
    # image jumps from [0, 1/2) at the origin to [1, inf) elsewhere: the
    # displacement ratio blows up like 1/r, so SMS holds with modulus 0
    cert = certify_sms(mapping_for("ex-F1"), [0.0], [0.0])
    assert cert.verdict == "certified-numerically"
    assert cert.modulus == 0.0
    assert cert.rate.diverging
    assert cert.notes and "modulus reported as 0" in cert.notes[0]


def test_halfline_map_refuted_with_witnesses():
    cert = certify_sms(mapping_for("ex-F2"), [0.0], [0.0])
    assert cert.verdict == "refuted-with-witness"
    assert cert.modulus == math.inf
    assert len(cert.witnesses) == REFUTE_SHELLS
    assert [w.shell for w in cert.witnesses] == [7, 8, 9]
    expected_points = (-0.013996799999999997, -0.008398079999999997, -0.0050388479999999986)
    for w, x in zip(cert.witnesses, expected_points):
        assert w.point[0] == pytest.approx(x, abs=1e-15)
        assert w.ratio <= DEFAULT_TAU * 1e-2


def test_refutation_witnesses_replay():
    handle = mapping_for("ex-F2")
    cert = certify_sms(handle, [0.0], [0.0])
    for w in cert.witnesses:
        val = handle.dist_to_image([0.0], np.array(w.point))
        assert val / w.radius == pytest.approx(w.ratio, abs=1e-12)


@pytest.mark.parametrize("cf", CLOSED_FORM_RATES, ids=[c.name for c in CLOSED_FORM_RATES])
def test_modulus_rate_reciprocity(cf):
    cert = certify_sms(cf.handle, cf.xbar, cf.ybar)
    assert cert.verdict == "certified-numerically"
    assert not cert.rate.diverging
    assert 0.999 <= cert.modulus * cert.rate.extrapolated <= 1.001


def test_inconclusive_band():
    # rate 0.01 sits below tau but above the refutation cut
    cert = certify_sms(SingleMap(expr="0.01*abs(x1)"), [0.0], [0.0])
    assert cert.verdict == "inconclusive"
    assert cert.modulus == pytest.approx(100.0, rel=1e-9)


def test_quadratic_profile_not_refuted():
    # ratios shrink like r but never reach tau/100 on the sampled shells
    cert = certify_sms(SingleMap(expr="x1*x1"), [0.0], [0.0])
    assert cert.verdict == "inconclusive"
    assert cert.witnesses == ()


def test_tau_validation():
    with pytest.raises(ValueError, match="tau"):
        certify_sms(SingleMap(expr="abs(x1)"), [0.0], [0.0], tau=0.0)
    with pytest.raises(ValueError, match="tau"):
        sharp_min_check(SingleMap(expr="abs(x1)"), [0.0], tau=-1.0)


def test_isolated_calmness_relabels_sms():
    sms = certify_sms(SingleMap(expr="2*x1"), [0.0], [0.0])
    calm = isolated_calmness_via_inverse(SingleMap(expr="2*x1"), [0.0], [0.0])
    assert calm.property == "isolated-calmness"
    assert calm.criterion == "inverse-map-equivalence"
    assert calm.verdict == sms.verdict
    assert calm.modulus == sms.modulus


def test_sharp_min_abs():
    cert = sharp_min_check(SingleMap(expr="abs(x1)"), [0.0])
    assert cert.property == "sharp-minimum"
    assert cert.verdict == "certified-numerically"
    assert cert.modulus == pytest.approx(1.0, rel=1e-12)  # growth constant zeta
    assert cert.companion is not None
    assert cert.companion.property == "SMS"
    assert cert.companion.verdict == "certified-numerically"


def test_sharp_min_jump_function():
    # g = 0 at the origin and 2 elsewhere: descent ratios diverge, zeta is the
    # cumulative minimum at the tail cut
    from subreg.problem import parse_problem
    from subreg.catalog import document

    g = parse_problem(document("ex-comp-cont")).mappings["g"]
    cert = sharp_min_check(g, [0.0])
    assert cert.verdict == "certified-numerically"
    assert cert.modulus == pytest.approx(85.73388203017835, rel=1e-12)


def test_sharp_min_flat_quadratic():
    cert = sharp_min_check(SingleMap(expr="x1*x1"), [0.0])
    assert cert.verdict == "inconclusive"
