"""Verdicts built on rate estimates: subregularity certificates and calmness.

A certificate never claims proof.  "certified-numerically" records that the
sampled rate cleared the threshold tau; since sampled minima over-estimate
the liminf, certification is evidence, refutation (ratios collapsing to
~0 on the final shells, with replayable witness points) is much stronger,
and "inconclusive" is a first-class outcome for anything near the line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .mappings import EpigraphMap, MappingHandle
from .rates import DEFAULT_SCHEDULE, RateEstimate, SamplingSchedule, descent_rate, displacement_rate

__all__ = [
    "Certificate",
    "certify_sms",
    "isolated_calmness_via_inverse",
    "sharp_min_check",
    "DEFAULT_TAU",
    "REFUTE_SHELLS",
]

DEFAULT_TAU = 0.05
REFUTE_SHELLS = 3  # consecutive final shells required for a refutation


@dataclass
class Certificate:
    property: str  # "SMS" | "isolated-calmness" | "sharp-minimum"
    verdict: str  # "certified-numerically" | "refuted-with-witness" | "inconclusive"
    modulus: float  # extended real; for sharp minima this is the growth rate zeta
    rate: RateEstimate
    criterion: str
    threshold: float
    witnesses: tuple = ()
    evidence: str = "sampled"
    companion: Optional["Certificate"] = None
    notes: tuple = ()

    def to_json_dict(self) -> dict:
        out = {
            "property": self.property,
            "verdict": self.verdict,
            "modulus": self.modulus,
            "criterion": self.criterion,
            "threshold": self.threshold,
            "witnesses": [w.to_json_dict() for w in self.witnesses],
            "evidence": self.evidence,
            "rate": self.rate.to_json_dict(),
            "notes": list(self.notes),
        }
        if self.companion is not None:
            out["companion"] = self.companion.to_json_dict()
        return out


def _refutation_witnesses(est: RateEstimate, tau: float):
    """Witnesses iff the final REFUTE_SHELLS shell minima all sit at ~0."""
    k = est.schedule.shells if est.schedule else len(est.radii)
    cut = tau * 1e-2
    final = range(k - REFUTE_SHELLS, k)
    if not all(est.shell_min[j] <= cut for j in final):
        return None
    by_shell = {w.shell: w for w in est.witnesses}
    wits = [by_shell[j] for j in final if j in by_shell and by_shell[j].ratio <= cut]
    return tuple(wits) if len(wits) == REFUTE_SHELLS else None


def _verdict_from(est: RateEstimate, tau: float):
    wits = _refutation_witnesses(est, tau)
    if wits is not None:
        return "refuted-with-witness", math.inf, wits
    if est.extrapolated >= tau:
        modulus = 0.0 if est.diverging else 1.0 / est.extrapolated
        return "certified-numerically", modulus, ()
    if est.extrapolated > 0:
        return "inconclusive", 1.0 / est.extrapolated, ()
    return "inconclusive", math.inf, ()


def certify_sms(
    handle: MappingHandle,
    xbar,
    ybar,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    tau: float = DEFAULT_TAU,
    skip_eval_errors: bool = False,
) -> Certificate:
    """Certify, refute, or abstain on strong metric subregularity at (xbar, ybar).

    Certified when the extrapolated displacement rate clears tau; the modulus
    estimate is its reciprocal, or 0 when the per-shell minima diverge like
    1/r (detected by a log-log slope <= -0.9, reported on the estimate).
    Refuted when the final shells all carry ratios <= tau/100, with the
    witness points attached.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    est = displacement_rate(handle, xbar, ybar, schedule, skip_eval_errors)
    verdict, modulus, wits = _verdict_from(est, tau)
    notes = ()
    if est.diverging and verdict == "certified-numerically":
        notes = (f"shell minima diverge like r^{est.slope:.2f}; modulus reported as 0",)
    return Certificate(
        property="SMS",
        verdict=verdict,
        modulus=modulus,
        rate=est,
        criterion="displacement-rate",
        threshold=tau,
        witnesses=wits,
        notes=notes,
    )


def isolated_calmness_via_inverse(
    handle: MappingHandle,
    xbar,
    ybar,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    tau: float = DEFAULT_TAU,
    skip_eval_errors: bool = False,
) -> Certificate:
    """Isolated calmness of the inverse at (ybar, xbar), via subregularity.

    The verdict and modulus coincide with certify_sms of the forward map;
    only the property label and criterion change.
    """
    cert = certify_sms(handle, xbar, ybar, schedule, tau, skip_eval_errors)
    return replace(cert, property="isolated-calmness", criterion="inverse-map-equivalence")


def sharp_min_check(
    phi: MappingHandle,
    xbar,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    tau: float = DEFAULT_TAU,
    skip_eval_errors: bool = False,
) -> Certificate:
    """Local sharp-minimality of phi at xbar via the descent rate.

    Certified with growth constant zeta = extrapolated rate when it clears
    tau.  Also carries a companion SMS certificate for the epigraphical
    profile x -> [phi(x), +inf) at (xbar, phi(xbar)).
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    est = descent_rate(phi, xbar, schedule, skip_eval_errors)
    verdict, _, wits = _verdict_from(est, tau)
    zeta = est.extrapolated
    epi = certify_sms(EpigraphMap(phi=phi), xbar, phi.value(np.atleast_1d(np.asarray(xbar, float))), schedule, tau, skip_eval_errors)
    return Certificate(
        property="sharp-minimum",
        verdict=verdict,
        modulus=zeta,
        rate=est,
        criterion="descent-rate",
        threshold=tau,
        witnesses=wits,
        companion=epi,
    )
