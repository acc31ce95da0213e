"""Certified modulus bounds: composition, perturbation, approximation, fans.

Each operation packages three things into a BoundReport: the hypothesis
quantities (measured, never user-asserted, except for an explicit downward
eps override that is marked in the notes), the certified bound those
quantities imply, and an independently measured modulus of the target map.
The holds flag is True exactly when the hypotheses were met and
measured <= bound + 1e-6.

All moduli and defects feeding one report are sampled on the same shell
schedule, hence on identical point sets.  That alignment is what makes the
randomized suites airtight: for sums, min(A+B) >= min A - max B over a
shared finite sample set, so the perturbation bound can not be undercut by
sampling noise, and the approximation/fan suites use instances whose alpha
is attained identically under every sampler (isotropic margin generators,
axis-aligned minima).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .certify import DEFAULT_TAU, Certificate, certify_sms
from .linalg import min_norm_point
from .mappings import (
    AlphaEstimate,
    CompositionMap,
    Fan,
    FuncMap,
    LinearOp,
    MappingHandle,
    SingleMap,
    SumMap,
    alpha0_ph_info,
    alpha_fan_info,
    alpha_linear_info,
)
from .rates import DEFAULT_SCHEDULE, RateEstimate, SamplingSchedule, calmness_modulus_sv
from .spaces import rng_from

__all__ = [
    "BoundReport",
    "HOLD_SLACK",
    "composition_bound",
    "perturbation_bound",
    "eps_approx_defect",
    "sms_from_approx",
    "prederivative_defect",
    "sms_from_prederivative",
    "fd_jacobian",
    "smooth_kernel_check",
    "soundness_suite",
    "SUITE_IDS",
]

HOLD_SLACK = 1e-6
_CONTINUITY_TOL = 0.05

SUITE_IDS = (
    "composition-chain",
    "calm-perturbation",
    "ph-approximation",
    "fan-prederivative",
    "smooth-kernel",
)


@dataclass
class BoundReport:
    theorem: str
    hypotheses: dict
    hypothesis_ok: bool
    bound: float
    measured: float
    holds: Optional[bool]  # None = not applicable (hypotheses unmet)
    notes: tuple = ()
    evidence: str = "sampled"
    certificates: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.bound - self.measured

    def to_json_dict(self, include_certificates: bool = True) -> dict:
        out = {
            "theorem": self.theorem,
            "hypotheses": dict(self.hypotheses),
            "hypothesis_ok": self.hypothesis_ok,
            "bound": self.bound,
            "measured": self.measured,
            "slack": self.slack,
            "holds": "not-applicable" if self.holds is None else self.holds,
            "notes": list(self.notes),
            "evidence": self.evidence,
        }
        if include_certificates:
            out["certificates"] = {k: c.to_json_dict() for k, c in self.certificates.items()}
        return out


def _finish(report: BoundReport) -> BoundReport:
    if report.hypothesis_ok:
        report.holds = bool(report.measured <= report.bound + HOLD_SLACK)
    else:
        report.holds = None
    return report


def _modulus(cert: Certificate) -> float:
    if cert.verdict == "refuted-with-witness":
        return math.inf
    return cert.modulus


def composition_bound(
    g: MappingHandle,
    outer: MappingHandle,
    zbar,
    ybar,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    tau: float = DEFAULT_TAU,
) -> BoundReport:
    """Chain rule for subregularity: subreg(F o g) <= subreg(g) * subreg(F).

    Needs g continuous at zbar (checked by the sampled oscillation of g on
    the final shell) and both factors certified.  A refuted factor or a
    failed continuity check yields a not-applicable report, with the
    composite still measured for reference.
    """
    zbar = np.atleast_1d(np.asarray(zbar, dtype=float))
    mid = np.atleast_1d(g.value(zbar))
    cert_g = certify_sms(g, zbar, mid, schedule, tau)
    cert_f = certify_sms(outer, mid, ybar, schedule, tau)
    composite = CompositionMap(inner=g, outer=outer)
    cert_c = certify_sms(composite, zbar, ybar, schedule, tau)

    # continuity of g at zbar: the per-shell sup of |g(x) - g(zbar)| must
    # shrink with the shells; a jump keeps it pinned at the jump height
    osc = calmness_modulus_sv(g, zbar, schedule)
    osc_first = osc.shell_max[0] * osc.radii[0]
    oscillation = osc.shell_max[-1] * osc.radii[-1]
    continuous = oscillation <= _CONTINUITY_TOL * osc_first + 1e-9

    kappa_g = _modulus(cert_g)
    kappa_f = _modulus(cert_f)
    hyp_ok = continuous and cert_g.verdict == "certified-numerically" and cert_f.verdict == "certified-numerically"
    bound = kappa_g * kappa_f if hyp_ok else math.nan
    notes = []
    if not continuous:
        notes.append(f"inner map oscillation {oscillation:.3g} on the final shell; continuity hypothesis fails")
    for label, cert in (("inner", cert_g), ("outer", cert_f)):
        if cert.verdict != "certified-numerically":
            notes.append(f"{label} factor {cert.verdict}")
    return _finish(
        BoundReport(
            theorem="composition-chain",
            hypotheses={
                "kappa_inner": kappa_g,
                "kappa_outer": kappa_f,
                "continuity_oscillation": oscillation,
                "continuous": continuous,
            },
            hypothesis_ok=hyp_ok,
            bound=bound,
            measured=_modulus(cert_c),
            holds=None,
            notes=tuple(notes),
            certificates={"inner": cert_g, "outer": cert_f, "composite": cert_c},
        )
    )


def perturbation_bound(
    base: MappingHandle,
    g: MappingHandle,
    xbar,
    ybar,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    tau: float = DEFAULT_TAU,
) -> BoundReport:
    """Additive calm perturbation: subreg(F+g) <= kappa / (1 - kappa*clm(g)).

    kappa is the measured modulus of F at (xbar, ybar) and clm(g) the sampled
    calmness modulus of g at xbar; the perturbed map is measured at the
    shifted anchor (xbar, ybar + g(xbar)).  Requires kappa*clm < 1.
    """
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    cert_f = certify_sms(base, xbar, ybar, schedule, tau)
    clm_est = calmness_modulus_sv(g, xbar, schedule)
    kappa = _modulus(cert_f)
    clm = clm_est.extrapolated
    product = kappa * clm
    hyp_ok = cert_f.verdict != "refuted-with-witness" and math.isfinite(kappa) and product < 1.0

    shifted = np.atleast_1d(np.asarray(ybar, dtype=float)) + g.value(xbar)
    perturbed = SumMap(base=base, shift=g)
    cert_p = certify_sms(perturbed, xbar, shifted, schedule, tau)

    bound = kappa / (1.0 - product) if hyp_ok else math.nan
    notes = []
    if not hyp_ok:
        notes.append(f"kappa*clm = {product:.3g} not < 1; bound undefined")
    return _finish(
        BoundReport(
            theorem="calm-perturbation",
            hypotheses={"kappa": kappa, "clm": clm, "kappa_times_clm": product},
            hypothesis_ok=hyp_ok,
            bound=bound,
            measured=_modulus(cert_p),
            holds=None,
            notes=tuple(notes),
            certificates={"base": cert_f, "perturbed": cert_p},
        )
    )


def _remainder_map(f: MappingHandle, h: MappingHandle, xbar: np.ndarray) -> FuncMap:
    fx0 = np.atleast_1d(f.value(xbar))

    def one(x):
        return np.atleast_1d(f.value(x)) - fx0 - np.atleast_1d(h.value(np.asarray(x, float) - xbar))

    def batch(xs):
        return f.value_batch(xs) - fx0[:, None] - h.value_batch(xs - xbar[:, None])

    return FuncMap(
        fn=one,
        batch_fn=batch,
        dim_in=f.dim_in,
        dim_out=f.dim_out,
        norm_in=f.norm_in,
        norm_out=f.norm_out,
    )


def eps_approx_defect(
    f: MappingHandle,
    h: MappingHandle,
    xbar,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
) -> float:
    """Calmness modulus of the remainder x -> f(x) - f(xbar) - h(x - xbar).

    The smallest admissible eps (up to sampling) for h as a first-order
    approximation of f at xbar.
    """
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    rem = _remainder_map(f, h, xbar)
    return calmness_modulus_sv(rem, xbar, schedule).extrapolated


def sms_from_approx(
    f: MappingHandle,
    h: MappingHandle,
    xbar,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    tau: float = DEFAULT_TAU,
    assume_eps: Optional[float] = None,
    alpha_count: int = 10_000,
) -> BoundReport:
    """Subregularity via a positively homogeneous approximation.

    bound = 1 / (alpha0(h) - eps) whenever alpha0(h) > eps, with eps the
    measured remainder calmness.  When the target is itself certified, the
    reverse inequality alpha0(h) >= 1 / (subreg(f) - eps) is checked as
    printed and flagged if numerically vacuous (subreg(f) <= eps).
    """
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    measured_eps = eps_approx_defect(f, h, xbar, schedule)
    eps = measured_eps
    notes = []
    if assume_eps is not None:
        if assume_eps > measured_eps + 1e-9:
            raise ValueError("assume-eps may only lower the measured defect")
        eps = float(assume_eps)
        notes.append(f"eps assumed {eps:.6g} by caller (measured defect {measured_eps:.6g})")
    alpha = alpha0_ph_info(h, count=alpha_count, seed=schedule.seed)
    cert_f = certify_sms(f, xbar, f.value(xbar), schedule, tau)
    measured = _modulus(cert_f)
    hyp_ok = alpha.value > eps
    bound = 1.0 / (alpha.value - eps) if hyp_ok else math.nan
    if not hyp_ok:
        notes.append(f"alpha0 = {alpha.value:.6g} <= eps = {eps:.6g}; bound undefined")
    if cert_f.verdict == "certified-numerically":
        subreg_f = measured
        if subreg_f > eps:
            converse = alpha.value >= 1.0 / (subreg_f - eps) - 1e-9
            notes.append(f"converse check alpha0 >= 1/(subreg - eps): {'holds' if converse else 'fails'}")
        else:
            notes.append("converse check vacuous: subreg(f) <= eps")
    return _finish(
        BoundReport(
            theorem="ph-approximation",
            hypotheses={"alpha0": alpha.value, "eps": eps, "alpha0_evidence": alpha.evidence},
            hypothesis_ok=hyp_ok,
            bound=bound,
            measured=measured,
            holds=None,
            notes=tuple(notes),
            certificates={"target": cert_f},
        )
    )


def _fan_gap_map(f: MappingHandle, fan: Fan, xbar: np.ndarray) -> FuncMap:
    """Scalar map x -> dist(f(x) - f(xbar), fan(x - xbar))."""
    fx0 = np.atleast_1d(f.value(xbar))

    def one(x):
        v = np.asarray(x, dtype=float) - xbar
        w = np.atleast_1d(f.value(x)) - fx0
        if fan.hull == "finite-set":
            return min(fan.norm_out.value(w - g @ v) for g in fan.generators)
        pts = np.stack([g @ v - w for g in fan.generators], axis=0)
        mn, _ = min_norm_point(pts)
        return float(np.linalg.norm(mn))

    def batch(xs):
        vs = xs - xbar[:, None]
        ws = f.value_batch(xs) - fx0[:, None]
        if fan.hull == "finite-set":
            return np.min(np.stack([fan.norm_out.value_batch(ws - g @ vs) for g in fan.generators]), axis=0)
        return np.array([one(xs[:, j]) for j in range(xs.shape[1])])

    return FuncMap(fn=lambda x: np.atleast_1d(one(x)), batch_fn=lambda xs: np.atleast_2d(batch(xs)),
                   dim_in=f.dim_in, dim_out=1, norm_in=f.norm_in, norm_out=fan.norm_out)


def _prederivative_scan(
    f: MappingHandle, fan: Fan, xbar: np.ndarray, delta: float, schedule: SamplingSchedule
) -> RateEstimate:
    if fan.hull == "convex-hull" and not fan.norm_out.is_plain_l2:
        raise ValueError("hull fans need an l2 target norm for the inner distance oracle")
    sched = SamplingSchedule(
        r0=delta, decay=schedule.decay, shells=schedule.shells, points=schedule.points, seed=schedule.seed
    )
    gap = _fan_gap_map(f, fan, xbar)
    return calmness_modulus_sv(gap, xbar, sched)


def prederivative_defect(
    f: MappingHandle,
    fan: Fan,
    xbar,
    delta: float,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
) -> float:
    """Sampled sup over the punctured delta-ball of dist(f(xbar+v)-f(xbar), fan(v)) / |v|."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    scan = _prederivative_scan(f, fan, xbar, delta, schedule)
    return scan.cumulative[0]  # sup over every shell, not just the tail


def sms_from_prederivative(
    f: MappingHandle,
    fan: Fan,
    xbar,
    delta: float,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    tau: float = DEFAULT_TAU,
    assume_eps: Optional[float] = None,
    alpha_count: int = 10_000,
) -> BoundReport:
    """Subregularity via an outer prederivative fan: bound = 1/(alpha(fan) - eps).

    The defect eps is the sampled uniform remainder rate over the delta-ball.
    When the per-shell defect decays toward the anchor the limiting bound
    1/alpha(fan) also applies; it is reported in the notes and hypotheses,
    while the holds flag is judged against the uniform-eps bound actually
    certified by the measured defect.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    scan = _prederivative_scan(f, fan, xbar, delta, schedule)
    measured_eps = scan.cumulative[0]
    eps = measured_eps
    notes = []
    if assume_eps is not None:
        if assume_eps > measured_eps + 1e-9:
            raise ValueError("assume-eps may only lower the measured defect")
        eps = float(assume_eps)
        notes.append(f"eps assumed {eps:.6g} by caller (measured defect {measured_eps:.6g})")
    alpha = alpha_fan_info(fan, count=alpha_count, seed=schedule.seed)
    cert_f = certify_sms(f, xbar, f.value(xbar), schedule, tau)
    measured = _modulus(cert_f)
    hyp_ok = alpha.value > eps
    bound = 1.0 / (alpha.value - eps) if hyp_ok else math.nan

    # vanishing-defect detection: final shells carry (almost) no remainder
    tail = scan.shell_max[-3:]
    head = max(scan.shell_max)
    decaying = max(tail) <= max(1e-3, 0.25 * head) if head > 0 else True
    stricter = 1.0 / alpha.value if (decaying and alpha.value > 0) else math.nan
    if decaying and hyp_ok:
        notes.append(f"defect decays with radius; limiting bound 1/alpha = {stricter:.6g} applies")
    if not hyp_ok:
        notes.append(f"alpha = {alpha.value:.6g} <= eps = {eps:.6g}; bound undefined")
    return _finish(
        BoundReport(
            theorem="fan-prederivative",
            hypotheses={
                "alpha": alpha.value,
                "eps": eps,
                "alpha_evidence": alpha.evidence,
                "defect_decays": decaying,
                "limiting_bound": stricter,
            },
            hypothesis_ok=hyp_ok,
            bound=bound,
            measured=measured,
            holds=None,
            notes=tuple(notes),
            certificates={"target": cert_f},
        )
    )


def fd_jacobian(f: MappingHandle, xbar, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference Jacobian of a single-valued map."""
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    cols = []
    for j in range(f.dim_in):
        e = np.zeros_like(xbar)
        e[j] = step
        cols.append((np.atleast_1d(f.value(xbar + e)) - np.atleast_1d(f.value(xbar - e))) / (2.0 * step))
    return np.stack(cols, axis=1)


def smooth_kernel_check(
    f: MappingHandle,
    xbar,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    tau: float = DEFAULT_TAU,
    fd_step: float = 1e-5,
) -> BoundReport:
    """Subregularity of a differentiable map via its Jacobian: bound = 1/alpha(J).

    Differentiability is screened by comparing central differences at steps
    h and h/2 (agreement within 1e-4 relative).  alpha(J) > 0 means the
    Jacobian kernel is trivial and certifies the bound; a singular Jacobian
    leaves this criterion inapplicable (use the prederivative route).
    """
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    j_h = fd_jacobian(f, xbar, fd_step)
    j_h2 = fd_jacobian(f, xbar, fd_step / 2.0)
    scale = max(1.0, float(np.max(np.abs(j_h2))))
    fd_gap = float(np.max(np.abs(j_h - j_h2))) / scale
    differentiable = fd_gap <= 1e-4

    jac_op = LinearOp(j_h2, norm_in=f.norm_in, norm_out=f.norm_out)
    alpha = alpha_linear_info(jac_op, seed=schedule.seed)
    kernel_trivial = alpha.value > 1e-9
    cert_f = certify_sms(f, xbar, f.value(xbar), schedule, tau)
    measured = _modulus(cert_f)

    hyp_ok = differentiable and kernel_trivial
    bound = 1.0 / alpha.value if hyp_ok else math.nan
    notes = []
    if not differentiable:
        notes.append(f"finite-difference Jacobians disagree ({fd_gap:.2e} relative); use the prederivative route")
    if not kernel_trivial:
        notes.append("Jacobian is singular; kernel not trivial, criterion inapplicable")
    return _finish(
        BoundReport(
            theorem="smooth-kernel",
            hypotheses={
                "alpha_jacobian": alpha.value,
                "alpha_evidence": alpha.evidence,
                "fd_gap": fd_gap,
                "differentiable": differentiable,
                "kernel_trivial": kernel_trivial,
            },
            hypothesis_ok=hyp_ok,
            bound=bound,
            measured=measured,
            holds=None,
            notes=tuple(notes),
            certificates={"target": cert_f},
        )
    )


# ---------------------------------------------------------------------------
# Randomized soundness suites

_SUITE_SEED = 20240601


def _random_rotation(rng: np.random.Generator, dim: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0]])
    a = rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def _spread_diag(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Positive diagonal entries in [0.5, 2] with a unique, isolated minimum."""
    vals = rng.uniform(0.5, 2.0, size=dim)
    i = int(np.argmin(vals))
    vals[np.arange(dim) != i] = np.maximum(vals[np.arange(dim) != i], vals[i] * 1.25)
    return vals


def _gen_composition(rng: np.random.Generator) -> tuple:
    dim = int(rng.integers(1, 4))
    # rejection-sample until min(a_i b_i) clears (min a)(min b) by 25%:
    # the slack absorbs the sampling error of the off-axis factor rate
    while True:
        a = _spread_diag(rng, dim)
        b = _spread_diag(rng, dim)
        if dim == 1 or np.min(a * b) >= 1.25 * np.min(a) * np.min(b):
            break
    q = _random_rotation(rng, dim)
    r = _random_rotation(rng, dim)
    inner = LinearOp(q @ np.diag(b))
    outer = LinearOp(r @ np.diag(a) @ q.T)
    return inner, outer, np.zeros(dim)


def _gen_perturbation(rng: np.random.Generator) -> tuple:
    dim = int(rng.integers(1, 4))
    a = _spread_diag(rng, dim)
    q = _random_rotation(rng, dim)
    base = LinearOp(q @ np.diag(a))
    # smooth perturbation; amp/freq sized so that kappa*clm stays below ~0.6
    freq = rng.uniform(1.0, 3.0, size=dim)
    amp = float(rng.uniform(0.1, 0.5)) * float(np.min(a)) / float(np.max(freq))
    phase = rng.uniform(0, 2 * math.pi, size=dim)

    def gfun(x):
        return amp * np.sin(freq * x + phase) - amp * np.sin(phase)

    def gbatch(xs):
        return amp * np.sin(freq[:, None] * xs + phase[:, None]) - amp * np.sin(phase)[:, None]

    g = FuncMap(fn=gfun, batch_fn=gbatch, dim_in=dim, dim_out=dim)
    return base, g, np.zeros(dim)


def _gen_approx(rng: np.random.Generator) -> tuple:
    dim = int(rng.integers(1, 4))
    a = _spread_diag(rng, dim)
    flips = rng.choice([-1.0, 1.0], size=dim)

    # h: coordinatewise a_i * (|u_i| or u_i): p.h. with alpha0 = min(a) exactly
    # attained on a coordinate axis, which every sampler hits deterministically.
    use_abs = rng.random(size=dim) < 0.5

    def hfun(u):
        u = np.asarray(u, dtype=float)
        return a * np.where(use_abs, np.abs(u), flips * u)

    def hbatch(us):
        return a[:, None] * np.where(use_abs[:, None], np.abs(us), flips[:, None] * us)

    h = FuncMap(fn=hfun, batch_fn=hbatch, dim_in=dim, dim_out=dim)
    amp = float(rng.uniform(0.05, 0.3)) * float(np.min(a))
    freq = rng.uniform(2.0, 5.0, size=dim)

    def ffun(x):
        x = np.asarray(x, dtype=float)
        return hfun(x) + amp * (np.cos(freq * x) - 1.0) * 0.5

    def fbatch(xs):
        return hbatch(xs) + amp * (np.cos(freq[:, None] * xs) - 1.0) * 0.5

    f = FuncMap(fn=ffun, batch_fn=fbatch, dim_in=dim, dim_out=dim)
    return f, h, np.zeros(dim)


def _gen_fan(rng: np.random.Generator) -> tuple:
    dim = int(rng.integers(2, 4))
    margin = 0.15
    s = float(rng.uniform(0.3, 0.8))
    diag = rng.uniform(s + margin, s + margin + 1.5, size=dim)
    a1 = _random_rotation(rng, dim) @ np.diag(diag)
    # f(x) = A1 @ (x with |x_j0|): continuous piecewise-linear, region
    # matrices A1 and A1*D (D a sign flip), both with the same singular values
    j0 = int(rng.integers(0, dim))
    flip = np.ones(dim)
    flip[j0] = -1.0
    a2 = a1 @ np.diag(flip)
    # an isotropic margin generator pins alpha at exactly s under any sampling
    fan = Fan([a1, a2, s * np.eye(dim)])

    def ffun(x):
        x = np.asarray(x, dtype=float)
        return (a1 if x[j0] >= 0 else a2) @ x

    def fbatch(xs):
        pos = xs[j0] >= 0
        return np.where(pos[None, :], a1 @ xs, a2 @ xs)

    f = FuncMap(fn=ffun, batch_fn=fbatch, dim_in=dim, dim_out=dim)
    return f, fan, np.zeros(dim), 0.5


def _gen_smooth(rng: np.random.Generator) -> tuple:
    dim = int(rng.integers(1, 4))
    a = _spread_diag(rng, dim)
    q = _random_rotation(rng, dim)
    mat = q @ np.diag(a)
    gamma = float(rng.uniform(5.0, 20.0))

    # curvature only increases the ratio |f(x)|/|x| away from 0
    def ffun(x):
        x = np.asarray(x, dtype=float)
        return (1.0 + gamma * float(x @ x)) * (mat @ x)

    def fbatch(xs):
        return (1.0 + gamma * np.sum(xs * xs, axis=0))[None, :] * (mat @ xs)

    f = FuncMap(fn=ffun, batch_fn=fbatch, dim_in=dim, dim_out=dim)
    return f, np.zeros(dim)


def soundness_suite(
    theorem: str,
    count: int = 100,
    seed: int = _SUITE_SEED,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
) -> list:
    """Seeded randomized hypothesis-satisfying instances for one bound.

    Returns the list of BoundReports; a sound implementation yields
    holds=True on every one.
    """
    if theorem not in SUITE_IDS:
        raise ValueError(f"unknown suite id {theorem!r}; pick one of {SUITE_IDS}")
    reports = []
    for i in range(count):
        rng = rng_from(seed, SUITE_IDS.index(theorem), i)
        if theorem == "composition-chain":
            inner, outer, z0 = _gen_composition(rng)
            rep = composition_bound(inner, outer, z0, np.zeros(outer.dim_out), schedule)
        elif theorem == "calm-perturbation":
            base, g, x0 = _gen_perturbation(rng)
            rep = perturbation_bound(base, g, x0, np.zeros(base.dim_out), schedule)
        elif theorem == "ph-approximation":
            f, h, x0 = _gen_approx(rng)
            rep = sms_from_approx(f, h, x0, schedule, alpha_count=2000)
        elif theorem == "fan-prederivative":
            f, fan, x0, delta = _gen_fan(rng)
            rep = sms_from_prederivative(f, fan, x0, delta, schedule, alpha_count=2000)
        else:
            f, x0 = _gen_smooth(rng)
            rep = smooth_kernel_check(f, x0, schedule)
        reports.append(rep)
    return reports
