"""Polyhedral convex machinery: subdifferentials, inradii, scalarization.

Max-affine functions (optionally plus a convex quadratic) are the working
class: their subdifferentials at a point are exact polytopes, the inradius
of such a polytope around the origin equals the steepest descent rate, and
sharp minimality becomes a facet computation instead of a sampling question.
The scalarization routines reduce vector-valued subregularity to scalar
descent rates of y* compositions over sampled dual directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product as _cartesian
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .bounds import BoundReport, _finish
from .certify import DEFAULT_TAU, Certificate
from .mappings import FuncMap, MappingHandle
from .rates import DEFAULT_SCHEDULE, SamplingSchedule, descent_rate
from .spaces import Norm, rng_from, unit_sphere_samples

__all__ = [
    "MaxAffineFn",
    "Polytope",
    "OrderCone",
    "subdifferential_at",
    "minkowski_sum",
    "InradiusResult",
    "inradius_origin",
    "inradius_origin_info",
    "sharp_min_convex",
    "intrad",
    "intrad_info",
    "sms_convex_scalarization",
    "sms_frechet_scalarization",
]


@dataclass
class MaxAffineFn:
    """phi(x) = max_i (<a_i, x> + b_i) + 0.5 x^T Q x with Q PSD."""

    pieces: Sequence[tuple] = ()
    quad: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.pieces:
            raise ValueError("need at least one affine piece")
        slopes = np.atleast_2d(np.asarray([p[0] for p in self.pieces], dtype=float))
        offs = np.asarray([float(p[1]) for p in self.pieces])
        self._a = slopes
        self._b = offs
        if self.quad is not None:
            q = np.atleast_2d(np.asarray(self.quad, dtype=float))
            if q.shape != (self.dim, self.dim):
                raise ValueError("quadratic term has wrong shape")
            if float(np.max(np.abs(q - q.T))) > 1e-12:
                raise ValueError("quadratic term must be symmetric")
            if float(np.min(np.linalg.eigvalsh(q))) < -1e-10:
                raise ValueError("quadratic term must be positive semidefinite")
            self.quad = q

    @property
    def dim(self) -> int:
        return self._a.shape[1]

    def value(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = float(np.max(self._a @ x + self._b))
        if self.quad is not None:
            out += 0.5 * float(x @ self.quad @ x)
        return out

    def value_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(xs)
        out = np.max(self._a @ xs + self._b[:, None], axis=0)
        if self.quad is not None:
            out = out + 0.5 * np.sum(xs * (self.quad @ xs), axis=0)
        return out

    def gradient(self, x) -> np.ndarray:
        """A subgradient: the slope of (the first) active piece plus Qx."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        i = int(np.argmax(self._a @ x + self._b))
        g = self._a[i].copy()
        if self.quad is not None:
            g = g + self.quad @ x
        return g

    def as_handle(self, norm_in: Norm = Norm("l2"), norm_out: Norm = Norm("l2")) -> FuncMap:
        return FuncMap(
            fn=lambda x: np.atleast_1d(self.value(x)),
            batch_fn=lambda xs: np.atleast_2d(self.value_batch(xs)),
            dim_in=self.dim,
            dim_out=1,
            norm_in=norm_in,
            norm_out=norm_out,
        )


@dataclass
class Polytope:
    """Convex hull of a finite vertex list; facet form cached for dim <= 3."""

    vertices: np.ndarray = None
    approximate: bool = False  # True for sampled Clarke-like hulls
    _facets: object = field(default=None, repr=False)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        self.vertices = np.unique(v, axis=0)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def facet_form(self):
        """(normals, offsets) with P = {v : normals @ v <= offsets}, or None if degenerate."""
        if self._facets is None:
            self._facets = self._compute_facets()
        return None if self._facets == "degenerate" else self._facets

    def _compute_facets(self):
        v = self.vertices
        if v.shape[0] == 1:
            return "degenerate"
        if np.linalg.matrix_rank(v - v[0], tol=1e-11) < self.dim:
            return "degenerate"
        if self.dim == 1:
            lo, hi = float(np.min(v)), float(np.max(v))
            return np.array([[1.0], [-1.0]]), np.array([hi, -lo])
        if self.dim > 3:
            raise ValueError("facet form supported for dimension <= 3 only")
        from scipy.spatial import ConvexHull, QhullError

        try:
            hull = ConvexHull(v)
        except QhullError:
            return "degenerate"
        eq = hull.equations  # rows [n, c] with n.x + c <= 0
        return eq[:, :-1].copy(), -eq[:, -1].copy()

    def support(self, d) -> float:
        return float(np.max(self.vertices @ np.asarray(d, dtype=float)))

    def support_batch(self, ds: np.ndarray) -> np.ndarray:
        return np.max(self.vertices @ ds.T, axis=0)


@dataclass(frozen=True)
class OrderCone:
    """Finitely generated cone in the target space; columns generate it."""

    generators: tuple  # tuple of tuples, (m, k) columnwise

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.generators, dtype=float))
        object.__setattr__(self, "generators", tuple(tuple(col) for col in g.T.tolist()))
        object.__setattr__(self, "_mat", g)

    @staticmethod
    def nonneg(m: int) -> "OrderCone":
        return OrderCone(tuple(map(tuple, np.eye(m))))

    @property
    def dim(self) -> int:
        return self._mat.shape[0]

    @property
    def is_nonneg_orthant(self) -> bool:
        m = self._mat
        return m.shape[0] == m.shape[1] and bool(np.all(m == np.eye(m.shape[0])))

    def dual_contains(self, ystar, tol: float = 1e-12) -> bool:
        """ystar in the dual cone iff <ystar, g> >= 0 for every generator."""
        return bool(np.all(np.asarray(ystar, dtype=float) @ self._mat >= -tol))


def subdifferential_at(phi: MaxAffineFn, xbar) -> Polytope:
    """Exact convex subdifferential: hull of active slopes, shifted by Q xbar."""
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    vals = phi._a @ xbar + phi._b
    active = vals >= np.max(vals) - 1e-9
    verts = phi._a[active]
    if phi.quad is not None:
        verts = verts + (phi.quad @ xbar)[None, :]
    return Polytope(verts)


def minkowski_sum(polys: Sequence[Polytope], weights: Sequence[float]) -> Polytope:
    """Weighted Minkowski sum: hull of all weighted vertex combinations."""
    verts = []
    for combo in _cartesian(*[p.vertices for p in polys]):
        verts.append(sum(w * v for w, v in zip(weights, combo)))
    return Polytope(np.asarray(verts))


class InradiusResult(NamedTuple):
    value: float
    mode: str  # "exact" | "sampled-upper"
    note: str = ""


def inradius_origin_info(
    poly: Polytope,
    dual_norm: Norm = Norm("l2"),
    mode: str = "exact",
    directions: int = 4096,
    seed: int = 20240601,
) -> InradiusResult:
    """Largest rho with rho * (dual_norm unit ball) inside the polytope.

    Exact mode (dim <= 3): min over facets of offset / support of the ball at
    the facet normal; 0 when the origin is outside or on the boundary, and 0
    with a note for polytopes without interior.  Sampled mode: min over
    sampled directions of the support ratio — an upper estimate, since a
    coarser direction set can only miss the binding facet.
    """
    primal = dual_norm.dual()  # support function of the dual-norm ball
    if mode == "exact":
        facets = poly.facet_form()
        if facets is None:
            return InradiusResult(0.0, "exact", "not full-dimensional")
        normals, offsets = facets
        if np.any(offsets < 0):
            return InradiusResult(0.0, "exact", "origin outside")
        gauges = primal.value_batch(normals.T)
        return InradiusResult(float(np.min(offsets / gauges)) + 0.0, "exact")
    if mode != "sampled":
        raise ValueError("mode must be 'exact' or 'sampled'")
    ds = unit_sphere_samples(poly.dim, Norm("l2"), directions, seed)
    sup = poly.support_batch(ds)
    if np.any(sup < 0):
        return InradiusResult(0.0, "sampled-upper", "origin outside (witness direction sampled)")
    gauges = primal.value_batch(ds.T)
    return InradiusResult(float(np.min(sup / gauges)), "sampled-upper")


def inradius_origin(poly: Polytope, dual_norm: Norm = Norm("l2"), mode: str = "exact") -> float:
    return inradius_origin_info(poly, dual_norm, mode).value


def sharp_min_convex(
    phi: MaxAffineFn,
    xbar,
    x_norm: Norm = Norm("l2"),
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
) -> Certificate:
    """Sharp minimality of a convex max-affine function, decided structurally.

    The growth rate equals the inradius of the subdifferential around the
    origin; a positive inradius certifies, a zero one refutes (exact for
    this class), and a sampled descent rate is attached as a cross-check.
    """
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    sub = subdifferential_at(phi, xbar)
    res = inradius_origin_info(sub, x_norm.dual(), mode="exact" if sub.dim <= 3 else "sampled")
    est = descent_rate(phi.as_handle(norm_in=x_norm), xbar, schedule)
    notes = []
    if res.note:
        notes.append(res.note)
    if res.value > 0.05 and abs(est.extrapolated - res.value) > 0.05 * res.value:
        notes.append(f"sampled descent rate {est.extrapolated:.6g} disagrees with inradius {res.value:.6g}")
    verdict = "certified-numerically" if res.value > 0 else "refuted-with-witness"
    if res.value == 0 and res.mode == "exact":
        facets = sub.facet_form()
        if facets is not None:
            normals, offsets = facets
            j = int(np.argmin(offsets))
            # along this facet normal the function fails to grow linearly
            notes.append(f"flat direction: facet normal {tuple(round(float(c), 6) for c in normals[j])}")
    return Certificate(
        property="sharp-minimum",
        verdict=verdict,
        modulus=res.value,
        rate=est,
        criterion="subdifferential-inradius",
        threshold=0.0,
        evidence="structural" if res.mode == "exact" else "sampled",
        notes=tuple(notes),
    )


def _dual_sphere_samples(m: int, count: Optional[int], seed: int) -> np.ndarray:
    if count is None:
        count = 256 if m <= 2 else 1024
    if m == 1:
        return np.array([[1.0], [-1.0]])
    if m == 2:
        theta = 2.0 * math.pi * np.arange(count) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return unit_sphere_samples(m, Norm("l2"), count, seed)


def _scalarized_subdifferential(
    comps: Sequence[MaxAffineFn], xbar: np.ndarray, ystar: np.ndarray
) -> Optional[Polytope]:
    """Exact Minkowski form when all weights are nonnegative, else Clarke-like sample."""
    if np.all(ystar >= -1e-12):
        polys, weights = [], []
        for w, comp in zip(ystar, comps):
            if w > 1e-14:
                polys.append(subdifferential_at(comp, xbar))
                weights.append(float(w))
        if not polys:
            return Polytope(np.zeros((1, comps[0].dim)))
        return minkowski_sum(polys, weights)
    # mixed signs: hull of sampled gradients near xbar, flagged approximate
    if not _convex_on_samples(comps, xbar, ystar):
        return None
    rng = rng_from(20240601, 17)
    pts = xbar[None, :] + 1e-6 * rng.normal(size=(128, comps[0].dim))
    grads = np.stack([sum(w * c.gradient(p) for w, c in zip(ystar, comps)) for p in pts])
    return Polytope(grads, approximate=True)


def _convex_on_samples(comps: Sequence[MaxAffineFn], xbar: np.ndarray, ystar: np.ndarray) -> bool:
    rng = rng_from(20240601, 23)
    dim = comps[0].dim

    def val(x):
        return sum(w * c.value(x) for w, c in zip(ystar, comps))

    for _ in range(32):
        u = xbar + rng.uniform(-1, 1, size=dim)
        v = xbar + rng.uniform(-1, 1, size=dim)
        if val(0.5 * (u + v)) > 0.5 * (val(u) + val(v)) + 1e-9:
            return False
    return True


class IntradResult(NamedTuple):
    value: float
    ystar: tuple
    evidence: str
    samples: int


def intrad_info(
    comps: Sequence[MaxAffineFn],
    xbar,
    cone: Optional[OrderCone] = None,
    x_norm: Norm = Norm("l2"),
    directions: Optional[int] = None,
    seed: int = 20240601,
) -> IntradResult:
    """sup over unit dual-cone functionals y* of the inradius of d(y* o f)(xbar).

    The supremum over y* is read as in the scalarization theorem's proof: one
    good y* suffices.  For nonnegative y* the scalarized subdifferential is
    an exact Minkowski sum; mixed-sign functionals (possible for general
    cones) fall back to a sampled gradient hull and taint the evidence tag.
    """
    comps = list(comps)
    m = len(comps)
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    if cone is None:
        cone = OrderCone.nonneg(m)
    best, best_y = 0.0, (0.0,) * m
    evidence = "structural"
    dim = comps[0].dim
    samples = 0
    sphere = _dual_sphere_samples(m, directions, seed)
    if cone.is_nonneg_orthant:
        # fold onto the orthant so every sample lands in the dual cone
        sphere = np.abs(sphere)
    for ystar in sphere:
        if not cone.dual_contains(ystar):
            continue
        samples += 1
        poly = _scalarized_subdifferential(comps, xbar, ystar)
        if poly is None:
            continue
        res = inradius_origin_info(poly, x_norm.dual(), mode="exact" if dim <= 3 else "sampled")
        if res.value > best:
            best, best_y = res.value, tuple(float(v) for v in ystar)
            if poly.approximate or res.mode != "exact":
                evidence = "sampled"
            else:
                evidence = "structural"
    return IntradResult(best, best_y, evidence, samples)


def intrad(
    comps: Sequence[MaxAffineFn],
    xbar,
    cone: Optional[OrderCone] = None,
    x_norm: Norm = Norm("l2"),
    directions: Optional[int] = None,
    seed: int = 20240601,
) -> float:
    return intrad_info(comps, xbar, cone, x_norm, directions, seed).value


def _stacked_handle(comps: Sequence[MaxAffineFn], x_norm: Norm, y_norm: Norm) -> FuncMap:
    comps = list(comps)

    def one(x):
        return np.array([c.value(x) for c in comps])

    def batch(xs):
        return np.stack([c.value_batch(xs) for c in comps], axis=0)

    return FuncMap(fn=one, batch_fn=batch, dim_in=comps[0].dim, dim_out=len(comps),
                   norm_in=x_norm, norm_out=y_norm)


def sms_convex_scalarization(
    comps: Sequence[MaxAffineFn],
    xbar,
    cone: Optional[OrderCone] = None,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    x_norm: Norm = Norm("l2"),
    y_norm: Norm = Norm("l2"),
    directions: Optional[int] = None,
    tau: float = DEFAULT_TAU,
) -> BoundReport:
    """Subregularity of a cone-convex vector map via scalarized inradii.

    bound = 1/intrad when some scalarization has the origin interior to its
    subdifferential; measured is the sampled modulus of the stacked map.
    The criterion is sufficient only: a zero intrad yields a not-applicable
    report even when the map is subregular (e.g. injective linear maps).
    """
    from .certify import certify_sms

    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    info = intrad_info(comps, xbar, cone, x_norm, directions, schedule.seed)
    handle = _stacked_handle(comps, x_norm, y_norm)
    cert = certify_sms(handle, xbar, handle.value(xbar), schedule, tau)
    measured = math.inf if cert.verdict == "refuted-with-witness" else cert.modulus
    hyp_ok = info.value > 0
    bound = 1.0 / info.value if hyp_ok else math.nan
    notes = []
    if hyp_ok:
        notes.append(f"witness functional y* = {tuple(round(v, 6) for v in info.ystar)}")
    else:
        notes.append("no sampled dual functional puts the origin interior to the scalarized subdifferential")
    return _finish(
        BoundReport(
            theorem="convex-scalarization",
            hypotheses={"intrad": info.value, "intrad_evidence": info.evidence, "dual_samples": info.samples},
            hypothesis_ok=hyp_ok,
            bound=bound,
            measured=measured,
            holds=None,
            notes=tuple(notes),
            evidence=info.evidence if hyp_ok else "sampled",
            certificates={"target": cert},
        )
    )


def sms_frechet_scalarization(
    f: MappingHandle,
    xbar,
    directions: int = 64,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    tau: float = DEFAULT_TAU,
) -> Certificate:
    """Search for a dual functional whose scalarization has positive descent rate.

    Certifies subregularity of f with modulus at most 1/rate on the first
    y* whose sampled descent rate of y* o f clears tau; absence of one is
    inconclusive (the criterion is sufficient only).
    """
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    fx0 = np.atleast_1d(f.value(xbar))
    best_est = None
    for ystar in _dual_sphere_samples(f.dim_out, directions, schedule.seed):
        w = np.asarray(ystar, dtype=float)

        def one(x, w=w):
            return np.atleast_1d(float(w @ (np.atleast_1d(f.value(x)) - fx0)))

        def batch(xs, w=w):
            return np.atleast_2d(w @ (f.value_batch(xs) - fx0[:, None]))

        scal = FuncMap(fn=one, batch_fn=batch, dim_in=f.dim_in, dim_out=1, norm_in=f.norm_in)
        est = descent_rate(scal, xbar, schedule)
        if best_est is None or est.extrapolated > best_est[0].extrapolated:
            best_est = (est, tuple(float(v) for v in w))
        if est.extrapolated >= tau:
            return Certificate(
                property="SMS",
                verdict="certified-numerically",
                modulus=1.0 / est.extrapolated,
                rate=est,
                criterion="frechet-scalarization",
                threshold=tau,
                notes=(f"witness functional y* = {tuple(round(v, 6) for v in best_est[1])}",
                       "modulus is an upper bound through the scalarization inequality"),
            )
    est, ybest = best_est
    return Certificate(
        property="SMS",
        verdict="inconclusive",
        modulus=math.inf,
        rate=est,
        criterion="frechet-scalarization",
        threshold=tau,
        notes=(f"best sampled functional y* = {tuple(round(v, 6) for v in ybest)} "
               f"reached rate {est.extrapolated:.6g} < tau",),
    )
