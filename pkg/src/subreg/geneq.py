"""Parameterized generalized equations 0 in f(p,x) + T(x).

The solution map S(p) = {x : 0 in f(p,x) + T(x)} is probed empirically on a
parameter grid (each solution found by residual minimization and replayable
through `residual`), while the isolated-calmness bounds come from the
approximated equation 0 in f(pbar,xbar) + H(x-xbar) + T(x): its subregularity
modulus, the uniform prederivative defect of the base, and the calmness of
f(.,xbar) in the parameter combine into a certified bound that the measured
calmness of S is then checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bounds import BoundReport, _finish, _prederivative_scan, fd_jacobian
from .certify import DEFAULT_TAU, certify_sms
from .convexity import MaxAffineFn, OrderCone, intrad_info
from .mappings import Fan, FuncMap, MappingHandle, SumMap, alpha_fan_info
from .rates import DEFAULT_SCHEDULE, SamplingSchedule, calmness_modulus_sv
from .spaces import Norm, unit_sphere_samples

__all__ = [
    "GenEqProblem",
    "SolutionSample",
    "residual",
    "param_grid",
    "trace_solution_map",
    "partial_prederivative_defect",
    "ageq_handle",
    "isolated_calmness_bound",
    "single_valued_field_bound",
    "convex_scalarized_geneq_bound",
]

RESIDUAL_TOL = 1e-7
MERGE_TOL = 1e-5
PARAM_GRID_POINTS = 33  # per axis, anchor excluded


@dataclass
class GenEqProblem:
    """0 in f(p,x) + T(x) anchored at a solution (pbar, xbar).

    `base` evaluates f on the stacked input (p first, then x); `field` is T
    as a mapping handle in x.  The fan H drives the approximated equation;
    when omitted it defaults to the singleton finite-difference Jacobian
    d_x f(pbar, xbar).  delta bounds the solution search in x, zeta the
    parameter perturbations.
    """

    base: MappingHandle = None
    field_map: MappingHandle = None
    param_dim: int = 1
    pbar: tuple = (0.0,)
    xbar: tuple = (0.0,)
    fan: Optional[Fan] = None
    delta: float = 0.5
    zeta: float = 0.25
    norm_p: Norm = Norm("l2")
    norm_x: Norm = Norm("l2")
    base_components: Optional[Sequence[MaxAffineFn]] = None  # f(pbar, .) when max-affine
    cone: Optional[OrderCone] = None
    name: str = ""

    def __post_init__(self):
        self.pbar = tuple(float(v) for v in np.atleast_1d(self.pbar))
        self.xbar = tuple(float(v) for v in np.atleast_1d(self.xbar))
        if self.base.dim_in != self.param_dim + self.field_map.dim_in:
            raise ValueError("base must take the stacked (p, x) input")
        if self.base.dim_out != self.field_map.dim_out:
            raise ValueError("base and field target dimensions differ")
        if not (self.delta > 0 and self.zeta > 0):
            raise ValueError("delta and zeta must be positive")
        gap = residual(self, self.pbar, self.xbar)
        if not gap <= 1e-9:
            raise ValueError(f"(pbar, xbar) does not solve the equation: residual = {gap}")

    @property
    def n(self) -> int:
        return self.field_map.dim_in

    @property
    def m(self) -> int:
        return self.base.dim_out

    def f_at(self, p, x) -> np.ndarray:
        joint = np.concatenate([np.atleast_1d(p), np.atleast_1d(x)]).astype(float)
        return np.atleast_1d(self.base.value(joint))

    def base_in_x(self, p) -> FuncMap:
        """x -> f(p, x) with the parameter frozen."""
        p = np.atleast_1d(np.asarray(p, dtype=float))

        def one(x):
            return self.f_at(p, x)

        def batch(xs):
            xs = np.atleast_2d(xs)
            joint = np.vstack([np.tile(p[:, None], (1, xs.shape[1])), xs])
            return self.base.value_batch(joint)

        return FuncMap(fn=one, batch_fn=batch, dim_in=self.n, dim_out=self.m,
                       norm_in=self.norm_x, norm_out=self.base.norm_out)

    def base_in_p(self, x) -> FuncMap:
        """p -> f(p, x) with the state frozen."""
        x = np.atleast_1d(np.asarray(x, dtype=float))

        def one(p):
            return self.f_at(p, x)

        def batch(ps):
            ps = np.atleast_2d(ps)
            joint = np.vstack([ps, np.tile(x[:, None], (1, ps.shape[1]))])
            return self.base.value_batch(joint)

        return FuncMap(fn=one, batch_fn=batch, dim_in=self.param_dim, dim_out=self.m,
                       norm_in=self.norm_p, norm_out=self.base.norm_out)

    def fan_or_default(self) -> Fan:
        if self.fan is not None:
            return self.fan
        jac = fd_jacobian(self.base_in_x(self.pbar), self.xbar)
        return Fan(generators=[jac], hull="finite-set",
                   norm_in=self.norm_x, norm_out=self.base.norm_out)


def residual(prob: GenEqProblem, p, x) -> float:
    """dist(0, f(p,x) + T(x))."""
    y = -prob.f_at(p, x)
    return prob.field_map.dist_to_image(y, np.atleast_1d(np.asarray(x, dtype=float)))


def _residual_batch(prob: GenEqProblem, p, xs: np.ndarray) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = -prob.base_in_x(p).value_batch(xs)
    T = prob.field_map
    if T.single_valued and hasattr(T, "value_batch"):
        return T.norm_out.value_batch(T.value_batch(xs) - ys)
    if hasattr(T, "dist_var_y_batch"):
        vals = T.dist_var_y_batch(ys, xs)
        if vals is not None:
            return vals
    return np.array([T.dist_to_image(ys[:, j], xs[:, j]) for j in range(xs.shape[1])])


def param_grid(prob: GenEqProblem, per_axis: int = PARAM_GRID_POINTS) -> np.ndarray:
    """Axis-product grid over the zeta-ball around pbar, anchor removed."""
    pbar = np.asarray(prob.pbar)
    axes = [np.linspace(c - prob.zeta, c + prob.zeta, per_axis) for c in pbar]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.max(np.abs(pts - pbar[None, :]), axis=1) > 1e-15
    return pts[keep]


@dataclass
class SolutionSample:
    """Solutions of 0 in f(p,.) + T found in the delta-ball for one parameter."""

    p: tuple
    points: tuple
    residuals: tuple
    method: str

    def to_json_dict(self) -> dict:
        return {
            "p": list(self.p),
            "points": [list(pt) for pt in self.points],
            "residuals": list(self.residuals),
            "method": self.method,
        }


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _polish_1d(prob, p, lo: float, hi: float) -> tuple:
    # plain golden section: geometric convergence without smoothness, which
    # Brent's parabolic steps lose on the kinked residuals common here
    f = lambda t: residual(prob, p, (t,))
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > 1e-13 * max(1.0, abs(a), abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    t = c if fc <= fd else d
    return float(t), float(f(t))


def _merge_points(points: list, residuals: list, tol: float) -> tuple:
    """Cluster near-duplicates, keeping the best-residual representative."""
    order = np.argsort(residuals)
    kept_pts: list = []
    kept_res: list = []
    for i in order:
        pt = points[i]
        if any(np.max(np.abs(np.asarray(pt) - np.asarray(q))) <= tol for q in kept_pts):
            continue
        kept_pts.append(pt)
        kept_res.append(residuals[i])
    idx = np.lexsort(np.asarray(kept_pts).T[::-1]) if kept_pts else []
    return tuple(tuple(kept_pts[i]) for i in idx), tuple(kept_res[i] for i in idx)


def trace_solution_map(
    prob: GenEqProblem,
    p_grid: Optional[np.ndarray] = None,
    delta: Optional[float] = None,
    grid_points: int = 257,
    residual_tol: float = RESIDUAL_TOL,
    merge_tol: float = MERGE_TOL,
) -> list:
    """Multi-start solution search inside the delta-ball for each grid parameter.

    Every returned point has residual <= residual_tol; an empty point list is
    a legal outcome (the solution map may be empty near pbar).
    """
    if prob.n > 3:
        raise ValueError("solution tracing supported for state dimension <= 3")
    if p_grid is None:
        p_grid = param_grid(prob)
    delta = prob.delta if delta is None else delta
    xbar = np.asarray(prob.xbar)
    out = []
    for p in np.atleast_2d(np.asarray(p_grid, dtype=float)):
        if prob.n == 1:
            lo, hi = xbar[0] - delta, xbar[0] + delta
            grid = np.linspace(lo, hi, grid_points)
            vals = _residual_batch(prob, p, grid[None, :])
            pts, res = [], []
            finite = np.where(np.isfinite(vals), vals, np.inf)
            for j in range(grid_points):
                left = finite[j - 1] if j > 0 else np.inf
                right = finite[j + 1] if j < grid_points - 1 else np.inf
                if not np.isfinite(finite[j]) or finite[j] > min(left, right):
                    continue
                a = grid[max(j - 1, 0)]
                b = grid[min(j + 1, grid_points - 1)]
                x_star, r_star = _polish_1d(prob, p, a, b)
                if r_star <= residual_tol:
                    pts.append((x_star,))
                    res.append(r_star)
            method = "grid+golden"
        else:
            from scipy.optimize import minimize

            per = 13 if prob.n == 2 else 7
            axes = [np.linspace(c - delta, c + delta, per) for c in xbar]
            mesh = np.meshgrid(*axes, indexing="ij")
            starts = np.stack([m.ravel() for m in mesh], axis=1)
            vals = _residual_batch(prob, p, starts.T)
            order = np.argsort(np.where(np.isfinite(vals), vals, np.inf))[:12]
            pts, res = [], []
            for j in order:
                if not np.isfinite(vals[j]):
                    continue
                sol = minimize(lambda x: residual(prob, p, x), starts[j],
                               method="Nelder-Mead",
                               options={"xatol": 1e-11, "fatol": 1e-13, "maxiter": 600})
                x_star = np.asarray(sol.x, dtype=float)
                if prob.norm_x.value(x_star - xbar) > delta + 1e-9:
                    continue
                r_star = float(sol.fun)
                if r_star <= residual_tol:
                    pts.append(tuple(x_star))
                    res.append(r_star)
            method = "grid+nelder-mead"
        pts, res = _merge_points(pts, res, merge_tol)
        out.append(SolutionSample(p=tuple(p), points=pts, residuals=res, method=method))
    return out


def _param_probe_points(prob: GenEqProblem, seed: int) -> np.ndarray:
    """pbar plus deterministic zeta-ball samples for uniform-in-p suprema."""
    pbar = np.asarray(prob.pbar)
    count = 2 if prob.param_dim == 1 else 8
    dirs = unit_sphere_samples(prob.param_dim, prob.norm_p, count, seed)
    pts = [pbar]
    for scale in (1.0, 0.5, 0.1):
        pts.extend(pbar[None, :] + scale * prob.zeta * dirs)
    return np.unique(np.asarray(pts), axis=0)


def partial_prederivative_defect(
    prob: GenEqProblem,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    delta: Optional[float] = None,
) -> float:
    """Smallest sampled uniform eps: sup over the punctured delta-ball and the
    zeta-ball of dist(f(p,x) - f(p,xbar), H(x-xbar)) / |x-xbar|."""
    fan = prob.fan_or_default()
    delta = prob.delta if delta is None else delta
    xbar = np.asarray(prob.xbar)
    worst = 0.0
    for p in _param_probe_points(prob, schedule.seed):
        scan = _prederivative_scan(prob.base_in_x(p), fan, xbar, delta, schedule)
        worst = max(worst, scan.cumulative[0])
    return worst


class _AGEqMap(MappingHandle):
    """x -> f(pbar,xbar) + H(x-xbar) + T(x), the approximated equation's map."""

    def __init__(self, prob: GenEqProblem):
        fan = prob.fan_or_default()
        self.fan = fan
        self.field_map = prob.field_map
        self.xbar = np.asarray(prob.xbar)
        self.const = prob.f_at(prob.pbar, prob.xbar)
        if fan.hull == "convex-hull" and not prob.field_map.single_valued:
            raise ValueError("no exact distance oracle for a hull fan plus a set-valued field")
        self.branches = []
        if fan.hull == "finite-set":
            for gen in fan.generators:
                def shift_one(x, A=gen):
                    return self.const + A @ (np.atleast_1d(x) - self.xbar)

                def shift_batch(xs, A=gen):
                    return self.const[:, None] + A @ (np.atleast_2d(xs) - self.xbar[:, None])

                shift = FuncMap(fn=shift_one, batch_fn=shift_batch,
                                dim_in=prob.n, dim_out=prob.m,
                                norm_in=prob.norm_x, norm_out=prob.field_map.norm_out)
                self.branches.append(SumMap(base=prob.field_map, shift=shift))

    @property
    def dim_in(self) -> int:
        return self.field_map.dim_in

    @property
    def dim_out(self) -> int:
        return self.field_map.dim_out

    @property
    def norm_in(self) -> Norm:
        return self.fan.norm_in

    @property
    def norm_out(self) -> Norm:
        return self.field_map.norm_out

    def image(self, x):
        raise NotImplementedError("the approximated-equation map exposes distances only")

    def dist_to_image(self, ybar, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.branches:
            return min(b.dist_to_image(ybar, x) for b in self.branches)
        target = np.atleast_1d(ybar) - self.const - np.atleast_1d(self.field_map.value(x))
        return self.fan.dist_to_image(target, x - self.xbar)

    def dist_to_image_batch(self, ybar, xs: np.ndarray) -> Optional[np.ndarray]:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if self.branches:
            parts = []
            for b in self.branches:
                vals = b.dist_to_image_batch(ybar, xs)
                if vals is None:
                    vals = np.array([b.dist_to_image(ybar, xs[:, j]) for j in range(xs.shape[1])])
                parts.append(vals)
            return np.min(np.stack(parts, axis=0), axis=0)
        return np.array([self.dist_to_image(ybar, xs[:, j]) for j in range(xs.shape[1])])


def ageq_handle(prob: GenEqProblem) -> MappingHandle:
    return _AGEqMap(prob)


def _local_schedule(schedule: SamplingSchedule, radius: float) -> SamplingSchedule:
    if schedule.r0 <= radius:
        return schedule
    return SamplingSchedule(r0=radius, decay=schedule.decay, shells=schedule.shells,
                           points=schedule.points, seed=schedule.seed)


def _measured_clm(prob: GenEqProblem, samples: Sequence[SolutionSample]) -> tuple:
    """Worst |x - xbar| / |p - pbar| over traced solutions, with its witness."""
    pbar = np.asarray(prob.pbar)
    xbar = np.asarray(prob.xbar)
    worst, witness = 0.0, None
    for sample in samples:
        dp = prob.norm_p.value(np.asarray(sample.p) - pbar)
        if dp <= 0:
            continue
        for pt in sample.points:
            ratio = prob.norm_x.value(np.asarray(pt) - xbar) / dp
            if ratio > worst:
                worst, witness = ratio, (sample.p, pt)
    return worst, witness


def _decaying_defect(prob: GenEqProblem, schedule: SamplingSchedule, eps: float) -> bool:
    small = partial_prederivative_defect(prob, schedule, delta=prob.delta / 16.0)
    return small <= max(1e-3, 0.25 * eps)


def isolated_calmness_bound(
    prob: GenEqProblem,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    tau: float = DEFAULT_TAU,
    p_grid: Optional[np.ndarray] = None,
) -> BoundReport:
    """Isolated-calmness bound for S from the approximated equation.

    bound = clm(f(.,xbar)) * kappa / (1 - eps * kappa) with kappa the certified
    subregularity modulus of the approximated-equation map; measured is the
    worst traced solution displacement per unit parameter displacement.
    """
    eps = partial_prederivative_defect(prob, schedule)
    cert = certify_sms(ageq_handle(prob), prob.xbar, np.zeros(prob.m), schedule, tau)
    kappa = math.inf if cert.verdict == "refuted-with-witness" else cert.modulus
    clm_base = calmness_modulus_sv(
        prob.base_in_p(prob.xbar), prob.pbar, _local_schedule(schedule, prob.zeta)
    ).extrapolated
    product = eps * kappa if np.isfinite(kappa) else math.inf
    hyp_ok = cert.verdict == "certified-numerically" and product < 1.0
    bound = clm_base * kappa / (1.0 - product) if hyp_ok else math.nan
    samples = trace_solution_map(prob, p_grid=p_grid)
    measured, witness = _measured_clm(prob, samples)
    hypotheses = {
        "eps": eps,
        "kappa": kappa,
        "clm_base": clm_base,
        "product": product,
        "defect_decays": False,
    }
    notes = []
    if hyp_ok and _decaying_defect(prob, schedule, eps):
        hypotheses["defect_decays"] = True
        hypotheses["limiting_bound"] = clm_base * kappa
        notes.append(
            f"defect decays with the ball radius; limiting bound clm*kappa = {clm_base * kappa:.12g} applies"
        )
    if witness is not None:
        notes.append(f"worst solution ratio at p = {witness[0]}, x = {witness[1]}")
    return _finish(BoundReport(
        theorem="geneq-isolated-calmness",
        hypotheses=hypotheses,
        hypothesis_ok=hyp_ok,
        bound=bound,
        measured=measured,
        holds=None,
        notes=tuple(notes),
        certificates={"approximated-equation": cert},
    ))


def single_valued_field_bound(
    prob: GenEqProblem,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    p_grid: Optional[np.ndarray] = None,
) -> BoundReport:
    """Single-valued-field variant: bound = clm(f(.,xbar)) / (alpha(H) - clm(T) - eps)."""
    if not prob.field_map.single_valued:
        raise ValueError("this bound needs a single-valued field")
    fan = prob.fan_or_default()
    alpha = alpha_fan_info(fan)
    clm_field = calmness_modulus_sv(
        prob.field_map, prob.xbar, _local_schedule(schedule, prob.delta)
    ).extrapolated
    eps = partial_prederivative_defect(prob, schedule)
    clm_base = calmness_modulus_sv(
        prob.base_in_p(prob.xbar), prob.pbar, _local_schedule(schedule, prob.zeta)
    ).extrapolated
    margin = alpha.value - clm_field - eps
    hyp_ok = margin > 0.0
    bound = clm_base / margin if hyp_ok else math.nan
    samples = trace_solution_map(prob, p_grid=p_grid)
    measured, witness = _measured_clm(prob, samples)
    notes = []
    if not hyp_ok:
        notes.append("separation condition alpha(H) - clm(T) > eps fails")
    if witness is not None:
        notes.append(f"worst solution ratio at p = {witness[0]}, x = {witness[1]}")
    return _finish(BoundReport(
        theorem="geneq-single-valued-field",
        hypotheses={
            "alpha": alpha.value,
            "alpha_evidence": alpha.evidence,
            "clm_field": clm_field,
            "eps": eps,
            "clm_base": clm_base,
            "margin": margin,
        },
        hypothesis_ok=hyp_ok,
        bound=bound,
        measured=measured,
        holds=None,
        notes=tuple(notes),
    ))


def convex_scalarized_geneq_bound(
    prob: GenEqProblem,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    p_grid: Optional[np.ndarray] = None,
    directions: Optional[int] = None,
) -> BoundReport:
    """Scalarization variant for a max-affine base: bound = clm_f / (intrad - clm(T)).

    clm_f is the parameter calmness taken uniformly over sampled x near xbar
    (a sampled sup, hence a lower estimate of the true uniform modulus).
    """
    if prob.base_components is None:
        raise ValueError("declare the max-affine components of f(pbar, .) for this bound")
    if not prob.field_map.single_valued:
        raise ValueError("this bound needs a single-valued field")
    info = intrad_info(prob.base_components, prob.xbar, prob.cone,
                       x_norm=prob.norm_x, directions=directions, seed=schedule.seed)
    clm_field = calmness_modulus_sv(
        prob.field_map, prob.xbar, _local_schedule(schedule, prob.delta)
    ).extrapolated
    xbar = np.asarray(prob.xbar)
    x_dirs = unit_sphere_samples(prob.n, prob.norm_x, 2 if prob.n == 1 else 8, schedule.seed)
    probes = [xbar] + [xbar + s * prob.delta * d for s in (1.0, 0.5) for d in x_dirs]
    p_sched = _local_schedule(schedule, prob.zeta)
    clm_base = max(
        calmness_modulus_sv(prob.base_in_p(x), prob.pbar, p_sched).extrapolated for x in probes[:17]
    )
    ratio = clm_field / info.value if info.value > 0 else math.inf
    hyp_ok = info.value > 0 and ratio < 1.0
    bound = clm_base / (info.value - clm_field) if hyp_ok else math.nan
    samples = trace_solution_map(prob, p_grid=p_grid)
    measured, witness = _measured_clm(prob, samples)
    notes = ["uniform clm(f(.,x)) is a sampled sup over 17 probe states (lower estimate)"]
    if hyp_ok:
        notes.append(f"witness functional y* = {tuple(round(v, 6) for v in info.ystar)}")
    elif info.value <= 0:
        notes.append("scalarized interiority condition fails: intrad = 0")
    else:
        notes.append("field calmness overwhelms intrad: clm(T)/intrad >= 1")
    if witness is not None:
        notes.append(f"worst solution ratio at p = {witness[0]}, x = {witness[1]}")
    return _finish(BoundReport(
        theorem="geneq-convex-scalarization",
        hypotheses={
            "intrad": info.value,
            "intrad_evidence": info.evidence,
            "ystar": info.ystar,
            "clm_field": clm_field,
            "clm_base_uniform": clm_base,
            "ratio": ratio,
        },
        hypothesis_ok=hyp_ok,
        bound=bound,
        measured=measured,
        holds=None,
        notes=tuple(notes),
        evidence=info.evidence,
    ))
