"""Shell-sampled estimates of descent rates, displacement rates, and calmness.

The liminf in the descent rate is discretized by geometric shells around the
anchor: per-shell minima of the difference quotient, cumulative suffix minima
(nondecreasing as shells shrink), and an extrapolated value equal to the
minimum over the last third of the shells.  Sampled minima sit above the true
infimum, so every descent-type figure carries the bias flag
"over-estimates-liminf"; the calmness variant mirrors this with maxima and
"under-estimates-limsup".

Each shell includes deterministic boundary radii (the outer radius exactly
and the inner radius nudged inward by 1e-12) paired with the structured
directions of unit_sphere_samples, so piecewise-linear and radially monotone
profiles are resolved exactly rather than to sampling noise.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from . import expr as ex
from .mappings import MappingHandle
from .spaces import rng_from, unit_sphere_samples

__all__ = [
    "SamplingSchedule",
    "ShellWitness",
    "RateEstimate",
    "EvalFailure",
    "descent_rate",
    "displacement_rate",
    "calmness_modulus_sv",
    "oracle_rate_grid",
    "DEFAULT_SCHEDULE",
]

_NOISE_FLOOR = 1e-12
_INNER_NUDGE = 1.0 + 1e-12


@dataclass(frozen=True)
class SamplingSchedule:
    """Geometric shell schedule; the final radius must stay above 1e-12."""

    r0: float = 0.5
    decay: float = 0.6
    shells: int = 10
    points: int = 1024
    seed: int = 20240601

    def __post_init__(self):
        if not self.r0 > 0:
            raise ValueError("r0 must be positive")
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must lie in (0, 1)")
        if self.shells < 3:
            raise ValueError("need at least 3 shells")
        if self.points < 8:
            raise ValueError("need at least 8 points per shell")
        if not self.r0 * self.decay**self.shells > _NOISE_FLOOR:
            raise ValueError("final radius would fall below the 1e-12 noise floor")

    def radii(self) -> np.ndarray:
        """Outer radius of each shell, strictly decreasing."""
        return self.r0 * self.decay ** np.arange(self.shells)

    def tail_count(self) -> int:
        return math.ceil(self.shells / 3)


DEFAULT_SCHEDULE = SamplingSchedule()


class ShellWitness(NamedTuple):
    shell: int
    radius: float
    point: tuple
    ratio: float

    def to_json_dict(self) -> dict:
        return {"shell": self.shell, "radius": self.radius, "point": list(self.point), "ratio": self.ratio}


class EvalFailure(NamedTuple):
    shell: int
    point: tuple
    message: str


@dataclass
class RateEstimate:
    kind: str  # "descent" | "displacement" | "calmness" | "oracle"
    radii: tuple
    shell_min: tuple
    shell_max: tuple
    cumulative: tuple
    extrapolated: float
    bias: str
    witnesses: tuple
    calm_from_below: bool = True
    diverging: bool = False
    slope: Optional[float] = None
    schedule: Optional[SamplingSchedule] = None
    anchor: tuple = ()
    target: Optional[tuple] = None
    errors: tuple = ()
    evidence: str = "sampled"

    def to_json_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "radii": list(self.radii),
            "shell_min": list(self.shell_min),
            "shell_max": list(self.shell_max),
            "cumulative": list(self.cumulative),
            "extrapolated": self.extrapolated,
            "bias": self.bias,
            "witnesses": [w.to_json_dict() for w in self.witnesses],
            "calm_from_below": self.calm_from_below,
            "diverging": self.diverging,
            "slope": self.slope,
            "anchor": list(self.anchor),
            "target": None if self.target is None else list(self.target),
            "evidence": self.evidence,
        }
        if self.schedule is not None:
            s = self.schedule
            out["schedule"] = {"r0": s.r0, "decay": s.decay, "shells": s.shells, "points": s.points, "seed": s.seed}
        if self.errors:
            out["errors"] = [{"shell": e.shell, "point": list(e.point), "message": e.message} for e in self.errors]
        return out

    def csv_rows(self) -> list[str]:
        rows = ["shell,radius,min_ratio,max_ratio,cumulative_min"]
        for k in range(len(self.radii)):
            rows.append(
                f"{k},{self.radii[k]!r},{self.shell_min[k]!r},{self.shell_max[k]!r},{self.cumulative[k]!r}"
            )
        return rows


def _derived_seed(*key: int) -> int:
    return int(np.random.SeedSequence(tuple(int(k) for k in key)).generate_state(1, np.uint64)[0])


def _thread_cap(shells: int) -> int:
    env = os.environ.get("SUBREG_THREADS", "")
    if env.strip():
        return max(1, min(shells, int(env)))
    return max(1, min(shells, 4, os.cpu_count() or 1))


def _shell_samples(dim: int, norm, r_out: float, r_in: float, count: int, seed: int, k: int):
    """Points with norm-radius in (r_in, r_out] and their exact radii."""
    r_in_eff = r_in * _INNER_NUDGE
    p = 2 if dim == 1 else min(2 * dim + 2, max(2, count // 4))
    det_dirs = unit_sphere_samples(dim, norm, p, _derived_seed(seed, 101, k))
    det_radii = np.array([r_out, r_in_eff, math.sqrt(r_in_eff * r_out)])
    dirs = np.tile(det_dirs, (3, 1))
    radii = np.repeat(det_radii, p)
    rand_count = count - dirs.shape[0]
    if rand_count > 0:
        rand_dirs = unit_sphere_samples(dim, norm, rand_count, _derived_seed(seed, 202, k))
        rand_radii = rng_from(seed, 303, k).uniform(r_in_eff, r_out, rand_count)
        dirs = np.concatenate([dirs, rand_dirs], axis=0)
        radii = np.concatenate([radii, rand_radii])
    return dirs[:count], radii[:count]


class _Profile:
    """Scalar profile x -> value with optional vectorized evaluation."""

    def __init__(self, one: Callable, batch: Optional[Callable] = None):
        self.one = one
        self.batch = batch

    def evaluate(self, xs: np.ndarray) -> np.ndarray:
        if self.batch is not None:
            vals = self.batch(xs)
            if vals is not None:
                return np.asarray(vals, dtype=float).reshape(-1)
        return np.array([float(self.one(xs[:, j])) for j in range(xs.shape[1])])


class _ShellResult(NamedTuple):
    mn: float
    mx: float
    witness: Optional[ShellWitness]
    failures: list


def _eval_shell(
    profile: _Profile,
    anchor: np.ndarray,
    dirs: np.ndarray,
    radii: np.ndarray,
    k: int,
    pick: str,
    skip_eval_errors: bool,
) -> _ShellResult:
    xs = anchor[:, None] + dirs.T * radii[None, :]
    failures: list = []
    try:
        vals = profile.evaluate(xs)
    except ex.ExprEvalError as err:
        if not skip_eval_errors:
            raise ex.ExprEvalError(f"shell {k}: {err}") from err
        vals = np.full(xs.shape[1], np.nan)
        for j in range(xs.shape[1]):
            try:
                vals[j] = float(profile.one(xs[:, j]))
            except ex.ExprEvalError as point_err:
                failures.append(EvalFailure(k, tuple(xs[:, j]), str(point_err)))
    bad = np.isnan(vals)
    if bad.any() and not failures:
        j = int(np.argmax(bad))
        msg = f"shell {k}: profile returned NaN at {tuple(xs[:, j])}"
        if not skip_eval_errors:
            raise ex.ExprEvalError(msg)
        failures.extend(EvalFailure(k, tuple(xs[:, j]), "NaN") for j in np.where(bad)[0])
    ratios = np.where(bad, np.inf if pick == "min" else -np.inf, vals) / radii
    if pick == "min":
        j = int(np.argmin(ratios))
        mn, mx = float(ratios[j]), float(np.max(ratios[~bad])) if (~bad).any() else math.inf
    else:
        j = int(np.argmax(ratios))
        mn = float(np.min(ratios[~bad])) if (~bad).any() else -math.inf
        mx = float(ratios[j])
    wit = None
    if not bad[j]:
        wit = ShellWitness(k, float(radii[j]), tuple(float(v) for v in xs[:, j]), float(ratios[j]))
    return _ShellResult(mn, mx, wit, failures)


def _loglog_slope(radii: np.ndarray, stats: np.ndarray) -> Optional[float]:
    mask = np.isfinite(stats) & (stats > 0)
    if mask.sum() < 4:
        return None
    lx = np.log(radii[mask])
    ly = np.log(stats[mask])
    coef = np.polyfit(lx, ly, 1)
    return float(coef[0])


def _assemble(
    kind: str,
    profile: _Profile,
    anchor: np.ndarray,
    norm_in,
    schedule: SamplingSchedule,
    pick: str,
    skip_eval_errors: bool,
    target: Optional[tuple] = None,
) -> RateEstimate:
    radii = schedule.radii()
    dim = anchor.shape[0]

    def worker(k: int) -> _ShellResult:
        r_out = float(radii[k])
        r_in = r_out * schedule.decay
        dirs, rads = _shell_samples(dim, norm_in, r_out, r_in, schedule.points, schedule.seed, k)
        return _eval_shell(profile, anchor, dirs, rads, k, pick, skip_eval_errors)

    cap = _thread_cap(schedule.shells)
    if cap > 1:
        with ThreadPoolExecutor(max_workers=cap) as pool:
            results = list(pool.map(worker, range(schedule.shells)))
    else:
        results = [worker(k) for k in range(schedule.shells)]

    shell_min = np.array([r.mn for r in results])
    shell_max = np.array([r.mx for r in results])
    if pick == "min":
        cumulative = np.minimum.accumulate(shell_min[::-1])[::-1]
        bias = "over-estimates-liminf"
    else:
        cumulative = np.maximum.accumulate(shell_max[::-1])[::-1]
        bias = "under-estimates-limsup"
    extrapolated = float(cumulative[schedule.shells - schedule.tail_count()])
    slope = _loglog_slope(radii, shell_min if pick == "min" else shell_max)
    diverging = pick == "min" and slope is not None and slope <= -0.9
    calm_from_below = bool(np.all(shell_min >= -1.0 / _NOISE_FLOOR))
    witnesses = tuple(r.witness for r in results if r.witness is not None)
    errors = tuple(f for r in results for f in r.failures)
    return RateEstimate(
        kind=kind,
        radii=tuple(float(r) for r in radii),
        shell_min=tuple(float(v) for v in shell_min),
        shell_max=tuple(float(v) for v in shell_max),
        cumulative=tuple(float(v) for v in cumulative),
        extrapolated=extrapolated,
        bias=bias,
        witnesses=witnesses,
        calm_from_below=calm_from_below,
        diverging=diverging,
        slope=slope,
        schedule=schedule,
        anchor=tuple(float(v) for v in anchor),
        target=target,
        errors=errors,
    )


def descent_rate(
    phi: MappingHandle,
    xbar,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    skip_eval_errors: bool = False,
) -> RateEstimate:
    """Shell estimate of liminf (phi(x) - phi(xbar)) / |x - xbar|."""
    if phi.dim_out != 1:
        raise ValueError("descent rate needs a scalar-valued function")
    anchor = np.atleast_1d(np.asarray(xbar, dtype=float))
    base = float(phi.value(anchor)[0])
    if not math.isfinite(base):
        raise ValueError(f"phi(xbar) = {base} is not finite")

    def one(x):
        return float(phi.value(x)[0]) - base

    def batch(xs):
        if not hasattr(phi, "value_batch"):
            return None
        return phi.value_batch(xs)[0] - base

    return _assemble("descent", _Profile(one, batch), anchor, phi.norm_in, schedule, "min", skip_eval_errors)


def displacement_rate(
    handle: MappingHandle,
    xbar,
    ybar,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    skip_eval_errors: bool = False,
) -> RateEstimate:
    """Shell estimate of the displacement rate: descent rate of dist(ybar, F(.)).

    The anchor must lie on the graph (dist(ybar, F(xbar)) <= 1e-9); the profile
    value at the anchor is forced to zero.
    """
    anchor = np.atleast_1d(np.asarray(xbar, dtype=float))
    ytup = tuple(float(v) for v in np.atleast_1d(np.asarray(ybar, dtype=float)))
    gap = handle.dist_to_image(ybar, anchor)
    if not gap <= 1e-9:
        raise ValueError(f"anchor is off the graph: dist(ybar, F(xbar)) = {gap}")

    def one(x):
        return handle.dist_to_image(ybar, x)

    est = _assemble(
        "displacement",
        _Profile(one, lambda xs: handle.dist_to_image_batch(ybar, xs)),
        anchor,
        handle.norm_in,
        schedule,
        "min",
        skip_eval_errors,
        target=ytup,
    )
    return est


def calmness_modulus_sv(
    g: MappingHandle,
    xbar,
    schedule: SamplingSchedule = DEFAULT_SCHEDULE,
    skip_eval_errors: bool = False,
) -> RateEstimate:
    """Shell estimate of limsup |g(x) - g(xbar)| / |x - xbar| for single-valued g."""
    if not g.single_valued:
        raise ValueError("calmness_modulus_sv needs a single-valued mapping")
    anchor = np.atleast_1d(np.asarray(xbar, dtype=float))
    base = np.atleast_1d(g.value(anchor))

    def one(x):
        return g.norm_out.value(np.atleast_1d(g.value(x)) - base)

    def batch(xs):
        if not hasattr(g, "value_batch"):
            return None
        return g.norm_out.value_batch(g.value_batch(xs) - base[:, None])

    est = _assemble("calmness", _Profile(one, batch), anchor, g.norm_in, schedule, "max", skip_eval_errors)
    est.target = tuple(float(v) for v in base)
    return est


def oracle_rate_grid(handle: MappingHandle, xbar, ybar, radius: float, resolution: int) -> RateEstimate:
    """Exhaustive displacement-ratio scan over a punctured ball; dim <= 2 only.

    A brute-force cross-check for instances whose ratio profile depends only
    on the direction, where the ball minimum equals the liminf.
    """
    if handle.dim_in > 2:
        raise ValueError("oracle grid supports dimension <= 2 only")
    if resolution > 4001:
        raise ValueError("resolution capped at 4001 per axis")
    anchor = np.atleast_1d(np.asarray(xbar, dtype=float))
    axis = np.linspace(-radius, radius, resolution)
    if handle.dim_in == 1:
        xs = anchor[:, None] + axis[None, :]
        rads = np.abs(axis)
    else:
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        offs = np.stack([gx.ravel(), gy.ravel()], axis=0)
        rads = handle.norm_in.value_batch(offs)
        xs = anchor[:, None] + offs
    keep = (rads > 0) & (rads <= radius)
    xs, rads = xs[:, keep], rads[keep]
    vals = handle.dist_to_image_batch(ybar, xs)
    if vals is None:
        vals = np.array([handle.dist_to_image(ybar, xs[:, j]) for j in range(xs.shape[1])])
    ratios = np.asarray(vals, dtype=float) / rads
    j = int(np.argmin(ratios))
    mn, mx = float(ratios[j]), float(np.max(ratios))
    wit = ShellWitness(0, float(rads[j]), tuple(float(v) for v in xs[:, j]), mn)
    return RateEstimate(
        kind="oracle",
        radii=(float(radius),),
        shell_min=(mn,),
        shell_max=(mx,),
        cumulative=(mn,),
        extrapolated=mn,
        bias="over-estimates-liminf",
        witnesses=(wit,),
        anchor=tuple(float(v) for v in anchor),
        target=tuple(float(v) for v in np.atleast_1d(np.asarray(ybar, dtype=float))),
        evidence="oracle-grid",
    )
