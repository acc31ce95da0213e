"""Mapping handles and injectivity / displacement building blocks.

Handle kinds: linear operators, expression-defined single-valued maps,
positively homogeneous maps, fans (finite families of linear operators, taken
as a finite set or a convex hull), and set-valued maps given as piecewise
clause tables over set templates.  Every handle reports input/output
dimensions and norms and produces image descriptors; single-valued handles
additionally evaluate in batch, which is what keeps the sampling loops fast.

The alpha-type quantities follow one convention throughout: under plain l2
norms on both sides the linear case is computed structurally (one-sided
Jacobi SVD, evidence "structural"); every other combination is estimated by
sphere sampling plus a local polish and labeled "sampled".  Sampled values
are achieved values at feasible directions, hence always upper estimates of
the true infimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from . import expr as ex
from .linalg import min_norm_point, smallest_singular_value
from .spaces import (
    BoxSet,
    ConvexHullPoints,
    EmptySet,
    FinitePoints,
    IntervalUnion,
    NoExactOracle,
    Norm,
    SetDescriptor,
    SetTemplate,
    Translate,
    dist_point_set,
    unit_sphere_samples,
)

__all__ = [
    "MappingHandle",
    "LinearOp",
    "SingleMap",
    "FuncMap",
    "PHMapping",
    "Fan",
    "SetValuedMap",
    "NormalConeBox",
    "EpigraphMap",
    "CompositionMap",
    "SumMap",
    "image",
    "AlphaEstimate",
    "alpha_linear",
    "alpha_linear_info",
    "beta_linear",
    "alpha0_ph",
    "alpha0_ph_info",
    "alpha_fan",
    "alpha_fan_info",
    "DEFAULT_SAMPLE_COUNT",
    "DEFAULT_SAMPLE_SEED",
    "DOMAIN_HALF_WIDTH",
]

DEFAULT_SAMPLE_COUNT = 10_000
DEFAULT_SAMPLE_SEED = 20240601
DOMAIN_HALF_WIDTH = 10.0  # default domain box [-10, 10]^n


class MappingHandle:
    """Common surface of all handles."""

    name: str = ""
    dim_in: int
    dim_out: int
    norm_in: Norm
    norm_out: Norm

    def image(self, x) -> SetDescriptor:
        raise NotImplementedError

    @property
    def single_valued(self) -> bool:
        return hasattr(self, "value")

    def dist_to_image(self, ybar, x) -> float:
        """dist(ybar, F(x)) in the target norm."""
        if self.single_valued:
            return self.norm_out.value(np.atleast_1d(np.asarray(ybar, float)) - np.atleast_1d(self.value(x)))
        return dist_point_set(ybar, self.image(x), self.norm_out)

    def dist_to_image_batch(self, ybar, xs: np.ndarray) -> Optional[np.ndarray]:
        """Vectorized dist(ybar, F(x_j)) for columns of an (n, B) array, or None."""
        if self.single_valued and hasattr(self, "value_batch"):
            vals = self.value_batch(xs)
            y = np.atleast_1d(np.asarray(ybar, float))
            return self.norm_out.value_batch(y[:, None] - np.atleast_2d(vals))
        return None


def _env_from(x, dim: int, p_env: dict | None = None) -> dict:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape[0] != dim:
        raise ex.ExprEvalError(f"point has dim {arr.shape[0]}, mapping expects {dim}")
    env = {f"x{i + 1}": float(arr[i]) for i in range(dim)}
    if p_env:
        env.update(p_env)
    return env


def _env_batch(xs: np.ndarray, dim: int, p_env: dict | None = None) -> dict:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if xs.shape[0] != dim:
        raise ex.ExprEvalError(f"batch has dim {xs.shape[0]}, mapping expects {dim}")
    env = {f"x{i + 1}": xs[i] for i in range(dim)}
    if p_env:
        batch = xs.shape[1]
        env.update({k: np.full(batch, float(v)) for k, v in p_env.items()})
    return env


@dataclass
class LinearOp(MappingHandle):
    matrix: np.ndarray = None
    norm_in: Norm = Norm("l2")
    norm_out: Norm = Norm("l2")
    name: str = ""

    def __post_init__(self):
        self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))

    @property
    def dim_in(self) -> int:
        return self.matrix.shape[1]

    @property
    def dim_out(self) -> int:
        return self.matrix.shape[0]

    def value(self, x) -> np.ndarray:
        return self.matrix @ np.atleast_1d(np.asarray(x, dtype=float))

    def value_batch(self, xs: np.ndarray) -> np.ndarray:
        return self.matrix @ np.atleast_2d(xs)

    def image(self, x) -> SetDescriptor:
        return FinitePoints((tuple(self.value(x)),))

    def transpose_dual(self) -> "LinearOp":
        return LinearOp(self.matrix.T, norm_in=self.norm_out.dual(), norm_out=self.norm_in.dual())


@dataclass
class SingleMap(MappingHandle):
    """Single-valued mapping defined by an expression in x1..xn (and fixed p's)."""

    expr: ex.Expr = None
    dim_in: int = 0
    norm_in: Norm = Norm("l2")
    norm_out: Norm = Norm("l2")
    p_env: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if isinstance(self.expr, str):
            self.expr = ex.parse_expr(self.expr)
        n, _ = ex.var_dims(self.expr)
        if self.dim_in == 0:
            self.dim_in = max(n, 1)
        elif n > self.dim_in:
            raise ValueError(f"expression uses x{n} but dim_in={self.dim_in}")

    @property
    def dim_out(self) -> int:
        return ex.out_dim(self.expr)

    def value(self, x) -> np.ndarray:
        return np.atleast_1d(ex.eval_expr(self.expr, _env_from(x, self.dim_in, self.p_env)))

    def value_batch(self, xs: np.ndarray) -> np.ndarray:
        out = ex.eval_expr_batch(self.expr, _env_batch(xs, self.dim_in, self.p_env))
        return np.atleast_2d(out)

    def image(self, x) -> SetDescriptor:
        return FinitePoints((tuple(self.value(x)),))


@dataclass
class FuncMap(MappingHandle):
    """Single-valued mapping backed by plain callables (internal glue)."""

    fn: Callable = None
    dim_in: int = 1
    dim_out: int = 1
    norm_in: Norm = Norm("l2")
    norm_out: Norm = Norm("l2")
    batch_fn: Optional[Callable] = None
    name: str = ""

    def value(self, x) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.fn(np.atleast_1d(np.asarray(x, float))), dtype=float))

    def value_batch(self, xs: np.ndarray) -> np.ndarray:
        if self.batch_fn is not None:
            return np.atleast_2d(self.batch_fn(np.atleast_2d(xs)))
        cols = [self.value(xs[:, j]) for j in range(np.atleast_2d(xs).shape[1])]
        return np.stack(cols, axis=1)

    def image(self, x) -> SetDescriptor:
        return FinitePoints((tuple(self.value(x)),))


class PHMapping(SingleMap):
    """Positively homogeneous single-valued map; homogeneity is validated.

    Checks h(0) = 0 and h(t u) = t h(u) for t in {0.5, 2, 10} on a sample of
    directions, to absolute/relative tolerance 1e-9.
    """

    VALIDATION_COUNT = 32

    def __post_init__(self):
        super().__post_init__()
        zero = self.value(np.zeros(self.dim_in))
        if float(np.max(np.abs(zero))) > 1e-9:
            raise ValueError(f"h(0) = {zero} is not 0")
        dirs = unit_sphere_samples(self.dim_in, self.norm_in, self.VALIDATION_COUNT, 715)
        worst = 0.0
        for u in dirs:
            base = self.value(u)
            for t in (0.5, 2.0, 10.0):
                gap = float(np.max(np.abs(self.value(t * u) - t * base)))
                worst = max(worst, gap / max(1.0, t * float(np.max(np.abs(base)))))
        if worst > 1e-9:
            raise ValueError(f"not positively homogeneous (relative defect {worst:.2e})")


@dataclass
class Fan(MappingHandle):
    """x -> {A_i x} (finite set) or conv{A_i x} (convex hull)."""

    generators: Sequence[np.ndarray] = ()
    hull: str = "finite-set"  # or "convex-hull"
    norm_in: Norm = Norm("l2")
    norm_out: Norm = Norm("l2")
    name: str = ""

    def __post_init__(self):
        gens = [np.atleast_2d(np.asarray(g, dtype=float)) for g in self.generators]
        if not gens:
            raise ValueError("fan needs at least one generator")
        if len({g.shape for g in gens}) != 1:
            raise ValueError("fan generators of mixed shape")
        if self.hull not in ("finite-set", "convex-hull"):
            raise ValueError(f"unknown hull flag {self.hull!r}")
        self.generators = gens

    @property
    def dim_in(self) -> int:
        return self.generators[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.generators[0].shape[0]

    def image(self, x) -> SetDescriptor:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        pts = tuple(tuple(g @ x) for g in self.generators)
        if self.hull == "finite-set":
            return FinitePoints(pts)
        return ConvexHullPoints(pts)

    def dist_zero(self, u) -> float:
        """dist(0, fan(u)) in the target norm."""
        if self.hull == "finite-set":
            return min(self.norm_out.value(g @ u) for g in self.generators)
        if not self.norm_out.is_plain_l2:
            raise NoExactOracle("no exact inner oracle for a hull fan off plain l2")
        pts = np.stack([g @ u for g in self.generators], axis=0)
        mn, _ = min_norm_point(pts)
        return float(np.linalg.norm(mn))

    def dist_zero_batch(self, us: np.ndarray) -> np.ndarray:
        if self.hull == "finite-set":
            stacked = np.stack([self.norm_out.value_batch(g @ us) for g in self.generators])
            return np.min(stacked, axis=0)
        return np.array([self.dist_zero(us[:, j]) for j in range(us.shape[1])])


@dataclass
class SetValuedMap(MappingHandle):
    """Piecewise clause table: first clause whose condition holds gives the image.

    A clause condition of None always matches; with no matching clause the
    image is empty.  Templates may depend on x (affine or otherwise).
    """

    clauses: Sequence[tuple] = ()  # (cond Expr | None, SetTemplate)
    dim_in: int = 1
    dim_out: int = 1
    norm_in: Norm = Norm("l2")
    norm_out: Norm = Norm("l2")
    p_env: dict = field(default_factory=dict)
    name: str = ""

    def image(self, x) -> SetDescriptor:
        env = _env_from(x, self.dim_in, self.p_env)
        for cond, tpl in self.clauses:
            if cond is None or ex.eval_condition(cond, env):
                return tpl.instantiate(env)
        return EmptySet()

    def dist_to_image(self, ybar, x) -> float:
        return dist_point_set(ybar, self.image(x), self.norm_out)

    def dist_var_y_batch(self, ys: np.ndarray, xs: np.ndarray) -> Optional[np.ndarray]:
        """dist(ys[:, j], image(xs[:, j])) for a per-sample target matrix."""
        return _setvalued_dist_batch_var_y(self, ys, xs)

    def dist_to_image_batch(self, ybar, xs: np.ndarray) -> Optional[np.ndarray]:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        batch = xs.shape[1]
        env = _env_batch(xs, self.dim_in, self.p_env)
        y = np.tile(np.atleast_1d(np.asarray(ybar, float))[:, None], (1, batch))
        out = np.full(batch, np.inf)
        unassigned = np.ones(batch, dtype=bool)
        for cond, tpl in self.clauses:
            if not unassigned.any():
                break
            if cond is None:
                mask = unassigned.copy()
            else:
                holds = np.asarray(ex.eval_expr_batch(cond, env), dtype=bool) if batch else np.zeros(0, bool)
                mask = unassigned & holds
            if not mask.any():
                continue
            sub_env = {k: v[mask] for k, v in env.items()}
            vals = _template_dist_batch(tpl, y[:, mask], sub_env, self.norm_out)
            if vals is None:
                idx = np.where(mask)[0]
                vals = np.array(
                    [dist_point_set(y[:, j], tpl.instantiate({k: float(env[k][j]) for k in env}), self.norm_out) for j in idx]
                )
            out[mask] = vals
            unassigned &= ~mask
        return out


def _template_dist_batch(tpl: SetTemplate, ys: np.ndarray, env: dict, norm: Norm) -> Optional[np.ndarray]:
    """Vectorized distances from per-sample points ys (m, B) to template images."""
    batch = ys.shape[1]
    kind = tpl.kind
    if kind == "empty":
        return np.full(batch, np.inf)
    if kind == "reals":
        return np.zeros(batch)
    if kind == "point":
        vals = np.stack([np.asarray(ex.eval_expr_batch(e, env)) for e in tpl.args], axis=0)
        return norm.value_batch(ys - vals)
    if kind == "interval":
        lo = np.asarray(ex.eval_expr_batch(tpl.args[0], env))
        hi = np.asarray(ex.eval_expr_batch(tpl.args[1], env))
        y = ys[0]
        with np.errstate(invalid="ignore"):
            gap = np.maximum(np.maximum(lo - y, y - hi), 0.0)
        gap = np.where(np.isnan(gap), 0.0, gap)  # inf endpoints minus inf y never occur; belt and braces
        w = 1.0 if norm.weights is None else norm.weights[0]
        return gap * w
    if kind == "box":
        lows = np.stack([np.asarray(ex.eval_expr_batch(p[0], env)) for p in tpl.args], axis=0)
        highs = np.stack([np.asarray(ex.eval_expr_batch(p[1], env)) for p in tpl.args], axis=0)
        clamped = np.clip(ys, lows, highs)
        return norm.value_batch(ys - clamped)
    if kind == "translate":
        shift = np.stack([np.asarray(ex.eval_expr_batch(e, env)) for e in tpl.args], axis=0)
        return _template_dist_batch(tpl.parts[0], ys - shift, env, norm)
    if kind == "union":
        parts = [_template_dist_batch(p, ys, env, norm) for p in tpl.parts]
        if any(p is None for p in parts):
            return None
        return np.min(np.stack(parts, axis=0), axis=0)
    return None


def NormalConeBox(lows, highs, dim_out: int | None = None, activity_tol: float = 1e-9) -> SetValuedMap:
    """Normal cone mapping of a box, one clause table per coordinate pattern.

    Returns a SetValuedMap whose image at x is the product of per-coordinate
    normal cones: {0} in the interior, a half-line on a facet, the full line
    on a degenerate axis, empty outside the box.
    """
    lows = np.atleast_1d(np.asarray(lows, dtype=float))
    highs = np.atleast_1d(np.asarray(highs, dtype=float))
    n = lows.shape[0]
    handle = _NormalConeBoxMap(
        clauses=(), dim_in=n, dim_out=n, norm_in=Norm("l2"), norm_out=Norm("l2")
    )
    handle.lows = lows
    handle.highs = highs
    handle.activity_tol = activity_tol
    return handle


class _NormalConeBoxMap(SetValuedMap):
    lows: np.ndarray
    highs: np.ndarray
    activity_tol: float

    def image(self, x) -> SetDescriptor:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        tol = self.activity_tol
        lo_out = np.empty(self.dim_in)
        hi_out = np.empty(self.dim_in)
        for i in range(self.dim_in):
            lo, hi, xi = self.lows[i], self.highs[i], x[i]
            if xi < lo - tol or xi > hi + tol:
                return EmptySet()
            at_lo = xi <= lo + tol
            at_hi = xi >= hi - tol
            if at_lo and at_hi:
                lo_out[i], hi_out[i] = -math.inf, math.inf
            elif at_lo:
                lo_out[i], hi_out[i] = -math.inf, 0.0
            elif at_hi:
                lo_out[i], hi_out[i] = 0.0, math.inf
            else:
                lo_out[i], hi_out[i] = 0.0, 0.0
        return BoxSet(tuple(lo_out), tuple(hi_out))

    def dist_to_image(self, ybar, x) -> float:
        return dist_point_set(ybar, self.image(x), self.norm_out)

    def dist_var_y_batch(self, ys: np.ndarray, xs: np.ndarray) -> Optional[np.ndarray]:
        return self.dist_to_image_batch(ys, xs)

    def dist_to_image_batch(self, ybar, xs: np.ndarray) -> Optional[np.ndarray]:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        y = np.atleast_1d(np.asarray(ybar, float))
        if y.ndim == 1:
            y = np.tile(y[:, None], (1, xs.shape[1]))
        tol = self.activity_tol
        outside = np.zeros(xs.shape[1], dtype=bool)
        gaps = np.empty_like(xs)
        for i in range(self.dim_in):
            xi = xs[i]
            lo, hi = self.lows[i], self.highs[i]
            outside |= (xi < lo - tol) | (xi > hi + tol)
            at_lo = xi <= lo + tol
            at_hi = xi >= hi - tol
            yi = y[i]
            # distance of y_i to the per-coordinate cone
            gap_interior = np.abs(yi)
            gap_lo = np.maximum(yi, 0.0)
            gap_hi = np.maximum(-yi, 0.0)
            gap = np.where(at_lo & at_hi, 0.0, np.where(at_lo, gap_lo, np.where(at_hi, gap_hi, gap_interior)))
            gaps[i] = gap
        dist = self.norm_out.value_batch(gaps)
        return np.where(outside, np.inf, dist)


@dataclass
class EpigraphMap(MappingHandle):
    """x -> [phi(x), +inf), the epigraphical profile of a scalar function."""

    phi: MappingHandle = None  # scalar-valued handle
    name: str = ""

    def __post_init__(self):
        if self.phi.dim_out != 1:
            raise ValueError("epigraph needs a scalar-valued function")

    @property
    def dim_in(self) -> int:
        return self.phi.dim_in

    dim_out = 1

    @property
    def norm_in(self) -> Norm:
        return self.phi.norm_in

    @property
    def norm_out(self) -> Norm:
        return self.phi.norm_out

    def image(self, x) -> SetDescriptor:
        return IntervalUnion(((float(self.phi.value(x)[0]), math.inf),))

    def dist_to_image(self, ybar, x) -> float:
        y = float(np.atleast_1d(ybar)[0])
        w = 1.0 if self.norm_out.weights is None else self.norm_out.weights[0]
        return max(float(self.phi.value(x)[0]) - y, 0.0) * w

    def dist_to_image_batch(self, ybar, xs: np.ndarray) -> Optional[np.ndarray]:
        vals = self.phi.value_batch(xs) if hasattr(self.phi, "value_batch") else None
        if vals is None:
            return None
        y = float(np.atleast_1d(ybar)[0])
        w = 1.0 if self.norm_out.weights is None else self.norm_out.weights[0]
        return np.maximum(vals[0] - y, 0.0) * w


@dataclass
class CompositionMap(MappingHandle):
    """outer . inner with a single-valued inner map."""

    inner: MappingHandle = None
    outer: MappingHandle = None
    name: str = ""

    def __post_init__(self):
        if not self.inner.single_valued:
            raise ValueError("composition needs a single-valued inner map")
        if self.inner.dim_out != self.outer.dim_in:
            raise ValueError("composition dimensions do not chain")

    @property
    def dim_in(self) -> int:
        return self.inner.dim_in

    @property
    def dim_out(self) -> int:
        return self.outer.dim_out

    @property
    def norm_in(self) -> Norm:
        return self.inner.norm_in

    @property
    def norm_out(self) -> Norm:
        return self.outer.norm_out

    def image(self, x) -> SetDescriptor:
        return self.outer.image(self.inner.value(x))

    def value(self, x):
        return self.outer.value(self.inner.value(x))

    def value_batch(self, xs):
        return self.outer.value_batch(self.inner.value_batch(xs))

    def dist_to_image(self, ybar, x) -> float:
        return self.outer.dist_to_image(ybar, self.inner.value(x))

    def dist_to_image_batch(self, ybar, xs: np.ndarray) -> Optional[np.ndarray]:
        if not hasattr(self.inner, "value_batch"):
            return None
        mids = self.inner.value_batch(xs)
        return self.outer.dist_to_image_batch(ybar, mids)

    @property
    def single_valued(self) -> bool:
        return self.outer.single_valued


@dataclass
class SumMap(MappingHandle):
    """F + g with single-valued g: image(x) = F(x) + g(x)."""

    base: MappingHandle = None
    shift: MappingHandle = None
    name: str = ""

    def __post_init__(self):
        if not self.shift.single_valued:
            raise ValueError("perturbation term must be single-valued")
        if (self.base.dim_in, self.base.dim_out) != (self.shift.dim_in, self.shift.dim_out):
            raise ValueError("summands must share dimensions")

    @property
    def dim_in(self) -> int:
        return self.base.dim_in

    @property
    def dim_out(self) -> int:
        return self.base.dim_out

    @property
    def norm_in(self) -> Norm:
        return self.base.norm_in

    @property
    def norm_out(self) -> Norm:
        return self.base.norm_out

    def image(self, x) -> SetDescriptor:
        return Translate(self.base.image(x), tuple(self.shift.value(x)))

    def dist_to_image(self, ybar, x) -> float:
        y = np.atleast_1d(np.asarray(ybar, float)) - self.shift.value(x)
        return self.base.dist_to_image(y, x)

    def dist_to_image_batch(self, ybar, xs: np.ndarray) -> Optional[np.ndarray]:
        if not hasattr(self.shift, "value_batch"):
            return None
        g = self.shift.value_batch(xs)
        y = np.atleast_1d(np.asarray(ybar, float))[:, None] - g
        if self.base.single_valued and hasattr(self.base, "value_batch"):
            vals = self.base.value_batch(xs)
            return self.norm_out.value_batch(y - vals)
        if hasattr(self.base, "dist_var_y_batch"):
            return self.base.dist_var_y_batch(y, xs)
        return None

    @property
    def single_valued(self) -> bool:
        return self.base.single_valued

    def value(self, x):
        return np.atleast_1d(self.base.value(x)) + self.shift.value(x)

    def value_batch(self, xs):
        return self.base.value_batch(xs) + self.shift.value_batch(xs)


def _setvalued_dist_batch_var_y(handle: SetValuedMap, ys: np.ndarray, xs: np.ndarray) -> Optional[np.ndarray]:
    """Like dist_to_image_batch but with a separate target point per sample."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    batch = xs.shape[1]
    env = _env_batch(xs, handle.dim_in, handle.p_env)
    out = np.full(batch, np.inf)
    unassigned = np.ones(batch, dtype=bool)
    for cond, tpl in handle.clauses:
        if not unassigned.any():
            break
        if cond is None:
            mask = unassigned.copy()
        else:
            holds = np.asarray(ex.eval_expr_batch(cond, env), dtype=bool)
            mask = unassigned & holds
        if not mask.any():
            continue
        sub_env = {k: v[mask] for k, v in env.items()}
        vals = _template_dist_batch(tpl, ys[:, mask], sub_env, handle.norm_out)
        if vals is None:
            idx = np.where(mask)[0]
            vals = np.array(
                [
                    dist_point_set(ys[:, j], tpl.instantiate({k: float(env[k][j]) for k in env}), handle.norm_out)
                    for j in idx
                ]
            )
        out[mask] = vals
        unassigned &= ~mask
    return out


def image(handle: MappingHandle, x) -> SetDescriptor:
    """Image descriptor of any handle at a point."""
    return handle.image(x)


# ---------------------------------------------------------------------------
# Injectivity-type constants


class AlphaEstimate(NamedTuple):
    value: float
    evidence: str  # "structural" or "sampled"
    samples: int

    def __float__(self):  # pragma: no cover
        return self.value


def _polish_direction(objective: Callable[[np.ndarray], float], starts: np.ndarray, norm_in: Norm) -> float:
    """Local minimization of a direction functional over the unit sphere.

    Parameterized by unnormalized vectors; each candidate is renormalized, so
    the returned value is always achieved at a feasible direction.
    """
    from scipy.optimize import minimize

    best = math.inf
    for v0 in starts:
        def wrapped(v):
            nv = norm_in.value(v)
            if nv < 1e-9:
                return 1e9
            return objective(np.asarray(v) / nv)

        res = minimize(
            wrapped,
            np.asarray(v0, dtype=float),
            method="Nelder-Mead",
            options={"maxiter": 400, "xatol": 1e-10, "fatol": 1e-12},
        )
        best = min(best, float(res.fun))
    return best


def _sampled_direction_min(
    objective_batch: Callable[[np.ndarray], np.ndarray],
    objective_one: Callable[[np.ndarray], float],
    dim: int,
    norm_in: Norm,
    count: int,
    seed: int,
    polish: bool,
) -> tuple[float, int]:
    us = unit_sphere_samples(dim, norm_in, count, seed)
    vals = objective_batch(us.T)
    order = np.argsort(vals)
    best = float(vals[order[0]])
    if polish and dim > 1:
        starts = us[order[: min(3, len(order))]]
        best = min(best, _polish_direction(objective_one, starts, norm_in))
    return best, count


def alpha_linear_info(
    op: LinearOp,
    count: int = DEFAULT_SAMPLE_COUNT,
    seed: int = DEFAULT_SAMPLE_SEED,
    polish: bool = True,
    structural_dim_cap: int = 16,
) -> AlphaEstimate:
    """inf over the unit sphere of |L u| in the target norm.

    Plain l2 on both sides at desk dimension: exact smallest singular value
    (one-sided Jacobi).  Anything else: sampled upper estimate with a local
    polish.
    """
    a = op.matrix
    if op.norm_in.is_plain_l2 and op.norm_out.is_plain_l2 and max(a.shape) <= structural_dim_cap:
        return AlphaEstimate(smallest_singular_value(a), "structural", 0)
    val, n = _sampled_direction_min(
        lambda us: op.norm_out.value_batch(a @ us),
        lambda u: op.norm_out.value(a @ u),
        op.dim_in,
        op.norm_in,
        count,
        seed,
        polish,
    )
    return AlphaEstimate(val, "sampled", n)


def alpha_linear(op: LinearOp, count: int = DEFAULT_SAMPLE_COUNT, seed: int = DEFAULT_SAMPLE_SEED) -> float:
    return alpha_linear_info(op, count, seed).value


def beta_linear(op: LinearOp, count: int = DEFAULT_SAMPLE_COUNT, seed: int = DEFAULT_SAMPLE_SEED) -> float:
    """Banach-type constant: alpha of the transpose under the dual norms."""
    return alpha_linear_info(op.transpose_dual(), count, seed).value


def alpha0_ph_info(
    h: MappingHandle, count: int = DEFAULT_SAMPLE_COUNT, seed: int = DEFAULT_SAMPLE_SEED, polish: bool = True
) -> AlphaEstimate:
    """Sampled inf over the unit sphere of |h(u)| for a positively homogeneous map."""
    if h.dim_in == 1:
        us = unit_sphere_samples(1, h.norm_in, 2, seed)
        vals = [h.norm_out.value(h.value(u)) for u in us]
        return AlphaEstimate(float(min(vals)), "sampled", 2)
    val, n = _sampled_direction_min(
        lambda us: h.norm_out.value_batch(h.value_batch(us)),
        lambda u: h.norm_out.value(h.value(u)),
        h.dim_in,
        h.norm_in,
        count,
        seed,
        polish,
    )
    return AlphaEstimate(val, "sampled", n)


def alpha0_ph(h: MappingHandle, count: int = DEFAULT_SAMPLE_COUNT, seed: int = DEFAULT_SAMPLE_SEED) -> float:
    return alpha0_ph_info(h, count, seed).value


def alpha_fan_info(
    fan: Fan, count: int = DEFAULT_SAMPLE_COUNT, seed: int = DEFAULT_SAMPLE_SEED, polish: bool = True
) -> AlphaEstimate:
    """inf over the unit sphere of dist(0, fan(u)).

    Finite-set fans with a single generator under plain l2 reduce to the
    structural linear case; otherwise sampled (hull fans need an l2 target
    for the inner min-norm oracle).
    """
    if fan.hull == "finite-set" and len(fan.generators) == 1:
        return alpha_linear_info(
            LinearOp(fan.generators[0], norm_in=fan.norm_in, norm_out=fan.norm_out), count, seed
        )
    if fan.dim_in == 1:
        us = unit_sphere_samples(1, fan.norm_in, 2, seed)
        vals = [fan.dist_zero(u) for u in us]
        return AlphaEstimate(float(min(vals)), "sampled", 2)
    if fan.hull == "convex-hull":
        count = min(count, 4000)  # each sample runs a min-norm solve
    val, n = _sampled_direction_min(
        fan.dist_zero_batch,
        fan.dist_zero,
        fan.dim_in,
        fan.norm_in,
        count,
        seed,
        polish,
    )
    return AlphaEstimate(val, "sampled", n)


def alpha_fan(fan: Fan, count: int = DEFAULT_SAMPLE_COUNT, seed: int = DEFAULT_SAMPLE_SEED) -> float:
    return alpha_fan_info(fan, count, seed).value
