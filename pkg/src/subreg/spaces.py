"""Normed spaces, set descriptors, and exact point-to-set distances.

Descriptors form a small closed algebra: every variant either has a
closed-form distance oracle under the norms it supports, or the computation
raises :class:`NoExactOracle` so the caller can fall back to sampling.  The
distance to the empty set is +inf by convention and participates in minima
without poisoning them.

Sets can be written as text, e.g. ``interval(1, inf)``,
``union(point(0), interval(1, inf))``, ``ball([0, 0], 1, l2)``; arguments may
be expressions in x1..xn, making the result a template instantiated per
point (that is how set-valued mappings declare their images).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import expr as ex
from .linalg import cone_least_squares, min_norm_point, project_polyhedron

__all__ = [
    "Norm",
    "NoExactOracle",
    "DimensionMismatch",
    "SetDescriptor",
    "EmptySet",
    "FinitePoints",
    "IntervalUnion",
    "BoxSet",
    "Ball",
    "HalfSpaces",
    "TranslatedCone",
    "ConvexHullPoints",
    "UnionSet",
    "Translate",
    "Inflate",
    "dist_point_set",
    "set_contains",
    "unit_sphere_samples",
    "rng_from",
    "parse_set",
    "SetTemplate",
]

_TAGS = ("l1", "l2", "linf")


class NoExactOracle(RuntimeError):
    """Raised when a norm/descriptor combination has no exact distance formula."""


class DimensionMismatch(ValueError):
    pass


def rng_from(seed: int, *key: int) -> np.random.Generator:
    """Deterministic generator derived from a root seed and a key path."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed),) + tuple(int(k) for k in key))))


@dataclass(frozen=True)
class Norm:
    """One of l1 / l2 / linf, optionally with positive diagonal weights."""

    tag: str = "l2"
    weights: Optional[tuple] = None

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown norm tag {self.tag!r}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.ndim != 1 or np.any(w <= 0):
                raise ValueError("weights must be a 1-d positive vector")
            object.__setattr__(self, "weights", tuple(float(v) for v in w))

    def _weighted(self, v: np.ndarray) -> np.ndarray:
        if self.weights is None:
            return v
        w = np.asarray(self.weights)
        if w.shape[0] != v.shape[0]:
            raise DimensionMismatch(
                f"norm weights have dim {w.shape[0]}, vector has dim {v.shape[0]}"
            )
        return v * (w if v.ndim == 1 else w[:, None])

    def value(self, v) -> float:
        v = self._weighted(np.atleast_1d(np.asarray(v, dtype=float)))
        if self.tag == "l1":
            return float(np.sum(np.abs(v)))
        if self.tag == "l2":
            return float(np.sqrt(np.sum(v * v)))
        return float(np.max(np.abs(v))) if v.size else 0.0

    def value_batch(self, v: np.ndarray) -> np.ndarray:
        """Norms of the columns of an (n, B) array."""
        v = self._weighted(np.asarray(v, dtype=float))
        if self.tag == "l1":
            return np.sum(np.abs(v), axis=0)
        if self.tag == "l2":
            return np.sqrt(np.sum(v * v, axis=0))
        return np.max(np.abs(v), axis=0)

    def dual(self) -> "Norm":
        dual_tag = {"l1": "linf", "linf": "l1", "l2": "l2"}[self.tag]
        if self.weights is None:
            return Norm(dual_tag)
        return Norm(dual_tag, tuple(1.0 / w for w in self.weights))

    @property
    def is_plain_l2(self) -> bool:
        return self.tag == "l2" and self.weights is None

    def describe(self) -> str:
        if self.weights is None:
            return self.tag
        return f"{self.tag}[{','.join(repr(w) for w in self.weights)}]"


# ---------------------------------------------------------------------------
# Descriptors


class SetDescriptor:
    dim: int


@dataclass(frozen=True)
class EmptySet(SetDescriptor):
    dim: int = 1


@dataclass(frozen=True)
class FinitePoints(SetDescriptor):
    points: tuple = ()  # tuple of point tuples

    def __post_init__(self):
        pts = tuple(tuple(float(v) for v in p) for p in self.points)
        if not pts:
            raise ValueError("FinitePoints needs at least one point (use EmptySet)")
        if len({len(p) for p in pts}) != 1:
            raise DimensionMismatch("points of mixed dimension")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return len(self.points[0])

    def array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)


@dataclass(frozen=True)
class IntervalUnion(SetDescriptor):
    """Finite union of closed intervals of the real line (endpoints may be inf)."""

    intervals: tuple = ()
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        for a, b in ivs:
            if a > b:
                raise ValueError(f"empty interval [{a}, {b}]")
        object.__setattr__(self, "intervals", ivs)


@dataclass(frozen=True)
class BoxSet(SetDescriptor):
    """Product of per-axis closed intervals."""

    lows: tuple = ()
    highs: tuple = ()

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lows)
        hi = tuple(float(v) for v in self.highs)
        if len(lo) != len(hi):
            raise DimensionMismatch("box bounds of mixed dimension")
        for a, b in zip(lo, hi):
            if a > b:
                raise ValueError(f"empty box axis [{a}, {b}]")
        object.__setattr__(self, "lows", lo)
        object.__setattr__(self, "highs", hi)

    @property
    def dim(self) -> int:
        return len(self.lows)


@dataclass(frozen=True)
class Ball(SetDescriptor):
    center: tuple = ()
    radius: float = 1.0
    norm: Norm = Norm("l2")

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if self.radius < 0:
            raise ValueError("negative ball radius")

    @property
    def dim(self) -> int:
        return len(self.center)


@dataclass(frozen=True)
class HalfSpaces(SetDescriptor):
    """{x : rows . x <= offsets}; nonemptiness checked lazily via an LP."""

    rows: tuple = ()
    offsets: tuple = ()

    def __post_init__(self):
        rows = tuple(tuple(float(v) for v in r) for r in self.rows)
        offs = tuple(float(v) for v in self.offsets)
        if len(rows) != len(offs) or not rows:
            raise ValueError("need matching nonempty rows and offsets")
        if len({len(r) for r in rows}) != 1:
            raise DimensionMismatch("rows of mixed dimension")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "offsets", offs)

    @property
    def dim(self) -> int:
        return len(self.rows[0])

    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.rows, dtype=float), np.asarray(self.offsets, dtype=float)


@dataclass(frozen=True)
class TranslatedCone(SetDescriptor):
    """apex + cone(generators)."""

    apex: tuple = ()
    generators: tuple = ()

    def __post_init__(self):
        apex = tuple(float(v) for v in self.apex)
        gens = tuple(tuple(float(v) for v in g) for g in self.generators)
        if any(len(g) != len(apex) for g in gens):
            raise DimensionMismatch("generators of mixed dimension")
        object.__setattr__(self, "apex", apex)
        object.__setattr__(self, "generators", gens)

    @property
    def dim(self) -> int:
        return len(self.apex)


@dataclass(frozen=True)
class ConvexHullPoints(SetDescriptor):
    points: tuple = ()

    def __post_init__(self):
        pts = tuple(tuple(float(v) for v in p) for p in self.points)
        if not pts:
            raise ValueError("hull needs at least one point")
        if len({len(p) for p in pts}) != 1:
            raise DimensionMismatch("points of mixed dimension")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return len(self.points[0])


@dataclass(frozen=True)
class UnionSet(SetDescriptor):
    parts: tuple = ()

    def __post_init__(self):
        if not self.parts:
            raise ValueError("empty union (use EmptySet)")
        dims = {p.dim for p in self.parts if not isinstance(p, EmptySet)}
        if len(dims) > 1:
            raise DimensionMismatch("union parts of mixed dimension")
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def dim(self) -> int:
        for p in self.parts:
            if not isinstance(p, EmptySet):
                return p.dim
        return self.parts[0].dim


@dataclass(frozen=True)
class Translate(SetDescriptor):
    base: SetDescriptor = None
    shift: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "shift", tuple(float(v) for v in self.shift))
        if not isinstance(self.base, EmptySet) and self.base.dim != len(self.shift):
            raise DimensionMismatch("shift dimension does not match the base set")

    @property
    def dim(self) -> int:
        return len(self.shift)


@dataclass(frozen=True)
class Inflate(SetDescriptor):
    """base + radius * (unit ball of norm)."""

    base: SetDescriptor = None
    radius: float = 0.0
    norm: Norm = Norm("l2")

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("negative inflation radius")

    @property
    def dim(self) -> int:
        return self.base.dim


# ---------------------------------------------------------------------------
# Distances


def _as_point(y, dim: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(y, dtype=float))
    if arr.shape[0] != dim:
        raise DimensionMismatch(f"point has dim {arr.shape[0]}, set has dim {dim}")
    return arr


@lru_cache(maxsize=256)
def _halfspaces_nonempty(rows: tuple, offsets: tuple) -> bool:
    from scipy.optimize import linprog

    a = np.asarray(rows, dtype=float)
    b = np.asarray(offsets, dtype=float)
    res = linprog(
        np.zeros(a.shape[1]),
        A_ub=a,
        b_ub=b,
        bounds=[(None, None)] * a.shape[1],
        method="highs",
    )
    return bool(res.status != 2)


def _interval_dist(y: float, lo: float, hi: float) -> float:
    if y < lo:
        return lo - y
    if y > hi:
        return y - hi
    return 0.0


def dist_point_set(y, s: SetDescriptor, norm: Norm = Norm("l2")) -> float:
    """Distance from point ``y`` to descriptor ``s`` in ``norm``.

    Exact by construction for every supported combination; +inf for empty
    sets; raises :class:`NoExactOracle` when the combination has no exact
    formula (e.g. half-space polyhedra under l1).
    """
    if isinstance(s, EmptySet):
        return math.inf
    y = _as_point(y, s.dim)
    if isinstance(s, FinitePoints):
        pts = s.array()
        return float(min(norm.value(y - p) for p in pts))
    if isinstance(s, IntervalUnion):
        if not s.intervals:
            return math.inf
        gap = min(_interval_dist(float(y[0]), a, b) for a, b in s.intervals)
        w = 1.0 if norm.weights is None else norm.weights[0]
        return gap * w
    if isinstance(s, BoxSet):
        clamped = np.clip(y, s.lows, s.highs)
        return norm.value(y - clamped)
    if isinstance(s, Ball):
        gap = s.norm.value(y - np.asarray(s.center))
        if gap <= s.radius:
            return 0.0
        if s.norm.tag == norm.tag and s.norm.weights == norm.weights:
            return max(gap - s.radius, 0.0)
        if s.norm.tag == "linf" and s.norm.weights is None:
            c = np.asarray(s.center)
            box = BoxSet(tuple(c - s.radius), tuple(c + s.radius))
            return dist_point_set(y, box, norm)
        raise NoExactOracle(
            f"no exact distance for a {s.norm.describe()} ball under {norm.describe()}"
        )
    if isinstance(s, HalfSpaces):
        a, b = s.matrices()
        if np.all(a @ y <= b + 1e-12):
            return 0.0
        if not _halfspaces_nonempty(s.rows, s.offsets):
            return math.inf
        if norm.is_plain_l2:
            proj = project_polyhedron(y, a, b)
            return float(np.linalg.norm(y - proj))
        raise NoExactOracle(
            f"no exact distance to a half-space polyhedron under {norm.describe()}"
        )
    if isinstance(s, TranslatedCone):
        z = y - np.asarray(s.apex)
        if not s.generators:
            return norm.value(z)
        g = np.asarray(s.generators, dtype=float)
        lam = cone_least_squares(z, g)
        gap = float(np.linalg.norm(g.T @ lam - z))
        if gap <= 1e-10 * max(1.0, float(np.linalg.norm(z))):
            return 0.0
        if norm.is_plain_l2:
            return gap
        raise NoExactOracle(f"no exact distance to a cone under {norm.describe()}")
    if isinstance(s, ConvexHullPoints):
        pts = np.asarray(s.points, dtype=float)
        if norm.is_plain_l2:
            mn, _ = min_norm_point(pts - y[None, :])
            return float(np.linalg.norm(mn))
        if _hull_contains(pts, y):
            return 0.0
        raise NoExactOracle(f"no exact distance to a hull under {norm.describe()}")
    if isinstance(s, UnionSet):
        best = math.inf
        failed = None
        for part in s.parts:
            try:
                best = min(best, dist_point_set(y, part, norm))
            except NoExactOracle as err:
                failed = err
            if best == 0.0:
                return 0.0
        if failed is not None:
            raise failed
        return best
    if isinstance(s, Translate):
        return dist_point_set(y - np.asarray(s.shift), s.base, norm)
    if isinstance(s, Inflate):
        if s.norm.tag == norm.tag and s.norm.weights == norm.weights:
            base = dist_point_set(y, s.base, norm)
            return max(base - s.radius, 0.0)
        base = dist_point_set(y, s.base, s.norm)
        if base <= s.radius:
            return 0.0
        raise NoExactOracle(
            f"no exact distance for {s.norm.describe()} inflation under {norm.describe()}"
        )
    raise TypeError(f"not a set descriptor: {s!r}")


def _hull_contains(pts: np.ndarray, y: np.ndarray, tol: float = 1e-9) -> bool:
    from scipy.optimize import linprog

    k, n = pts.shape
    a_eq = np.vstack([pts.T, np.ones((1, k))])
    b_eq = np.concatenate([y, [1.0]])
    res = linprog(np.zeros(k), A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * k, method="highs")
    return bool(res.status == 0)


def set_contains(y, s: SetDescriptor, norm: Norm = Norm("l2"), tol: float = 1e-9) -> bool:
    if isinstance(s, EmptySet):
        return False
    if isinstance(s, HalfSpaces):
        a, b = s.matrices()
        return bool(np.all(a @ _as_point(y, s.dim) <= b + tol))
    if isinstance(s, ConvexHullPoints):
        return _hull_contains(np.asarray(s.points, dtype=float), _as_point(y, s.dim), tol)
    if isinstance(s, UnionSet):
        return any(set_contains(y, p, norm, tol) for p in s.parts)
    if isinstance(s, Translate):
        return set_contains(np.asarray(y, dtype=float) - np.asarray(s.shift), s.base, norm, tol)
    try:
        return dist_point_set(y, s, norm) <= tol
    except NoExactOracle:
        if isinstance(s, Inflate):
            return dist_point_set(y, s.base, s.norm) <= s.radius + tol
        raise


# ---------------------------------------------------------------------------
# Sphere sampling


def unit_sphere_samples(dim: int, norm: Norm, count: int, seed: int) -> np.ndarray:
    """Deterministic (count, dim) array of unit-norm directions.

    Layout: signed coordinate axes first, then the +- normalized all-ones
    direction, then (for dim <= 2) a uniform angular grid, then a seeded
    random tail.  The structured prefix makes minima of piecewise-linear
    functionals over the sphere land on their exact minimizers in the common
    axis/diagonal-aligned cases.  Every row has unit norm to 1e-12.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if count < 1:
        raise ValueError("count must be >= 1")
    if dim == 1:
        signs = np.empty((count, 1))
        signs[::2] = 1.0
        signs[1::2] = -1.0
        w = 1.0 if norm.weights is None else norm.weights[0]
        return signs / w
    rows: list[np.ndarray] = []
    eye = np.eye(dim)
    for i in range(dim):
        rows.append(eye[i])
        rows.append(-eye[i])
    ones = np.ones(dim)
    rows.append(ones)
    rows.append(-ones)
    if dim == 2:
        remaining = max(0, count - len(rows))
        grid_n = (2 * remaining // 3) // 4 * 4
        if grid_n >= 4:
            theta = 2.0 * math.pi * np.arange(grid_n) / grid_n
            rows.extend(np.stack([np.cos(theta), np.sin(theta)], axis=1))
    rng = rng_from(seed, dim, len(rows))
    parts = [np.stack(rows, axis=0)[:count]]
    total = parts[0].shape[0]
    while total < count:
        block = rng.normal(size=(count - total, dim))
        block = block[np.linalg.norm(block, axis=1) > 1e-12]
        parts.append(block)
        total += block.shape[0]
    out = np.concatenate(parts, axis=0)[:count]
    for _ in range(2):  # normalize twice: exact to well below 1e-12
        out = out / norm.value_batch(out.T)[:, None]
    return out


# ---------------------------------------------------------------------------
# Set grammar


@dataclass(frozen=True)
class SetTemplate:
    """Parsed set expression; arguments may reference x/p variables."""

    kind: str
    args: tuple = ()
    norm: Optional[Norm] = None
    parts: tuple = ()  # nested templates for union/translate/inflate

    def free_vars(self) -> set[str]:
        out: set[str] = set()
        for a in self.args:
            if isinstance(a, tuple):
                for e in a:
                    out |= ex.free_vars(e)
            else:
                out |= ex.free_vars(a)
        for p in self.parts:
            out |= p.free_vars()
        return out

    @property
    def is_constant(self) -> bool:
        return not self.free_vars()

    def instantiate(self, env: dict | None = None) -> SetDescriptor:
        env = env or {}
        ev = lambda e: float(ex.eval_expr(e, env))
        k = self.kind
        if k == "empty":
            return EmptySet()
        if k == "reals":
            return IntervalUnion(((-math.inf, math.inf),))
        if k == "point":
            return FinitePoints((tuple(ev(e) for e in self.args),))
        if k == "points":
            return FinitePoints(tuple(tuple(ev(e) for e in vec) for vec in self.args))
        if k == "interval":
            return IntervalUnion(((ev(self.args[0]), ev(self.args[1])),))
        if k == "box":
            lows = tuple(ev(pair[0]) for pair in self.args)
            highs = tuple(ev(pair[1]) for pair in self.args)
            return BoxSet(lows, highs)
        if k == "ball":
            return Ball(tuple(ev(e) for e in self.args[0]), ev(self.args[1]), self.norm)
        if k == "halfspaces":
            rows = tuple(tuple(ev(e) for e in r[:-1]) for r in self.args)
            offs = tuple(ev(r[-1]) for r in self.args)
            return HalfSpaces(rows, offs)
        if k == "cone":
            apex = tuple(ev(e) for e in self.args[0])
            gens = tuple(tuple(ev(e) for e in g) for g in self.args[1:])
            return TranslatedCone(apex, gens)
        if k == "hull":
            return ConvexHullPoints(tuple(tuple(ev(e) for e in p) for p in self.args))
        if k == "union":
            return UnionSet(tuple(p.instantiate(env) for p in self.parts))
        if k == "translate":
            return Translate(self.parts[0].instantiate(env), tuple(ev(e) for e in self.args))
        if k == "inflate":
            return Inflate(self.parts[0].instantiate(env), ev(self.args[0]), self.norm)
        raise AssertionError(k)


def parse_set(text: str) -> SetTemplate:
    """Parse a set expression such as ``union(point(0), interval(1, inf))``."""
    parser = _SetParser(text)
    tpl = parser.set_expr()
    if parser.p.cur.kind != "end":
        raise ex.ExprSyntaxError(f"unexpected '{parser.p.cur.text}'", parser.p.cur.col)
    return tpl


class _SetParser:
    def __init__(self, text: str):
        self.p = ex._Parser(text)

    def set_expr(self) -> SetTemplate:
        tok = self.p.cur
        if tok.kind != "ident":
            raise ex.ExprSyntaxError("expected a set expression", tok.col)
        name = tok.text
        self.p.advance()
        if name in ("empty", "reals"):
            if self.p.accept("("):
                self.p.expect(")")
            return SetTemplate(kind=name)
        if name not in (
            "point", "points", "interval", "box", "ball", "halfspaces",
            "cone", "hull", "union", "translate", "inflate",
        ):
            raise ex.ExprSyntaxError(f"unknown set constructor '{name}'", tok.col)
        self.p.expect("(")
        if name == "union":
            parts = [self.set_expr()]
            while self.p.accept(","):
                parts.append(self.set_expr())
            self.p.expect(")")
            return SetTemplate(kind="union", parts=tuple(parts))
        if name == "translate":
            base = self.set_expr()
            self.p.expect(",")
            shift = self.vector_or_scalar()
            self.p.expect(")")
            return SetTemplate(kind="translate", args=shift, parts=(base,))
        if name == "inflate":
            base = self.set_expr()
            self.p.expect(",")
            r = self.scalar()
            norm = Norm("l2")
            if self.p.accept(","):
                norm = self.norm_tag()
            self.p.expect(")")
            return SetTemplate(kind="inflate", args=(r,), norm=norm, parts=(base,))
        if name == "interval":
            a = self.scalar()
            self.p.expect(",")
            b = self.scalar()
            self.p.expect(")")
            return SetTemplate(kind="interval", args=(a, b))
        if name == "point":
            args = [self.scalar()]
            while self.p.accept(","):
                args.append(self.scalar())
            self.p.expect(")")
            return SetTemplate(kind="point", args=tuple(args))
        if name == "points":
            vecs = [self.vector_or_scalar()]
            while self.p.accept(","):
                vecs.append(self.vector_or_scalar())
            self.p.expect(")")
            return SetTemplate(kind="points", args=tuple(vecs))
        if name == "box":
            pairs = [self.vector_or_scalar()]
            while self.p.accept(","):
                pairs.append(self.vector_or_scalar())
            self.p.expect(")")
            for pr in pairs:
                if len(pr) != 2:
                    raise ex.ExprSyntaxError("box axes are [lo, hi] pairs", self.p.cur.col)
            return SetTemplate(kind="box", args=tuple(pairs))
        if name == "ball":
            center = self.vector_or_scalar()
            self.p.expect(",")
            r = self.scalar()
            norm = Norm("l2")
            if self.p.accept(","):
                norm = self.norm_tag()
            self.p.expect(")")
            return SetTemplate(kind="ball", args=(center, r), norm=norm)
        if name in ("halfspaces", "cone", "hull"):
            vecs = [self.vector_or_scalar()]
            while self.p.accept(","):
                vecs.append(self.vector_or_scalar())
            self.p.expect(")")
            return SetTemplate(kind=name, args=tuple(vecs))
        raise AssertionError(name)

    def scalar(self) -> ex.Expr:
        node = self.p.sum()
        ex._require_scalar(node, "set argument")
        return node

    def vector_or_scalar(self) -> tuple:
        if self.p.cur.kind == "op" and self.p.cur.text == "[":
            self.p.advance()
            items = [self.scalar()]
            while self.p.accept(","):
                items.append(self.scalar())
            self.p.expect("]")
            return tuple(items)
        return (self.scalar(),)

    def norm_tag(self) -> Norm:
        tok = self.p.cur
        if tok.kind == "ident" and tok.text in _TAGS:
            self.p.advance()
            return Norm(tok.text)
        raise ex.ExprSyntaxError("expected a norm tag (l1, l2, linf)", tok.col)
