"""Line-oriented problem documents: mappings, anchors, schedule, tasks.

A document is a sequence of sections.  `[mapping NAME]` declares an evaluable
object (expression map, linear operator, positively homogeneous map, fan,
set-valued clause table, max-affine function, normal cone to a box, or a
catalog reference), `[anchor]` fixes xbar/ybar/pbar, `[schedule]` overrides
the sampling schedule, and each `[task ID]` requests one operation.  Keys are
`name = value`; `#` starts a full-line comment; values may be double-quoted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import expr as ex
from .convexity import MaxAffineFn, OrderCone
from .mappings import (
    CompositionMap,
    Fan,
    LinearOp,
    NormalConeBox,
    PHMapping,
    SetValuedMap,
    SingleMap,
)
from .rates import DEFAULT_SCHEDULE, SamplingSchedule
from .spaces import Norm, parse_set

__all__ = ["ProblemError", "Task", "ProblemSpec", "parse_problem"]

MAPPING_KINDS = (
    "expr",
    "linear",
    "ph",
    "fan",
    "setvalued",
    "maxaffine",
    "normalcone",
    "composition",
    "catalog",
)


class ProblemError(ValueError):
    """Document-level parse or validation failure, with a line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass
class Task:
    task_id: str
    op: str
    args: dict = dc_field(default_factory=dict)


@dataclass
class ProblemSpec:
    mappings: dict = dc_field(default_factory=dict)
    anchors: dict = dc_field(default_factory=dict)  # xbar / ybar / pbar tuples
    schedule: SamplingSchedule = DEFAULT_SCHEDULE
    tasks: list = dc_field(default_factory=list)
    source_text: str = ""


def _unquote(value: str) -> str:
    v = value.strip()
    if len(v) >= 2 and v[0] == '"' and v[-1] == '"':
        return v[1:-1]
    return v


def _parse_float(value: str, line: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise ProblemError(f"expected a number, got {value!r}", line) from None


def _parse_vector(value: str, line: int) -> tuple:
    items = [s for s in value.replace(",", " ").split() if s]
    if not items:
        raise ProblemError("expected a vector of numbers", line)
    return tuple(_parse_float(s, line) for s in items)


def _parse_matrix(value: str, line: int) -> np.ndarray:
    rows = [r.strip() for r in value.split(";") if r.strip()]
    if not rows:
        raise ProblemError("expected matrix rows", line)
    data = [_parse_vector(r, line) for r in rows]
    if len({len(r) for r in data}) != 1:
        raise ProblemError("matrix rows of unequal length", line)
    return np.asarray(data, dtype=float)


def _parse_norm(value: str, line: int) -> Norm:
    v = _unquote(value)
    if v not in ("l1", "l2", "linf"):
        raise ProblemError(f"unknown norm {v!r} (expected l1, l2, or linf)", line)
    return Norm(v)


def _numbered(keys: dict, stem: str) -> list:
    """Values of stem1, stem2, ... in numeric order."""
    found = []
    for key, (value, line) in keys.items():
        if key.startswith(stem) and key[len(stem):].isdigit():
            found.append((int(key[len(stem):]), value, line))
    return [(v, ln) for _, v, ln in sorted(found)]


class _Section:
    def __init__(self, header: str, name: str, line: int):
        self.header = header
        self.name = name
        self.line = line
        self.keys: dict = {}  # key -> (value, line)

    def take(self, key: str, default=None):
        if key in self.keys:
            value, _ = self.keys.pop(key)
            return value
        return default

    def take_required(self, key: str):
        if key not in self.keys:
            raise ProblemError(f"section [{self.header}] is missing key {key!r}", self.line)
        value, _ = self.keys.pop(key)
        return value

    def line_of(self, key: str) -> int:
        return self.keys[key][1] if key in self.keys else self.line


def _split_sections(text: str) -> list:
    sections: list = []
    current: Optional[_Section] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            inner = line[1:-1].strip()
            parts = inner.split(None, 1)
            header = parts[0]
            name = parts[1].strip() if len(parts) > 1 else ""
            if header not in ("mapping", "anchor", "schedule", "task"):
                raise ProblemError(f"unknown section [{inner}]", lineno)
            if header in ("mapping", "task") and not name:
                raise ProblemError(f"[{header}] needs a name", lineno)
            current = _Section(header, name, lineno)
            sections.append(current)
            continue
        if "=" not in line:
            raise ProblemError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ProblemError("key/value pair outside any section", lineno)
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ProblemError("empty key", lineno)
        if key in current.keys:
            raise ProblemError(f"duplicate key {key!r} in section [{current.header}]", lineno)
        current.keys[key] = (_unquote(value), lineno)
    return sections


def _build_expr_map(sec: _Section, ph: bool):
    text = sec.take_required("expr")
    kwargs = dict(
        expr=text,
        norm_in=_parse_norm(sec.take("norm_in", "l2"), sec.line),
        norm_out=_parse_norm(sec.take("norm_out", "l2"), sec.line),
        name=sec.name,
    )
    dim_in = sec.take("dim_in")
    if dim_in is not None:
        kwargs["dim_in"] = int(_parse_float(dim_in, sec.line))
    try:
        return (PHMapping if ph else SingleMap)(**kwargs)
    except (ex.ExprError, ValueError) as err:
        raise ProblemError(f"mapping {sec.name!r}: {err}", sec.line) from None


def _build_setvalued(sec: _Section):
    clauses = []
    entries = _numbered(sec.keys, "clause")
    for key in [k for k in list(sec.keys) if k.startswith("clause") and k[6:].isdigit()]:
        del sec.keys[key]
    if not entries:
        raise ProblemError(f"set-valued mapping {sec.name!r} needs clause1, clause2, ...", sec.line)
    for value, line in entries:
        if "=>" not in value:
            raise ProblemError("clause must read '<condition> => <set>'", line)
        cond_text, set_text = value.split("=>", 1)
        cond_text = cond_text.strip()
        try:
            cond = None if cond_text == "otherwise" else ex.parse_condition(cond_text)
            tpl = parse_set(set_text.strip())
        except ex.ExprError as err:
            raise ProblemError(f"clause: {err}", line) from None
        clauses.append((cond, tpl))
    dim_in = int(_parse_float(sec.take("dim_in", "1"), sec.line))
    dim_out = int(_parse_float(sec.take("dim_out", "1"), sec.line))
    return SetValuedMap(
        clauses=tuple(clauses),
        dim_in=dim_in,
        dim_out=dim_out,
        norm_in=_parse_norm(sec.take("norm_in", "l2"), sec.line),
        norm_out=_parse_norm(sec.take("norm_out", "l2"), sec.line),
        name=sec.name,
    )


def _build_fan(sec: _Section):
    mats = _numbered(sec.keys, "matrix")
    for key in [k for k in list(sec.keys) if k.startswith("matrix") and k[6:].isdigit()]:
        del sec.keys[key]
    if not mats:
        raise ProblemError(f"fan {sec.name!r} needs matrix1, matrix2, ...", sec.line)
    generators = [_parse_matrix(v, ln) for v, ln in mats]
    return Fan(
        generators=generators,
        hull=sec.take("hull", "finite-set"),
        norm_in=_parse_norm(sec.take("norm_in", "l2"), sec.line),
        norm_out=_parse_norm(sec.take("norm_out", "l2"), sec.line),
        name=sec.name,
    )


def _parse_pieces(value: str, line: int) -> list:
    pieces = []
    for chunk in value.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if not (chunk.startswith("(") and chunk.endswith(")")):
            raise ProblemError(f"piece {chunk!r} must be parenthesized", line)
        nums = _parse_vector(chunk[1:-1], line)
        if len(nums) < 2:
            raise ProblemError("a piece needs at least one slope entry and an offset", line)
        pieces.append((nums[:-1], nums[-1]))
    if not pieces:
        raise ProblemError("no pieces given", line)
    return pieces


def _build_maxaffine(sec: _Section):
    pieces = _parse_pieces(sec.take_required("pieces"), sec.line)
    quad = sec.take("quad")
    q = _parse_matrix(quad, sec.line) if quad is not None else None
    try:
        return MaxAffineFn(pieces, quad=q)
    except ValueError as err:
        raise ProblemError(f"mapping {sec.name!r}: {err}", sec.line) from None


def _build_normalcone(sec: _Section):
    lows = _parse_vector(sec.take_required("lows"), sec.line)
    highs = _parse_vector(sec.take_required("highs"), sec.line)
    if len(lows) != len(highs):
        raise ProblemError("lows and highs must have matching lengths", sec.line)
    return NormalConeBox(lows, highs)


def _resolve_catalog(sec: _Section):
    use = sec.take_required("use")
    from . import catalog

    try:
        return catalog.mapping_for(use)
    except KeyError:
        raise ProblemError(f"unknown catalog example {use!r}", sec.line) from None


def _build_mapping(sec: _Section, mappings: dict):
    kind = sec.take_required("kind")
    if kind not in MAPPING_KINDS:
        raise ProblemError(f"unknown mapping kind {kind!r}", sec.line)
    if kind == "expr":
        return _build_expr_map(sec, ph=False)
    if kind == "ph":
        return _build_expr_map(sec, ph=True)
    if kind == "linear":
        return LinearOp(
            matrix=_parse_matrix(sec.take_required("matrix"), sec.line),
            norm_in=_parse_norm(sec.take("norm_in", "l2"), sec.line),
            norm_out=_parse_norm(sec.take("norm_out", "l2"), sec.line),
            name=sec.name,
        )
    if kind == "fan":
        return _build_fan(sec)
    if kind == "setvalued":
        return _build_setvalued(sec)
    if kind == "maxaffine":
        return _build_maxaffine(sec)
    if kind == "normalcone":
        return _build_normalcone(sec)
    if kind == "composition":
        inner_name = sec.take_required("inner")
        outer_name = sec.take_required("outer")
        for ref in (inner_name, outer_name):
            if ref not in mappings:
                raise ProblemError(f"unknown mapping {ref!r}", sec.line)
        try:
            return CompositionMap(inner=mappings[inner_name], outer=mappings[outer_name], name=sec.name)
        except ValueError as err:
            raise ProblemError(f"mapping {sec.name!r}: {err}", sec.line) from None
    return _resolve_catalog(sec)


def _build_schedule(sec: _Section) -> SamplingSchedule:
    base = DEFAULT_SCHEDULE
    try:
        return SamplingSchedule(
            r0=float(sec.take("r0", base.r0)),
            decay=float(sec.take("decay", base.decay)),
            shells=int(float(sec.take("shells", base.shells))),
            points=int(float(sec.take("points", base.points))),
            seed=int(float(sec.take("seed", base.seed))),
        )
    except ValueError as err:
        raise ProblemError(f"schedule: {err}", sec.line) from None


def _parse_cone(value: str, line: int) -> OrderCone:
    v = value.strip()
    if v in ("Rm+", "rm+"):
        return None  # resolved to the nonnegative orthant at use time
    return OrderCone(tuple(map(tuple, _parse_matrix(v, line).T)))


_TASK_FLOAT_KEYS = (
    "tau",
    "delta",
    "zeta",
    "radius",
    "step",
    "assume_eps",
    "expect_value",
    "expect_modulus",
    "expect_measured",
    "rtol",
    "expect_final_min_le",
)
_TASK_INT_KEYS = ("param_dim", "directions", "count", "resolution")
_TASK_VECTOR_KEYS = ("xbar", "ybar", "pbar")
_TASK_NAME_KEYS = ("mapping", "inner", "outer", "base", "field", "fan", "h", "perturbation")


def _build_task(sec: _Section, mappings: dict) -> Task:
    op = sec.take_required("op")
    args: dict = {}
    for key in list(sec.keys):
        value, line = sec.keys.pop(key)
        if key in _TASK_FLOAT_KEYS:
            args[key] = _parse_float(value, line)
        elif key in _TASK_INT_KEYS:
            args[key] = int(_parse_float(value, line))
        elif key in _TASK_VECTOR_KEYS:
            args[key] = _parse_vector(value, line)
        elif key in _TASK_NAME_KEYS:
            if value not in mappings:
                raise ProblemError(f"unknown mapping {value!r}", line)
            args[key] = value
        elif key == "components":
            names = [s.strip() for s in value.split(",") if s.strip()]
            for ref in names:
                if ref not in mappings:
                    raise ProblemError(f"unknown mapping {ref!r}", line)
            args[key] = tuple(names)
        elif key == "cone":
            args[key] = _parse_cone(value, line)
        elif key == "expect":
            if value not in ("pass", "fail"):
                raise ProblemError(f"expect must be 'pass' or 'fail', got {value!r}", line)
            args[key] = value
        elif key in ("theorem", "source", "set"):
            args[key] = value
        else:
            raise ProblemError(f"unknown task key {key!r}", line)
    return Task(task_id=sec.name, op=op, args=args)


def parse_problem(text: str) -> ProblemSpec:
    """Parse a problem document into a validated ProblemSpec."""
    sections = _split_sections(text)
    spec = ProblemSpec(source_text=text)
    seen_tasks: set = set()
    for sec in sections:
        if sec.header == "mapping":
            if sec.name in spec.mappings:
                raise ProblemError(f"duplicate mapping {sec.name!r}", sec.line)
            spec.mappings[sec.name] = _build_mapping(sec, spec.mappings)
        elif sec.header == "anchor":
            for key in ("xbar", "ybar", "pbar"):
                value = sec.take(key)
                if value is not None:
                    spec.anchors[key] = _parse_vector(value, sec.line)
        elif sec.header == "schedule":
            spec.schedule = _build_schedule(sec)
        else:
            if sec.name in seen_tasks:
                raise ProblemError(f"duplicate task {sec.name!r}", sec.line)
            seen_tasks.add(sec.name)
            spec.tasks.append(_build_task(sec, spec.mappings))
        leftover = [k for k in sec.keys if sec.header in ("anchor", "schedule", "mapping")]
        if leftover:
            raise ProblemError(
                f"unknown key {leftover[0]!r} in section [{sec.header}]", sec.keys[leftover[0]][1]
            )
    if not spec.tasks:
        raise ProblemError("document declares no tasks")
    return spec
