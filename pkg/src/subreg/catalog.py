"""Worked-example catalog.

Each entry is a complete problem document exercising one feature of the
toolkit on a mapping whose qualitative behaviour is known in closed form.
`document(example_id)` returns the text, `mapping_for(example_id)` the
principal mapping, and `CLOSED_FORM_RATES` lists ten instances whose
displacement rates are hand-computable (used as regression anchors).
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .bounds import (
    BoundReport,
    composition_bound,
    perturbation_bound,
    sms_from_approx,
    sms_from_prederivative,
    smooth_kernel_check,
)
from .mappings import Fan, LinearOp, PHMapping, SingleMap
from .rates import DEFAULT_SCHEDULE
from .spaces import Norm

__all__ = [
    "example_ids",
    "document",
    "mapping_for",
    "CLOSED_FORM_RATES",
    "ClosedForm",
    "suite_catalog_instance",
]


def _identity_doc(n: int) -> str:
    rows = ";".join(",".join("1" if i == j else "0" for j in range(n)) for i in range(n))
    return f"""\
# Identity on R^{n} from the sum norm to the max norm; the injectivity
# constant decays like 1/n along this family.
[mapping I]
kind = linear
matrix = {rows}
norm_in = l1
norm_out = linf

[task alpha]
op = alpha
mapping = I
expect = pass
expect_value = {1.0 / n!r}
rtol = 0.05
"""


_DOCS = {
    "ex-F1": """\
# A set-valued map on the line with a unit jump away from the anchor:
# strongly subregular at (0, 0) with modulus zero, not metrically regular.
[mapping F1]
kind = setvalued
clause1 = x1 == 0 => interval(0, 0.5)
clause2 = otherwise => interval(1, inf)

[anchor]
xbar = 0
ybar = 0

[task certify]
op = certify-sms
mapping = F1
expect = pass
""",
    "ex-F2": """\
# The half-line map x -> [x, inf): metrically regular near (0, 0) yet not
# strongly subregular there (every x < 0 still covers 0).
[mapping F2]
kind = setvalued
clause1 = otherwise => interval(x1, inf)

[anchor]
xbar = 0
ybar = 0

[task certify]
op = certify-sms
mapping = F2
expect = fail
""",
    "ex-norm-sphere": """\
# The Euclidean norm at a point of its unit sphere: no sharp growth, the
# descent rate collapses along the tangent circle.
[mapping phi]
kind = expr
expr = norm2([x1, x2])

[anchor]
xbar = 1, 0

[task rate]
op = descent-rate
mapping = phi
expect = pass
expect_final_min_le = 0.05
""",
    "ex-comp-cont": """\
# Two scalar functions with sharp minimizers at 0 whose composition is
# identically zero, hence nowhere subregular at the origin.
[mapping g]
kind = expr
expr = piecewise(x1 == 0, 0, 2)

[mapping F]
kind = expr
expr = piecewise(abs(x1) <= 1, abs(x1), 2 - abs(x1))

[mapping comp]
kind = composition
inner = g
outer = F

[anchor]
xbar = 0
ybar = 0

[task sharp-g]
op = sharp-min
mapping = g
expect = pass

[task sharp-F]
op = sharp-min
mapping = F
expect = pass

[task composite]
op = certify-sms
mapping = comp
expect = fail
""",
    "ex-setvalued-comp": """\
# A strongly subregular multifunction G whose composition with the tent map
# F (declared here in closed form) loses the property at (0, 0).
[mapping G]
kind = setvalued
clause1 = x1 == 0 => interval(-inf, inf)
clause2 = otherwise => point(2)

[mapping FG]
kind = setvalued
clause1 = x1 == 0 => interval(-inf, 1)
clause2 = otherwise => point(0)

[anchor]
xbar = 0
ybar = 0

[task factor]
op = certify-sms
mapping = G
expect = pass

[task composite]
op = certify-sms
mapping = FG
expect = fail
""",
    "ex-subdiff-quadgrowth": """\
# Gradient map of the quadratic x^2: subregular with modulus 1/2, the
# reciprocal of the quadratic growth constant.
[mapping dphi]
kind = expr
expr = 2*x1

[anchor]
xbar = 0
ybar = 0

[task certify]
op = certify-sms
mapping = dphi
expect = pass
expect_modulus = 0.5
rtol = 0.02
""",
    "ex-eps-approx": """\
# An oscillating perturbation of the identity, approximated by the identity
# itself with defect 0.2 < 1; the surrogate bound 1/(1 - 0.2) is sharp.
[mapping f]
kind = expr
expr = piecewise(x1 == 0, 0, x1 + 0.2*x1*sin(1/x1))

[mapping h]
kind = ph
expr = x1

[anchor]
xbar = 0

[task bound]
op = eps-approx
mapping = f
h = h
expect = pass
""",
    "ex-prederiv-abs": """\
# The absolute value with its exact two-branch prederivative {x, -x}:
# zero defect and injectivity constant one give the tight bound 1.
[mapping f]
kind = expr
expr = abs(x1)

[mapping H]
kind = fan
matrix1 = 1
matrix2 = -1

[anchor]
xbar = 0

[task bound]
op = prederivative
mapping = f
fan = H
delta = 0.5
expect = pass
""",
    "ex-geneq-complementarity": """\
# Scalar complementarity: 0 in x - p + N_[0,inf)(x).  The solution map is
# p -> max(p, 0), so its calmness modulus is exactly one, matching the
# certified bound (equality case).
[mapping f]
kind = expr
expr = x2 - x1
dim_in = 2

[mapping T]
kind = normalcone
lows = 0
highs = inf

[anchor]
pbar = 0
xbar = 0

[task bound]
op = geneq-isolated-calmness
base = f
field = T
param_dim = 1
expect = pass
expect_measured = 1.0
rtol = 0.02
""",
    "ex-geneq-sv-field": """\
# Single-valued field: 0 = 2x - p + 0.5 sin x.  The linear part dominates
# the field's calmness, so the separation bound applies.
[mapping f]
kind = expr
expr = 2*x2 - x1
dim_in = 2

[mapping T]
kind = expr
expr = 0.5*sin(x1)

[anchor]
pbar = 0
xbar = 0

[task bound]
op = geneq-single-valued-field
base = f
field = T
param_dim = 1
expect = pass
""",
    "ex-geneq-scalarized": """\
# Max-affine base (|x| - p, 0) with linear field (0.4 x, 0): the first
# scalarization has subdifferential [-1, 1], inradius 1, and the solution
# branch x = -p/0.6 meets the bound 1/(1 - 0.4) exactly.
[mapping f]
kind = expr
expr = [abs(x2) - x1, 0]
dim_in = 2

[mapping T]
kind = expr
expr = [0.4*x1, 0]

[mapping w1]
kind = maxaffine
pieces = (1,0);(-1,0)

[mapping w2]
kind = maxaffine
pieces = (0,0)

[anchor]
pbar = 0
xbar = 0

[task bound]
op = geneq-convex-scalarization
base = f
field = T
components = w1, w2
param_dim = 1
expect = pass
""",
}
for _n in range(2, 11):
    _DOCS[f"ex-l1linf-n{_n}"] = _identity_doc(_n)

_PRINCIPAL = {
    "ex-F1": "F1",
    "ex-F2": "F2",
    "ex-norm-sphere": "phi",
    "ex-comp-cont": "comp",
    "ex-setvalued-comp": "FG",
    "ex-subdiff-quadgrowth": "dphi",
    "ex-eps-approx": "f",
    "ex-prederiv-abs": "f",
    "ex-geneq-complementarity": "f",
    "ex-geneq-sv-field": "f",
    "ex-geneq-scalarized": "f",
}
for _n in range(2, 11):
    _PRINCIPAL[f"ex-l1linf-n{_n}"] = "I"


def example_ids() -> tuple:
    return tuple(sorted(_DOCS))


def document(example_id: str) -> str:
    if example_id not in _DOCS:
        raise KeyError(f"unknown catalog example {example_id!r}")
    return _DOCS[example_id]


def mapping_for(example_id: str):
    """Principal mapping of a catalog example (for `kind = catalog` references)."""
    from .problem import parse_problem

    spec = parse_problem(document(example_id))
    return spec.mappings[_PRINCIPAL[example_id]]


class ClosedForm(NamedTuple):
    name: str
    handle: object
    xbar: tuple
    ybar: tuple
    rate: float


# Displacement rates checkable by hand: linear maps realize their smallest
# gain on a sampled axis/diagonal direction, the piecewise entries are
# one-dimensional or isometric.
CLOSED_FORM_RATES = (
    ClosedForm("diag-2-3", LinearOp(np.diag([2.0, 3.0])), (0.0, 0.0), (0.0, 0.0), 2.0),
    ClosedForm("diag-05-07", LinearOp(np.diag([0.5, 0.7])), (0.0, 0.0), (0.0, 0.0), 0.5),
    ClosedForm("scale-3", LinearOp(np.array([[3.0]])), (0.0,), (0.0,), 3.0),
    ClosedForm("abs", SingleMap("abs(x1)"), (0.0,), (0.0,), 1.0),
    ClosedForm("two-slope", SingleMap("max(x1, -2*x1)"), (0.0,), (0.0,), 1.0),
    ClosedForm("sum-norm", SingleMap("norm1([x1, x2])"), (0.0, 0.0), (0.0,), 1.0),
    ClosedForm("grad-quad", SingleMap("2*x1"), (0.0,), (0.0,), 2.0),
    ClosedForm("grad-mild", SingleMap("0.7*x1"), (0.0,), (0.0,), 0.7),
    ClosedForm("rot-sqrt2", LinearOp(np.array([[1.0, 1.0], [1.0, -1.0]])), (0.0, 0.0), (0.0, 0.0), math.sqrt(2.0)),
    ClosedForm("fold", SingleMap("[abs(x1), x2]"), (0.0, 0.0), (0.0, 0.0), 1.0),
)


def suite_catalog_instance(suite_id: str, schedule=DEFAULT_SCHEDULE) -> BoundReport:
    """One deterministic hand-checkable instance per soundness suite."""
    zero1 = np.zeros(1)
    zero2 = np.zeros(2)
    if suite_id == "composition-chain":
        return composition_bound(SingleMap("2*x1"), SingleMap("3*x1"), zero1, zero1, schedule)
    if suite_id == "calm-perturbation":
        base = LinearOp(np.diag([2.0, 3.0]))
        g = SingleMap("[0.1*sin(x1), 0.1*sin(x2)]")
        return perturbation_bound(base, g, zero2, zero2, schedule)
    if suite_id == "ph-approximation":
        f = SingleMap("piecewise(x1 == 0, 0, x1 + 0.2*x1*sin(1/x1))")
        return sms_from_approx(f, PHMapping("x1"), zero1, schedule)
    if suite_id == "fan-prederivative":
        fan = Fan(generators=[np.array([[1.0]]), np.array([[-1.0]])])
        return sms_from_prederivative(SingleMap("abs(x1)"), fan, zero1, 0.5, schedule)
    if suite_id == "smooth-kernel":
        # radial factor only inflates |f(x)|/|x|, so 1/alpha stays an upper bound
        f = SingleMap("[(1 + x1*x1 + x2*x2)*2*x1, (1 + x1*x1 + x2*x2)*x2]",
                      norm_in=Norm("l2"), norm_out=Norm("l2"))
        return smooth_kernel_check(f, zero2, schedule)
    raise ValueError(f"unknown suite id {suite_id!r}")
