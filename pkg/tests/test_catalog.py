"""Catalog integrity: every example parses and exposes its principal mapping."""

import numpy as np
import pytest

from subreg.catalog import (
    CLOSED_FORM_RATES,
    document,
    example_ids,
    mapping_for,
)
from subreg.mappings import MappingHandle
from subreg.problem import parse_problem


def test_example_ids_sorted_and_complete():
    ids = example_ids()
    assert ids == tuple(sorted(ids))
    expected = {
        "ex-F1",
        "ex-F2",
        "ex-norm-sphere",
        "ex-comp-cont",
        "ex-setvalued-comp",
        "ex-subdiff-quadgrowth",
        "ex-eps-approx",
        "ex-prederiv-abs",
        "ex-geneq-complementarity",
        "ex-geneq-sv-field",
        "ex-geneq-scalarized",
    }
    assert expected <= set(ids)
    for n in range(2, 11):
        assert f"ex-l1linf-n{n}" in ids


def test_every_document_parses():
    for ex_id in example_ids():
        spec = parse_problem(document(ex_id))
        assert spec.tasks, ex_id


def test_unknown_document():
    with pytest.raises(KeyError, match="unknown catalog example 'ex-nope'"):
        document("ex-nope")


def test_principal_mappings_resolve():
    for ex_id in example_ids():
        handle = mapping_for(ex_id)
        assert handle is not None, ex_id


def test_identity_documents_scale():
    for n in (2, 7):
        spec = parse_problem(document(f"ex-l1linf-n{n}"))
        op = spec.mappings["I"]
        assert np.allclose(op.matrix, np.eye(n))
        assert op.norm_in.tag == "l1"
        assert op.norm_out.tag == "linf"
        task = spec.tasks[0]
        assert task.args["expect_value"] == pytest.approx(1.0 / n)


def test_closed_form_rates_well_formed():
    assert len(CLOSED_FORM_RATES) == 10
    names = [c.name for c in CLOSED_FORM_RATES]
    assert len(set(names)) == 10
    for cf in CLOSED_FORM_RATES:
        assert isinstance(cf.handle, MappingHandle)
        assert cf.rate > 0
        assert len(cf.xbar) == cf.handle.dim_in
        # the anchor lies on the graph
        assert cf.handle.dist_to_image(cf.ybar, cf.xbar) <= 1e-9
