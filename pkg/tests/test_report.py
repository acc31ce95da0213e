"""Report serialization: deterministic JSON, strict loading, curves, figures."""

import dataclasses
import json
import math
import os

import numpy as np
import pytest

from subreg.bounds import soundness_suite
from subreg.catalog import CLOSED_FORM_RATES
from subreg.certify import certify_sms
from subreg.rates import DEFAULT_SCHEDULE, displacement_rate
from subreg.report import (
    build_report,
    document_sha256,
    dumps,
    iter_rate_estimates,
    loads_strict,
    result_payload,
    strip_timings,
    write_curves,
    write_figures,
)


def _abs_estimate():
    cf = next(c for c in CLOSED_FORM_RATES if c.name == "abs")
    return displacement_rate(cf.handle, cf.xbar, cf.ybar, DEFAULT_SCHEDULE)


def _task_entry(result):
    return {
        "id": "main",
        "op": "displacement-rate",
        "status": "pass",
        "expected": None,
        "failures": [],
        "result": result_payload(result),
    }


def test_document_sha256_is_hex():
    digest = document_sha256("[mapping F]\n")
    assert len(digest) == 64
    assert digest == document_sha256("[mapping F]\n")
    assert digest != document_sha256("[mapping G]\n")


def test_result_payload_nonfinite_floats():
    payload = result_payload({"a": float("nan"), "b": float("inf"), "c": -float("inf"), "d": 1.5})
    assert payload == {"a": "nan", "b": "inf", "c": "-inf", "d": 1.5}


def test_result_payload_numpy_scalars_and_arrays():
    payload = result_payload(
        {
            "arr": np.array([1.0, np.inf]),
            "flag": np.bool_(True),
            "count": np.int64(3),
            "x": np.float64(0.25),
        }
    )
    assert payload == {"arr": [1.0, "inf"], "flag": True, "count": 3, "x": 0.25}
    assert isinstance(payload["flag"], bool)
    assert isinstance(payload["count"], int)


def test_result_payload_dispatch():
    est = _abs_estimate()
    # to_json_dict objects, dicts, and lists all serialize
    assert result_payload(est)["kind"] == "displacement"
    assert result_payload({"plain": 1}) == {"plain": 1}
    items = result_payload([{"a": 1}, {"b": 2}])
    assert items == {"items": [{"a": 1}, {"b": 2}]}
    with pytest.raises(TypeError, match="cannot serialize"):
        result_payload(object())


def test_build_report_shape():
    est = _abs_estimate()
    report = build_report("doc text", DEFAULT_SCHEDULE, [_task_entry(est)], timings={"main": 0.12})
    assert set(report) == {
        "schema",
        "artifact",
        "version",
        "document_sha256",
        "seed",
        "schedule",
        "tasks",
        "timings",
    }
    assert report["schema"] == 1
    assert report["artifact"] == "subreg"
    assert report["seed"] == 20240601
    assert report["schedule"] == {
        "r0": 0.5,
        "decay": 0.6,
        "shells": 10,
        "points": 1024,
        "seed": 20240601,
    }


def test_dumps_sorted_indented_newline():
    report = build_report("doc", DEFAULT_SCHEDULE, [])
    text = dumps(report)
    assert text.endswith("\n")
    assert text == json.dumps(json.loads(text), sort_keys=True, indent=2) + "\n"
    # keys arrive sorted even though build_report inserts them out of order
    idx = {k: text.index(f'"{k}"') for k in ("artifact", "schema", "version")}
    assert idx["artifact"] < idx["schema"] < idx["version"]


def test_dumps_refuses_raw_nan():
    report = build_report("doc", DEFAULT_SCHEDULE, [])
    report["tasks"] = [{"id": "t", "op": "x", "status": "pass", "expected": None, "failures": [], "result": {"v": float("nan")}}]
    with pytest.raises(ValueError):
        dumps(report)


def test_strip_timings():
    report = build_report("doc", DEFAULT_SCHEDULE, [], timings={"t": 1.0})
    bare = strip_timings(report)
    assert "timings" not in bare
    assert set(bare) == set(report) - {"timings"}
    # original untouched
    assert "timings" in report


def test_roundtrip_loads_strict():
    est = _abs_estimate()
    report = build_report("doc", DEFAULT_SCHEDULE, [_task_entry(est)], timings={"main": 0.5})
    loaded = loads_strict(dumps(report))
    assert loaded == json.loads(dumps(report))


def test_loads_strict_rejects_unknown_top_field():
    report = build_report("doc", DEFAULT_SCHEDULE, [])
    report["extra"] = 1
    with pytest.raises(ValueError, match="unknown report fields: \\['extra'\\]"):
        loads_strict(dumps(report))


def test_loads_strict_rejects_missing_field():
    report = build_report("doc", DEFAULT_SCHEDULE, [])
    del report["seed"]
    with pytest.raises(ValueError, match="missing report fields: \\['seed'\\]"):
        loads_strict(dumps(report))


def test_loads_strict_rejects_schema_drift():
    report = build_report("doc", DEFAULT_SCHEDULE, [])
    report["schema"] = 2
    with pytest.raises(ValueError, match="unsupported schema 2"):
        loads_strict(dumps(report))


def test_loads_strict_rejects_unknown_task_field():
    est = _abs_estimate()
    entry = _task_entry(est)
    entry["note"] = "hi"
    report = build_report("doc", DEFAULT_SCHEDULE, [entry])
    with pytest.raises(ValueError, match="unknown task fields: \\['note'\\]"):
        loads_strict(dumps(report))


def test_loads_strict_rejects_non_object():
    with pytest.raises(ValueError, match="JSON object"):
        loads_strict("[1, 2]\n")


def test_timings_optional_for_loads_strict():
    report = build_report("doc", DEFAULT_SCHEDULE, [])
    assert "timings" not in report
    loads_strict(dumps(report))


def test_iter_rate_estimates_rate():
    est = _abs_estimate()
    pairs = list(iter_rate_estimates(est))
    assert pairs == [("", est)]


def test_iter_rate_estimates_certificate():
    cf = next(c for c in CLOSED_FORM_RATES if c.name == "abs")
    cert = certify_sms(cf.handle, cf.xbar, cf.ybar, DEFAULT_SCHEDULE)
    pairs = list(iter_rate_estimates(cert))
    assert [suffix for suffix, _ in pairs] == [""]
    assert pairs[0][1] is cert.rate


def test_iter_rate_estimates_bound_report():
    rep = soundness_suite("composition-chain", count=1)[0]
    pairs = list(iter_rate_estimates(rep))
    suffixes = [suffix for suffix, _ in pairs]
    assert suffixes
    assert all(suffix for suffix in suffixes)
    assert set(suffixes) == set(rep.certificates)


def test_write_curves(tmp_path):
    est = _abs_estimate()
    paths = write_curves([("main", "", est), ("main", "companion", est)], str(tmp_path))
    assert [os.path.basename(p) for p in paths] == ["main.csv", "main-companion.csv"]
    lines = open(paths[0], encoding="utf-8").read().splitlines()
    assert lines[0] == "shell,radius,min_ratio,max_ratio,cumulative_min"
    assert len(lines) == 1 + len(est.radii)
    shell0 = lines[1].split(",")
    assert shell0[0] == "0"
    assert float(shell0[1]) == est.radii[0]
    # repr round-trips the floats exactly
    assert shell0[2] == repr(est.shell_min[0])


def test_write_curves_renders_inf(tmp_path):
    est = _abs_estimate()
    frozen = dataclasses.replace(est, shell_min=tuple([math.inf] + list(est.shell_min[1:])))
    (path,) = write_curves([("t", "", frozen)], str(tmp_path))
    first = open(path, encoding="utf-8").read().splitlines()[1]
    assert first.split(",")[2] == "inf"


def test_write_figures(tmp_path):
    est = _abs_estimate()
    paths = write_figures([("main", "", est)], str(tmp_path))
    assert [os.path.basename(p) for p in paths] == ["main.png"]
    with open(paths[0], "rb") as fh:
        assert fh.read(8) == b"\x89PNG\r\n\x1a\n"
