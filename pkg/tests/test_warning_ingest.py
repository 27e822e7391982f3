import json

import pytest
from hypothesis import given, strategies as st

from slicefuzz.warnings_io import (
    ReportError,
    SeverityPolicy,
    Warning,
    dedupe_warnings,
    filter_by_severity,
    load_warnings,
    warning_id,
)


def write_jsonl(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")


GLUE_RECORD = {
    "tool": "ratslike",
    "file": "crypto/driver.c",
    "line": 16,
    "category": "buffer_overflow",
    "severity": "High",
}


def test_load_single_record(tmp_path):
    p = tmp_path / "r.jsonl"
    write_jsonl(p, [GLUE_RECORD])
    ws, diags = load_warnings(p)
    assert diags == []
    assert len(ws) == 1
    w = ws[0]
    assert (w.tool, w.file, w.line) == ("ratslike", "crypto/driver.c", 16)
    assert w.category == "buffer_overflow" and w.severity == "High"


def test_empty_report(tmp_path):
    p = tmp_path / "r.jsonl"
    p.write_text("")
    ws, diags = load_warnings(p)
    assert ws == [] and diags == []


def test_line_zero_diagnosed(tmp_path):
    p = tmp_path / "r.jsonl"
    write_jsonl(p, [dict(GLUE_RECORD, line=0)])
    ws, diags = load_warnings(p)
    assert ws == []
    assert len(diags) == 1 and "line" in diags[0].reason


def test_missing_field_diagnosed(tmp_path):
    p = tmp_path / "r.jsonl"
    rec = dict(GLUE_RECORD)
    del rec["severity"]
    write_jsonl(p, [rec, GLUE_RECORD])
    ws, diags = load_warnings(p)
    assert len(ws) == 1 and len(diags) == 1
    assert "severity" in diags[0].reason


def test_malformed_json_diagnosed(tmp_path):
    p = tmp_path / "r.jsonl"
    p.write_text('{"tool": "ratslike", oops\n' + json.dumps(GLUE_RECORD) + "\n")
    ws, diags = load_warnings(p)
    assert len(ws) == 1 and len(diags) == 1


def test_unknown_format_rejected(tmp_path):
    p = tmp_path / "r.jsonl"
    write_jsonl(p, [GLUE_RECORD])
    with pytest.raises(ReportError):
        load_warnings(p, format="xml")


def test_unreadable_file():
    with pytest.raises(ReportError):
        load_warnings("/nonexistent/report.jsonl")


def test_csv_adapter(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text(
        "tool,file,line,category,severity\n"
        "ratslike,crypto/driver.c,16,buffer_overflow,High\n"
        "inferlike,a.c,3,buffer_overflow,L1\n"
    )
    ws, diags = load_warnings(p, format="csv")
    assert diags == []
    assert [w.line for w in ws] == [16, 3]


def test_repo_root_validation(tmp_path):
    (tmp_path / "present.c").write_text("int x;\n")
    p = tmp_path / "r.jsonl"
    write_jsonl(
        p,
        [
            dict(GLUE_RECORD, file="present.c"),
            dict(GLUE_RECORD, file="absent.c"),
        ],
    )
    ws, diags = load_warnings(p, repo_root=tmp_path)
    assert [w.file for w in ws] == ["present.c"]
    assert len(diags) == 1 and "absent.c" in diags[0].reason


def test_id_is_pure_function(tmp_path):
    p = tmp_path / "r.jsonl"
    write_jsonl(p, [GLUE_RECORD])
    a, _ = load_warnings(p)
    b, _ = load_warnings(p)
    assert a[0].id == b[0].id
    assert a[0].id == warning_id("ratslike", "crypto/driver.c", 16, "buffer_overflow")
    # severity does not participate in the id
    assert warning_id("ratslike", "f.c", 1, "x") != warning_id("inferlike", "f.c", 1, "x")


def mk(tool="ratslike", file="a.c", line=1, category="buffer_overflow", severity="High"):
    return Warning.make(tool, file, line, category, severity)


def test_severity_filter_defaults():
    ws = [mk(severity="High"), mk(line=2, severity="Low"), mk(line=3, severity="Medium")]
    out = filter_by_severity(ws, SeverityPolicy())
    assert [w.severity for w in out] == ["High", "Medium"]
    infer = [mk(tool="inferlike", severity=s, line=i) for i, s in enumerate(["L1", "L2", "L5"], 1)]
    assert [w.severity for w in filter_by_severity(infer, SeverityPolicy())] == ["L1", "L2"]


def test_severity_filter_allow_all_is_identity():
    ws = [mk(severity="weird"), mk(tool="generic", severity="anything", line=2)]
    assert filter_by_severity(ws, SeverityPolicy.allow_all()) == ws


def test_severity_filter_empty():
    assert filter_by_severity([], SeverityPolicy()) == []


def test_dedupe_key_collision_across_tools():
    a = mk(tool="ratslike")
    b = mk(tool="inferlike", severity="L1")
    out, dropped = dedupe_warnings([a, b])
    assert out == [a]
    assert dropped == {b.id: a.id}


def test_dedupe_different_category_kept():
    a = mk(category="buffer_overflow")
    b = mk(category="race_condition")
    out, _ = dedupe_warnings([a, b])
    assert out == [a, b]


def test_dedupe_disjoint_identity():
    ws = [mk(line=i) for i in range(1, 5)]
    out, dropped = dedupe_warnings(ws)
    assert out == ws and dropped == {}


tools = st.sampled_from(["ratslike", "inferlike", "generic"])
sevs = st.sampled_from(["High", "Medium", "Low", "L1", "L2", "L5"])
warnings_strategy = st.lists(
    st.builds(
        mk,
        tool=tools,
        file=st.sampled_from(["a.c", "b.c", "c/d.c"]),
        line=st.integers(min_value=1, max_value=30),
        category=st.sampled_from(["buffer_overflow", "race_condition"]),
        severity=sevs,
    ),
    max_size=40,
)


@given(warnings_strategy)
def test_dedupe_idempotent(ws):
    once, _ = dedupe_warnings(ws)
    twice, dropped = dedupe_warnings(once)
    assert twice == once and dropped == {}


@given(warnings_strategy)
def test_filter_idempotent(ws):
    policy = SeverityPolicy()
    once = filter_by_severity(ws, policy)
    assert filter_by_severity(once, policy) == once


@given(warnings_strategy)
def test_dedupe_subset_and_order(ws):
    out, dropped = dedupe_warnings(ws)
    assert all(w in ws for w in out)
    ids = [w.id for w in out]
    assert len(set((w.file, w.line, w.category) for w in out)) == len(out)
    # dropped map points at retained ids
    assert all(v in ids for v in dropped.values())


@given(st.lists(st.integers(min_value=-3, max_value=40), max_size=20))
def test_ingest_totality(tmp_path_factory, lines):
    # every record lands as exactly one warning or one diagnostic
    p = tmp_path_factory.mktemp("ing") / "r.jsonl"
    write_jsonl(p, [dict(GLUE_RECORD, line=n) for n in lines])
    ws, diags = load_warnings(p)
    assert len(ws) + len(diags) == len(lines)
