import json
import subprocess
from pathlib import Path

import pytest

from slicefuzz.buildcap import (
    EXTERNAL,
    CaptureError,
    CompilationDatabase,
    capture_build,
    load_units,
    preprocess_unit,
)
from tests.conftest import BUILD_CMD, CORPUS


def test_capture_one_record_per_unit(corpus_env):
    db = corpus_env.db
    sources = [r.source for r in db.records]
    assert len(set(sources)) == len(sources)
    assert len(db.records) >= 50
    assert all(r.source.endswith(".c") for r in db.records)


def test_glue_pair_link_group(corpus_env):
    db = corpus_env.db
    driver = db.records[corpus_env.unit_for("gluepair/driver.c")]
    alloc = db.records[corpus_env.unit_for("gluepair/alloc.c")]
    assert driver.link_group and driver.link_group.endswith("prog_glue")
    assert alloc.link_group == driver.link_group
    assert driver.link_group in db.link_commands


def test_compile_only_units_have_no_link_group(corpus_env):
    rec = corpus_env.db.records[corpus_env.unit_for("specials/unresolved_dep.c")]
    assert rec.link_group is None


def test_every_link_group_in_link_commands(corpus_env):
    db = corpus_env.db
    for rec in db.records:
        if rec.link_group is not None:
            assert rec.link_group in db.link_commands


def test_replay_soundness(corpus_env):
    # the session fixture captures with verify_replay=True, which re-runs
    # every recorded compile; spot-check one record here explicitly
    db = corpus_env.db
    rec = db.records[corpus_env.unit_for("pairs/strcpy_stack_bad.c")]
    tool = db.toolchain["tools"].get(rec.tool, db.toolchain["cc"])
    proc = subprocess.run([tool] + rec.args, cwd=rec.directory, capture_output=True)
    assert proc.returncode == 0


def test_capture_determinism(tmp_path):
    work1 = tmp_path / "w1"
    work2 = tmp_path / "w2"
    capture_build(CORPUS, BUILD_CMD, work1, verify_replay=False)
    capture_build(CORPUS, BUILD_CMD, work2, verify_replay=False)
    a = (work1 / "build_db.json").read_text()
    b = (work2 / "build_db.json").read_text()
    assert a == b


def test_no_build_system_is_zero_compile_error(tmp_path):
    repo = tmp_path / "empty"
    repo.mkdir()
    with pytest.raises(CaptureError, match="zero compile steps"):
        capture_build(repo, "true", tmp_path / "work", verify_replay=False)


def test_build_failure_aborts_with_log(tmp_path):
    repo = tmp_path / "broken"
    repo.mkdir()
    (repo / "bad.c").write_text("int main(void { return 0; }\n")
    with pytest.raises(CaptureError, match="build command failed"):
        capture_build(repo, "cc -c bad.c", tmp_path / "work", verify_replay=False)


def test_database_round_trips(corpus_env, tmp_path):
    path = tmp_path / "db.json"
    corpus_env.db.save(path)
    again = CompilationDatabase.load(path)
    assert again.to_json() == corpus_env.db.to_json()


# -- preprocessing -----------------------------------------------------------


def test_pp_strips_comments_and_directives(corpus_env):
    for unit in corpus_env.units:
        assert unit.ok
        text = Path(unit.pp_path).read_text()
        assert "/*" not in text and "//" not in text
        for line in text.splitlines():
            stripped = line.lstrip()
            assert not stripped.startswith(("#if", "#ifdef", "#else", "#endif"))


def test_pp_keeps_exactly_one_ifdef_branch(corpus_env):
    unit = corpus_env.units[corpus_env.unit_for("specials/pp_branch.c")]
    text = Path(unit.pp_path).read_text()
    assert "222" in text
    assert "111" not in text


def test_glue_comment_only_stripped(corpus_env):
    unit = corpus_env.units[corpus_env.unit_for("gluepair/driver.c")]
    text = Path(unit.pp_path).read_text()
    assert "glue_strings" in text
    assert "Joins a NULL-terminated array" not in text


def test_map_line_identity_for_includeless_unit(corpus_env):
    # grid_write_stack has no includes: pp text == source modulo blank-line
    # normalization, so every pp line maps to its own original number
    i = corpus_env.unit_for("pairs/grid_write_stack_bad.c")
    unit = corpus_env.units[i]
    src_lines = Path(unit.record.source).read_text().splitlines()
    for pp_line in range(1, len(unit.lines) + 1):
        f, n = unit.map_line(pp_line)
        if f == EXTERNAL:
            continue
        assert f == "src/pairs/grid_write_stack_bad.c"
        pp_text = Path(unit.pp_path).read_text().splitlines()[pp_line - 1].strip()
        if pp_text:
            assert pp_text in src_lines[n - 1].replace("/* WARN */", "").strip() or pp_text == src_lines[n - 1].strip()


def test_map_line_round_trips_function_starts(corpus_env):
    # every indexed function definition's first pp line maps back to an
    # original line whose text contains the function name
    checked = 0
    for fi in corpus_env.idx.files:
        src = Path(fi.unit.record.source)
        src_lines = src.read_text().splitlines()
        for it in fi.items:
            if it.kind != "function":
                continue
            f, n = fi.unit.map_line(it.span[0])
            if f == EXTERNAL:
                continue
            assert (CORPUS / f).resolve() == src.resolve()
            assert 1 <= n <= len(src_lines)
            assert it.name in src_lines[n - 1]
            checked += 1
    assert checked > 60


def test_map_line_out_of_range(corpus_env):
    unit = corpus_env.units[0]
    with pytest.raises(IndexError):
        unit.map_line(0)
    with pytest.raises(IndexError):
        unit.map_line(len(unit.lines) + 1)


def test_map_line_external_for_system_headers(corpus_env):
    unit = corpus_env.units[corpus_env.unit_for("gluepair/driver.c")]
    externals = [
        unit.map_line(i)[0] for i in range(1, len(unit.lines) + 1)
        if not unit.lines[i - 1].project
    ]
    assert externals and all(f == EXTERNAL for f in externals)


def test_preprocessor_failure_flags_unit(corpus_env, tmp_path):
    import dataclasses

    rec = dataclasses.replace(
        corpus_env.db.records[0],
        args=corpus_env.db.records[0].args + ["-include", "no_such_header_xyz.h"],
    )
    unit = preprocess_unit(999, rec, CORPUS, tmp_path, corpus_env.db.toolchain)
    assert not unit.ok
    assert "preprocessor failed" in unit.error


def test_load_units_round_trip(corpus_env):
    again = load_units(corpus_env.db, corpus_env.work)
    assert len(again) == len(corpus_env.units)
    for a, b in zip(again, corpus_env.units):
        assert a.error == b.error
        assert len(a.lines) == len(b.lines)
        assert a.map_line(1) == b.map_line(1)
