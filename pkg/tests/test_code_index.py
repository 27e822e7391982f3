import json
from pathlib import Path

from slicefuzz.buildcap import EXTERNAL
from slicefuzz.index import ITEM_FUNCTION, ITEM_GLOBAL, ITEM_PROTO, ITEM_RAW, ITEM_TYPE, RepoIndex, index_unit

DATA = Path(__file__).parent / "data"


def original_span(fi, item):
    start = fi.unit.map_line(item.span[0])
    end = fi.unit.map_line(item.span[1])
    return start, end


def test_index_matches_handwritten_manifest(corpus_env):
    manifest = json.loads((DATA / "index_manifest.json").read_text())
    for rel, expect in manifest.items():
        fi = corpus_env.idx.files[corpus_env.unit_for(rel)]
        fns = {it.name: it for it in fi.items if it.kind == ITEM_FUNCTION}
        assert set(fns) == set(expect["functions"]), rel
        for name, (start, end) in expect["functions"].items():
            (sf, sl), (ef, el) = original_span(fi, fns[name])
            assert sf == rel and ef == rel, (rel, name)
            assert (sl, el) == (start, end), (rel, name, sl, el)
        for g in expect.get("globals", []):
            assert any(
                it.kind == ITEM_GLOBAL and g in it.names and it.is_definition for it in fi.items
            ), (rel, g)
        for t in expect.get("types", []):
            assert any(it.kind == ITEM_TYPE and (t in it.names or it.tag == t) for it in fi.items), (rel, t)
        raws = [it for it in fi.items if it.kind == ITEM_RAW]
        if "raw_blocks" in expect:
            project_raws = [
                it for it in raws if fi.unit.map_line(it.span[0])[0] == rel
            ]
            assert len(project_raws) == expect["raw_blocks"], rel


def test_empty_file_empty_index(synthetic_unit):
    fi = index_unit(synthetic_unit(""))
    assert fi.items == []


def test_inline_asm_raw_block_with_neighbors(corpus_env):
    rel = "src/specials/inline_asm_unit.c"
    fi = corpus_env.idx.files[corpus_env.unit_for(rel)]
    kinds = [it.kind for it in fi.items if fi.unit.map_line(it.span[0])[0] == rel]
    assert kinds == [ITEM_FUNCTION, ITEM_RAW, ITEM_FUNCTION]


def test_enclosing_function_glue(corpus_env):
    fd = corpus_env.idx.enclosing_function("src/gluepair/driver.c", 20)
    assert fd is not None and fd.name == "glue_strings"


def test_enclosing_function_between_functions(corpus_env):
    # line 24 of driver.c is the blank line between glue_strings and print_banner
    assert corpus_env.idx.enclosing_function("src/gluepair/driver.c", 24) is None


def test_enclosing_function_inside_raw_block(corpus_env):
    assert corpus_env.idx.enclosing_function("src/specials/inline_asm_unit.c", 7) is None


def test_callees_of_glue(corpus_env):
    fd = corpus_env.idx.enclosing_function("src/gluepair/driver.c", 20)
    assert corpus_env.idx.callees_of(fd) == ["strlen", "OPENSSL_malloc", "strcpy"]


def test_leaf_function_no_callees(corpus_env):
    fd = corpus_env.idx.enclosing_function("src/specials/two_scalars.c", 3)
    assert corpus_env.idx.callees_of(fd) == []


def test_recursive_function_self_loop(synthetic_unit):
    fi = index_unit(
        synthetic_unit(
            "int fact(int n)\n"
            "{\n"
            "    if (n <= 1)\n"
            "        return 1;\n"
            "    return n * fact(n - 1);\n"
            "}\n"
        )
    )
    fn = fi.function_named("fact")
    assert fn.callees == ("fact",)


def test_address_taken_reported_separately(synthetic_unit):
    fi = index_unit(
        synthetic_unit(
            "int helper(int x) { return x; }\n"
            "void *grab(void)\n"
            "{\n"
            "    return &helper;\n"
            "}\n"
        )
    )
    grab = fi.function_named("grab")
    assert grab.callees == ()
    assert grab.referenced_fns == ("helper",)


def test_member_calls_not_counted(synthetic_unit):
    fi = index_unit(
        synthetic_unit(
            "struct ops { int (*run)(int); };\n"
            "int drive(struct ops *o)\n"
            "{\n"
            "    return o->run(3);\n"
            "}\n"
        )
    )
    assert fi.function_named("drive").callees == ()


def test_prototype_and_typedef_items(synthetic_unit):
    fi = index_unit(
        synthetic_unit(
            "typedef unsigned long word_t;\n"
            "typedef int (*cb_t)(word_t);\n"
            "extern int apply(cb_t fn, word_t v);\n"
            "enum mode { OFF, ON };\n"
            "static word_t counter = 0;\n"
        )
    )
    kinds = {(it.kind, it.names) for it in fi.items}
    assert (ITEM_TYPE, ("word_t",)) in kinds
    assert (ITEM_TYPE, ("cb_t",)) in kinds
    assert any(it.kind == ITEM_PROTO and it.name == "apply" for it in fi.items)
    assert any(it.kind == ITEM_TYPE and "ON" in it.names and it.type_kw == "enum" for it in fi.items)
    assert any(it.kind == ITEM_GLOBAL and it.names == ("counter",) for it in fi.items)


def test_locate_symbol_cross_file(corpus_env):
    drv = corpus_env.unit_for("gluepair/driver.c")
    sites = corpus_env.idx.locate_symbol("OPENSSL_malloc", from_unit=drv)
    assert sites
    assert corpus_env.idx.files[sites[0].unit_index].unit.record.source.endswith("alloc.c")


def test_locate_symbol_external_is_empty(corpus_env):
    drv = corpus_env.unit_for("gluepair/driver.c")
    assert corpus_env.idx.locate_symbol("strcpy", from_unit=drv) == []


def test_locate_symbol_ambiguity_order(corpus_env):
    entry = corpus_env.unit_for("dupA/entry.c")
    sites = corpus_env.idx.locate_symbol("side_foo", from_unit=entry)
    paths = [corpus_env.idx.files[s.unit_index].unit.record.source for s in sites]
    assert len(paths) == 2
    assert paths[0].endswith("dupA/twin.c")      # same directory wins
    assert paths[1].endswith("dupB/alt.c")       # same link group second
    # deterministic across calls
    again = corpus_env.idx.locate_symbol("side_foo", from_unit=entry)
    assert [s.unit_index for s in again] == [s.unit_index for s in sites]


def test_static_symbols_resolve_only_from_own_unit(corpus_env):
    drv = corpus_env.unit_for("gluepair/driver.c")
    other = corpus_env.unit_for("gluepair/alloc.c")
    assert corpus_env.idx.locate_symbol("print_banner", from_unit=drv)
    assert corpus_env.idx.locate_symbol("print_banner", from_unit=other) == []


def test_callees_subset_of_lexical_idents(corpus_env):
    for fi in corpus_env.idx.files:
        for it in fi.items:
            if it.kind == ITEM_FUNCTION:
                assert set(it.callees) <= set(it.ident_refs)


def test_definition_spans_do_not_overlap(corpus_env):
    for fi in corpus_env.idx.files:
        fns = sorted(
            (it.span for it in fi.items if it.kind == ITEM_FUNCTION), key=lambda s: s[0]
        )
        for a, b in zip(fns, fns[1:]):
            assert a[1] < b[0]


def test_enclosing_total_over_spans(corpus_env):
    # any original line inside a definition's span maps back to that function
    for rel in ["src/gluepair/driver.c", "src/gluepair/alloc.c", "src/pairs/strcpy_stack_bad.c"]:
        fi = corpus_env.idx.files[corpus_env.unit_for(rel)]
        for it in fi.items:
            if it.kind != ITEM_FUNCTION:
                continue
            for pp_line in range(it.span[0], it.span[1] + 1):
                f, n = fi.unit.map_line(pp_line)
                if f == EXTERNAL:
                    continue
                fd = corpus_env.idx.enclosing_function(f, n)
                assert fd is not None and fd.name == it.name


def test_index_dump_json(corpus_env, tmp_path):
    out = tmp_path / "index.json"
    corpus_env.idx.dump_json(out)
    data = json.loads(out.read_text())
    assert "glue_strings" in data
    entry = data["glue_strings"][0]
    assert set(entry) == {"unit", "kind", "start", "end"}
