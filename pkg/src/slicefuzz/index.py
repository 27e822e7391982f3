"""Structural index of preprocessed C sources.

Scans each unit's stripped preprocessed text into top-level items (function
definitions, prototypes, globals, type definitions, raw fallback blocks) with
line spans, then answers the queries the slicer and harness generator need:
enclosing-function lookup, callee extraction, and repo-wide symbol search.

The scanner is token-based rather than grammar-complete: anything it cannot
shape into a known item becomes a raw block that downstream stages retain
verbatim instead of silently dropping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .buildcap import PreprocessedUnit, build_origin_lookup
from .ctok import C_KEYWORDS, NOT_CALLS, Tok, tokenize
from .ctypes_model import TypeResolver, _split_top_commas

ITEM_FUNCTION = "function"
ITEM_PROTO = "prototype"
ITEM_GLOBAL = "global_var"
ITEM_TYPE = "type"
ITEM_RAW = "raw_block"


@dataclass
class FileItem:
    kind: str
    names: tuple[str, ...]            # declared names (incl. enumerators for enums)
    span: tuple[int, int]             # 1-based pp line range, inclusive
    is_static: bool = False
    is_definition: bool = True
    ret_text: str = ""                # functions: return type as written
    params_text: str = ""             # functions: parameter list as written
    param_groups: list[list[Tok]] = field(default_factory=list)
    body_tokens: list[Tok] = field(default_factory=list)
    ident_refs: frozenset[str] = frozenset()
    callees: tuple[str, ...] = ()
    referenced_fns: tuple[str, ...] = ()   # address-taken, not called
    tag: str = ""                     # struct/union/enum tag
    type_kw: str = ""                 # struct/union/enum for tagged types
    body_toks_for_fields: list[Tok] = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.names[0] if self.names else ""


@dataclass
class FunctionDecl:
    name: str
    unit_index: int
    span: tuple[int, int]
    is_static: bool
    is_definition: bool
    ret_text: str
    params_text: str
    param_groups: list[list[Tok]]
    item: FileItem


@dataclass
class DefinitionSite:
    symbol: str
    kind: str
    unit_index: int
    span: tuple[int, int]
    item: FileItem


@dataclass
class FileIndex:
    unit: PreprocessedUnit
    items: list[FileItem]

    def functions(self) -> list[FileItem]:
        return [it for it in self.items if it.kind == ITEM_FUNCTION]

    def function_named(self, name: str) -> Optional[FileItem]:
        for it in self.items:
            if it.kind == ITEM_FUNCTION and it.name == name:
                return it
        return None


def _significant_prev(toks: list[Tok], i: int) -> Optional[Tok]:
    return toks[i - 1] if i > 0 else None


def _match_forward(toks: list[Tok], i: int, open_t: str, close_t: str) -> int:
    """Index of the token closing the group opened at i; -1 when unbalanced."""
    depth = 0
    for j in range(i, len(toks)):
        if toks[j].text == open_t:
            depth += 1
        elif toks[j].text == close_t:
            depth -= 1
            if depth == 0:
                return j
    return -1


def _match_backward(toks: list[Tok], i: int) -> int:
    """Index of the '(' matching the ')' at i; -1 when unbalanced."""
    depth = 0
    for j in range(i, -1, -1):
        if toks[j].text == ")":
            depth += 1
        elif toks[j].text == "(":
            depth -= 1
            if depth == 0:
                return j
    return -1


def _collect_ident_refs(toks: list[Tok]) -> frozenset[str]:
    return frozenset(t.text for t in toks if t.kind == "ident" and t.text not in C_KEYWORDS)


def _declarator_names(toks: list[Tok]) -> list[str]:
    """Declared names from the declarator part of a declaration."""
    names: list[str] = []
    for chunk in _split_top_commas(toks):
        # function pointer: ( * name ) ...
        fp_name = None
        for k in range(len(chunk) - 2):
            if chunk[k].text == "(" and chunk[k + 1].text == "*":
                for m in range(k + 2, len(chunk)):
                    if chunk[m].kind == "ident":
                        fp_name = chunk[m].text
                        break
                    if chunk[m].text == ")":
                        break
                break
        if fp_name:
            names.append(fp_name)
            continue
        depth = 0
        last = None
        for t in chunk:
            if t.text in "([":
                depth += 1
            elif t.text in ")]":
                depth -= 1
            elif t.kind == "ident" and depth == 0 and t.text not in C_KEYWORDS:
                last = t.text
            elif t.text == "=" and depth == 0:
                break
        if last:
            names.append(last)
    return names


def _scan_calls(body: list[Tok], unit_fn_names: frozenset[str]) -> tuple[tuple[str, ...], tuple[str, ...]]:
    callees: list[str] = []
    seen = set()
    referenced: list[str] = []
    ref_seen = set()
    for j, t in enumerate(body):
        if t.kind != "ident" or t.text in NOT_CALLS or t.text in C_KEYWORDS:
            continue
        prev = body[j - 1] if j > 0 else None
        nxt = body[j + 1] if j + 1 < len(body) else None
        if nxt is not None and nxt.text == "(":
            if prev is not None and prev.text in (".", "->", "*"):
                continue  # member or pointer-indirect application
            if t.text not in seen:
                seen.add(t.text)
                callees.append(t.text)
        elif t.text in unit_fn_names:
            if prev is not None and prev.text in (".", "->"):
                continue
            if t.text not in ref_seen:
                ref_seen.add(t.text)
                referenced.append(t.text)
    return tuple(callees), tuple(referenced)


_ASM_KEYWORDS = ("__asm__", "__asm", "asm")


def parse_items(toks: list[Tok], end_line: int) -> list[FileItem]:
    items: list[FileItem] = []
    i = 0
    n = len(toks)
    while i < n:
        if toks[i].text == ";":
            i += 1
            continue
        start = i
        item = None
        if toks[i].text in _ASM_KEYWORDS:
            j = i + 1
            while j < n and toks[j].text in ("volatile", "__volatile__"):
                j += 1
            if j < n and toks[j].text == "(":
                close = _match_forward(toks, j, "(", ")")
                stop = close if close >= 0 else n - 1
                if close >= 0 and close + 1 < n and toks[close + 1].text == ";":
                    stop = close + 1
                items.append(_raw_item(toks, start, stop))
                i = stop + 1
                continue
            items.append(_raw_item(toks, start, start))
            i = start + 1
            continue

        j = i
        pdepth = 0
        while j < n:
            t = toks[j]
            if t.text == "(":
                pdepth += 1
            elif t.text == ")":
                pdepth -= 1
            elif t.text == "{" and pdepth == 0:
                prev = _significant_prev(toks, j)
                if prev is not None and prev.text == ")":
                    close = _match_forward(toks, j, "{", "}")
                    if close < 0:
                        item = _raw_item(toks, start, n - 1)
                        j = n
                        break
                    item = _function_item(toks, start, j, close)
                    j = close + 1
                    break
                close = _match_forward(toks, j, "{", "}")
                if close < 0:
                    item = _raw_item(toks, start, n - 1)
                    j = n
                    break
                j = close + 1
                continue
            elif t.text == ";" and pdepth == 0:
                item = _declaration_item(toks, start, j)
                j += 1
                break
            j += 1
        else:
            item = _raw_item(toks, start, n - 1)
        if item is None:
            item = _raw_item(toks, start, min(j, n - 1))
            j = max(j, start + 1)
        items.append(item)
        i = j
    return items


def _raw_item(toks: list[Tok], start: int, stop: int) -> FileItem:
    seg = toks[start : stop + 1]
    return FileItem(
        kind=ITEM_RAW,
        names=(),
        span=(toks[start].line, toks[stop].line),
        ident_refs=_collect_ident_refs(seg),
    )


def _render_tokens(toks: list[Tok]) -> str:
    out: list[str] = []
    for t in toks:
        if out and (t.kind in ("ident", "num") and (out[-1][-1].isalnum() or out[-1][-1] == "_")):
            out.append(" " + t.text)
        else:
            out.append(t.text)
    return "".join(out)


def _function_item(toks: list[Tok], start: int, brace: int, close: int) -> FileItem:
    # Walk back over trailing attribute/asm groups between ')' and '{'.
    k = brace - 1
    while k > start:
        if toks[k].text != ")":
            break
        op = _match_backward(toks, k)
        if op <= start:
            break
        before = toks[op - 1]
        if before.kind == "ident" and before.text in ("__attribute__", "__asm__", "__asm", "asm", "__declspec"):
            k = op - 2
            continue
        # op is the parameter list '('
        name_tok = toks[op - 1]
        if name_tok.kind != "ident" or name_tok.text in C_KEYWORDS:
            break
        head = toks[start : op - 1]
        params = toks[op + 1 : k]
        body = toks[brace + 1 : close]
        seg = toks[start : close + 1]
        is_static = any(t.text == "static" for t in head)
        return FileItem(
            kind=ITEM_FUNCTION,
            names=(name_tok.text,),
            span=(toks[start].line, toks[close].line),
            is_static=is_static,
            is_definition=True,
            ret_text=_render_tokens([t for t in head if t.text not in ("static", "extern", "inline", "__inline", "__inline__", "__extension__")]),
            params_text=_render_tokens(params),
            param_groups=_split_top_commas(params),
            body_tokens=body,
            ident_refs=_collect_ident_refs(seg),
        )
    return _raw_item(toks, start, close)


def _declaration_item(toks: list[Tok], start: int, semi: int) -> FileItem:
    seg = toks[start:semi]
    span = (toks[start].line, toks[semi].line)
    refs = _collect_ident_refs(seg)
    words = [t.text for t in seg]
    is_static = "static" in words
    is_extern = "extern" in words
    is_typedef = "typedef" in words

    # tagged struct/union/enum with a body
    tag = ""
    type_kw = ""
    body_toks: list[Tok] = []
    enumerators: list[str] = []
    for k, t in enumerate(seg):
        if t.kind == "ident" and t.text in ("struct", "union", "enum"):
            type_kw = t.text
            m = k + 1
            if m < len(seg) and seg[m].kind == "ident":
                tag = seg[m].text
                m += 1
            if m < len(seg) and seg[m].text == "{":
                close = _match_forward(seg, m, "{", "}")
                if close > 0:
                    body_toks = seg[m + 1 : close]
                    if t.text == "enum":
                        depth = 0
                        expect = True
                        for bt in body_toks:
                            if bt.text in "({[":
                                depth += 1
                            elif bt.text in ")}]":
                                depth -= 1
                            elif depth == 0 and expect and bt.kind == "ident":
                                enumerators.append(bt.text)
                                expect = False
                            elif depth == 0 and bt.text == ",":
                                expect = True
                    declarators = seg[close + 1 :]
                    decl_names = _declarator_names(declarators) if declarators else []
                    if is_typedef:
                        names = tuple(decl_names) + tuple(enumerators)
                        return FileItem(
                            kind=ITEM_TYPE, names=names, span=span, ident_refs=refs,
                            tag=tag, type_kw=type_kw, body_toks_for_fields=body_toks,
                        )
                    if decl_names:
                        # definition like `struct S {...} g;` declares both
                        return FileItem(
                            kind=ITEM_GLOBAL, names=tuple(decl_names), span=span,
                            is_static=is_static, is_definition=not is_extern,
                            ident_refs=refs, tag=tag, type_kw=type_kw,
                            body_toks_for_fields=body_toks,
                        )
                    return FileItem(
                        kind=ITEM_TYPE, names=tuple(enumerators), span=span,
                        ident_refs=refs, tag=tag, type_kw=type_kw,
                        body_toks_for_fields=body_toks,
                    )
            break

    if is_typedef:
        names = _declarator_names(seg[1:])
        return FileItem(kind=ITEM_TYPE, names=tuple(names), span=span, ident_refs=refs, tag=tag, type_kw=type_kw)

    # function prototype: ident immediately followed by '(' at depth 0,
    # not reached through a '(' (which would be a function pointer)
    proto_name = None
    proto_at = -1
    depth = 0
    for k, t in enumerate(seg):
        if t.text == "(":
            if (
                depth == 0
                and k > 0
                and seg[k - 1].kind == "ident"
                and seg[k - 1].text not in C_KEYWORDS
            ):
                proto_name = seg[k - 1].text
                proto_at = k
            depth += 1
        elif t.text == ")":
            depth -= 1
        elif t.text == "=" and depth == 0:
            proto_name = None
            break
    if proto_name:
        close = _match_forward(seg, proto_at, "(", ")")
        params = seg[proto_at + 1 : close] if close > 0 else []
        head = seg[: proto_at - 1]
        return FileItem(
            kind=ITEM_PROTO,
            names=(proto_name,),
            span=span,
            is_static=is_static,
            is_definition=False,
            ret_text=_render_tokens([t for t in head if t.text not in ("static", "extern", "inline", "__inline", "__inline__", "__extension__")]),
            params_text=_render_tokens(params),
            param_groups=_split_top_commas(params),
            ident_refs=refs,
        )

    names = _declarator_names(seg)
    if not names:
        return FileItem(kind=ITEM_RAW, names=(), span=span, ident_refs=refs)
    return FileItem(
        kind=ITEM_GLOBAL,
        names=tuple(names),
        span=span,
        is_static=is_static,
        is_definition=not is_extern,
        ident_refs=refs,
    )


def index_unit(unit: PreprocessedUnit) -> FileIndex:
    if not unit.ok or unit.pp_path is None:
        return FileIndex(unit=unit, items=[])
    text = Path(unit.pp_path).read_text()
    toks = tokenize(text)
    items = parse_items(toks, len(unit.lines))
    fn_names = frozenset(it.name for it in items if it.kind == ITEM_FUNCTION)
    for it in items:
        if it.kind == ITEM_FUNCTION:
            it.callees, it.referenced_fns = _scan_calls(it.body_tokens, fn_names)
    return FileIndex(unit=unit, items=items)


@dataclass
class RepoIndex:
    files: list[FileIndex]
    by_symbol: dict[str, list[DefinitionSite]] = field(default_factory=dict)
    origin_lookup: dict = field(default_factory=dict)

    @staticmethod
    def build(units: list[PreprocessedUnit]) -> "RepoIndex":
        files = [index_unit(u) for u in units]
        idx = RepoIndex(files=files)
        for fi in files:
            for it in fi.items:
                if it.kind == ITEM_RAW:
                    continue
                if it.kind in (ITEM_FUNCTION, ITEM_GLOBAL) and not it.is_definition:
                    continue
                if it.kind == ITEM_PROTO:
                    continue
                for name in it.names:
                    idx.by_symbol.setdefault(name, []).append(
                        DefinitionSite(symbol=name, kind=it.kind, unit_index=fi.unit.index, span=it.span, item=it)
                    )
                if it.tag:
                    idx.by_symbol.setdefault(it.tag, []).append(
                        DefinitionSite(symbol=it.tag, kind=ITEM_TYPE, unit_index=fi.unit.index, span=it.span, item=it)
                    )
        idx.origin_lookup = build_origin_lookup([fi.unit for fi in files])
        return idx

    # -- queries -------------------------------------------------------------

    def file_index(self, unit_index: int) -> FileIndex:
        return self.files[unit_index]

    def enclosing_function(self, file: str, line: int) -> Optional[FunctionDecl]:
        for unit_index, pp_line in self.origin_lookup.get((file, line), []):
            fi = self.files[unit_index]
            for it in fi.items:
                if it.kind == ITEM_FUNCTION and it.span[0] <= pp_line <= it.span[1]:
                    return FunctionDecl(
                        name=it.name,
                        unit_index=unit_index,
                        span=it.span,
                        is_static=it.is_static,
                        is_definition=True,
                        ret_text=it.ret_text,
                        params_text=it.params_text,
                        param_groups=it.param_groups,
                        item=it,
                    )
        return None

    def callees_of(self, fn: FunctionDecl) -> list[str]:
        return list(fn.item.callees)

    def locate_symbol(self, name: str, from_unit: Optional[int] = None) -> list[DefinitionSite]:
        sites = list(self.by_symbol.get(name, []))
        if not sites:
            return []
        from_rec = self.files[from_unit].unit.record if from_unit is not None else None

        def rank(site: DefinitionSite):
            rec = self.files[site.unit_index].unit.record
            if site.item.is_static and from_unit is not None and site.unit_index != from_unit:
                tier = 9  # static symbols resolve only from their own unit
            elif from_unit is not None and site.unit_index == from_unit:
                tier = 0
            elif from_rec is not None and Path(rec.source).parent == Path(from_rec.source).parent:
                tier = 1
            elif (
                from_rec is not None
                and from_rec.link_group is not None
                and rec.link_group == from_rec.link_group
            ):
                tier = 2
            else:
                tier = 3
            return (tier, rec.source, site.span[0])

        sites.sort(key=rank)
        if from_unit is not None:
            sites = [
                s for s in sites
                if not (s.item.is_static and s.unit_index != from_unit)
            ]
        return sites

    # -- type resolution ------------------------------------------------------

    def type_resolver(self) -> TypeResolver:
        def typedef_lookup(name: str):
            for site in self.by_symbol.get(name, []):
                if site.kind == ITEM_TYPE and name in site.item.names:
                    fi = self.files[site.unit_index]
                    text = _item_text(fi, site.item)
                    toks = tokenize(text)
                    if toks and toks[0].text == "typedef":
                        body = toks[1:]
                        if body and body[-1].text == ";":
                            body = body[:-1]
                        # drop the declared alias (last ident chain) best-effort:
                        # parse_param treats the alias as the declarator name
                        return body
            return None

        def struct_lookup(kw: str, tag: str):
            for site in self.by_symbol.get(tag, []):
                if site.kind == ITEM_TYPE and site.item.type_kw == kw and site.item.body_toks_for_fields:
                    return site.item.body_toks_for_fields
            return None

        enum_names = frozenset(
            n for sym, sites in self.by_symbol.items() for s in sites
            if s.item.type_kw == "enum" for n in (sym,)
        )
        return TypeResolver(typedef_lookup=typedef_lookup, struct_lookup=struct_lookup, enum_names=enum_names)

    def dump_json(self, path: Path) -> None:
        data: dict[str, list] = {}
        for sym, sites in sorted(self.by_symbol.items()):
            data[sym] = [
                {"unit": s.unit_index, "kind": s.kind, "start": s.span[0], "end": s.span[1]}
                for s in sites
            ]
        Path(path).write_text(json.dumps(data, indent=1))


def _item_text(fi: FileIndex, item: FileItem) -> str:
    lines = Path(fi.unit.pp_path).read_text().splitlines()
    return "\n".join(lines[item.span[0] - 1 : item.span[1]])
