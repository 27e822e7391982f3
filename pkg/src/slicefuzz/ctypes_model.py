"""Semantic model of C parameter and field types for harness planning."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .ctok import Tok

# kind values: void bool char signed_int unsigned_int floating enum_t pointer
#              array struct_t union_t function_ptr opaque


@dataclass
class SemanticCType:
    kind: str
    width: int = 0                      # bits, for scalar kinds
    pointee: Optional["SemanticCType"] = None
    tag: str = ""                       # struct/union/enum tag or typedef name
    text: str = ""                      # how the type was written, for prototypes
    fields: list[tuple[str, "SemanticCType"]] = field(default_factory=list)
    unfuzzable_reason: str = ""

    @property
    def is_scalar(self) -> bool:
        return self.kind in ("bool", "char", "signed_int", "unsigned_int", "floating", "enum_t")


_BASE_WIDTHS = {
    ("char",): ("char", 8),
    ("signed", "char"): ("signed_int", 8),
    ("unsigned", "char"): ("unsigned_int", 8),
    ("short",): ("signed_int", 16),
    ("short", "int"): ("signed_int", 16),
    ("signed", "short"): ("signed_int", 16),
    ("signed", "short", "int"): ("signed_int", 16),
    ("unsigned", "short"): ("unsigned_int", 16),
    ("unsigned", "short", "int"): ("unsigned_int", 16),
    ("int",): ("signed_int", 32),
    ("signed",): ("signed_int", 32),
    ("signed", "int"): ("signed_int", 32),
    ("unsigned",): ("unsigned_int", 32),
    ("unsigned", "int"): ("unsigned_int", 32),
    ("long",): ("signed_int", 64),
    ("long", "int"): ("signed_int", 64),
    ("signed", "long"): ("signed_int", 64),
    ("signed", "long", "int"): ("signed_int", 64),
    ("unsigned", "long"): ("unsigned_int", 64),
    ("unsigned", "long", "int"): ("unsigned_int", 64),
    ("long", "long"): ("signed_int", 64),
    ("long", "long", "int"): ("signed_int", 64),
    ("signed", "long", "long"): ("signed_int", 64),
    ("signed", "long", "long", "int"): ("signed_int", 64),
    ("unsigned", "long", "long"): ("unsigned_int", 64),
    ("unsigned", "long", "long", "int"): ("unsigned_int", 64),
    ("float",): ("floating", 32),
    ("double",): ("floating", 64),
    ("long", "double"): ("floating", 64),
    ("void",): ("void", 0),
    ("_Bool",): ("bool", 8),
}

_WELL_KNOWN_TYPEDEFS = {
    "size_t": ("unsigned_int", 64),
    "ssize_t": ("signed_int", 64),
    "ptrdiff_t": ("signed_int", 64),
    "intptr_t": ("signed_int", 64),
    "uintptr_t": ("unsigned_int", 64),
    "int8_t": ("signed_int", 8),
    "int16_t": ("signed_int", 16),
    "int32_t": ("signed_int", 32),
    "int64_t": ("signed_int", 64),
    "uint8_t": ("unsigned_int", 8),
    "uint16_t": ("unsigned_int", 16),
    "uint32_t": ("unsigned_int", 32),
    "uint64_t": ("unsigned_int", 64),
    "bool": ("bool", 8),
    "wchar_t": ("signed_int", 32),
    "off_t": ("signed_int", 64),
    "time_t": ("signed_int", 64),
}

_QUALIFIERS = frozenset(
    """const volatile restrict register __restrict __restrict__ __const
    _Atomic __extension__ inline __inline __inline__""".split()
)


def _split_top_commas(toks: list[Tok]) -> list[list[Tok]]:
    parts: list[list[Tok]] = []
    depth = 0
    cur: list[Tok] = []
    for t in toks:
        if t.text in "([{":
            depth += 1
        elif t.text in ")]}":
            depth -= 1
        if t.text == "," and depth == 0:
            parts.append(cur)
            cur = []
        else:
            cur.append(t)
    if cur:
        parts.append(cur)
    return parts


class TypeResolver:
    """Parses parameter/field declarations into SemanticCType.

    typedef and struct tags resolve through lookup callbacks supplied by the
    repository index; unresolvable names degrade to opaque, never to errors.
    """

    def __init__(self, typedef_lookup=None, struct_lookup=None, enum_names=None):
        self.typedef_lookup = typedef_lookup or (lambda name: None)
        self.struct_lookup = struct_lookup or (lambda kw, tag: None)
        self.enum_names = enum_names or frozenset()

    # -- declarations ------------------------------------------------------

    def parse_param(self, toks: list[Tok], depth: int = 0) -> tuple[str, SemanticCType]:
        """One parameter declaration -> (name or '', type)."""
        toks = [t for t in toks if t.text not in _QUALIFIERS]
        if not toks:
            return "", SemanticCType("void", text="void")
        if len(toks) == 1 and toks[0].text == "void":
            return "", SemanticCType("void", text="void")
        if any(t.text == "..." for t in toks):
            return "", SemanticCType("opaque", tag="...", text="...", unfuzzable_reason="variadic")

        text = _render(toks)
        base, rest = self._parse_base(toks, depth)
        name, ctype = self._parse_declarator(rest, base, depth)
        ctype.text = text
        return name, ctype

    def _parse_base(self, toks: list[Tok], depth: int) -> tuple[SemanticCType, list[Tok]]:
        i = 0
        words: list[str] = []
        while i < len(toks) and toks[i].kind == "ident":
            w = toks[i].text
            if w in ("struct", "union", "enum"):
                kw = w
                i += 1
                tag = ""
                if i < len(toks) and toks[i].kind == "ident":
                    tag = toks[i].text
                    i += 1
                # skip an inline body if present
                if i < len(toks) and toks[i].text == "{":
                    d = 0
                    start = i
                    while i < len(toks):
                        if toks[i].text == "{":
                            d += 1
                        elif toks[i].text == "}":
                            d -= 1
                            if d == 0:
                                i += 1
                                break
                        i += 1
                    body = toks[start + 1 : i - 1]
                    return self._struct_from_body(kw, tag, body, depth), toks[i:]
                if kw == "enum":
                    return SemanticCType("enum_t", width=32, tag=tag), toks[i:]
                return self._resolve_tag(kw, tag, depth), toks[i:]
            if w in ("void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool"):
                words.append(w)
                i += 1
                continue
            if not words:
                # a typedef name (or unknown identifier) acting as the base
                resolved = self._resolve_typedef(w, depth)
                if resolved is not None:
                    return resolved, toks[i + 1 :]
                if w in self.enum_names:
                    return SemanticCType("enum_t", width=32, tag=w), toks[i + 1 :]
                # unknown word: peek — if a declarator follows, treat as opaque base
                return SemanticCType("opaque", tag=w, unfuzzable_reason=f"unknown type {w}"), toks[i + 1 :]
            break
        if words:
            key = tuple(words)
            if key in _BASE_WIDTHS:
                kind, width = _BASE_WIDTHS[key]
                return SemanticCType(kind, width=width), toks[i:]
            return SemanticCType("opaque", tag=" ".join(words), unfuzzable_reason="unrecognized base"), toks[i:]
        return SemanticCType("signed_int", width=32), toks[i:]  # implicit int

    def _parse_declarator(self, toks: list[Tok], base: SemanticCType, depth: int) -> tuple[str, SemanticCType]:
        ctype = base
        i = 0
        while i < len(toks) and toks[i].text == "*":
            ctype = SemanticCType("pointer", pointee=ctype)
            i += 1
            while i < len(toks) and toks[i].text in _QUALIFIERS:
                i += 1

        # function pointer: ( * name ) ( params )
        if (
            i < len(toks)
            and toks[i].text == "("
            and i + 1 < len(toks)
            and toks[i + 1].text == "*"
        ):
            name = ""
            j = i + 2
            while j < len(toks) and toks[j].text != ")":
                if toks[j].kind == "ident":
                    name = toks[j].text
                j += 1
            return name, SemanticCType("function_ptr", tag=name)

        name = ""
        if i < len(toks) and toks[i].kind == "ident" and toks[i].text not in ("struct", "union", "enum"):
            name = toks[i].text
            i += 1

        while i < len(toks) and toks[i].text == "[":
            # an array parameter adjusts to a pointer; nested arrays collapse too
            d = 0
            while i < len(toks):
                if toks[i].text == "[":
                    d += 1
                elif toks[i].text == "]":
                    d -= 1
                    if d == 0:
                        i += 1
                        break
                i += 1
            ctype = SemanticCType("array", pointee=ctype)

        if i < len(toks) and toks[i].text == "(":
            return name, SemanticCType("function_ptr", tag=name)
        return name, ctype

    # -- struct resolution ---------------------------------------------------

    def _struct_from_body(self, kw: str, tag: str, body: list[Tok], depth: int) -> SemanticCType:
        kind = "struct_t" if kw == "struct" else "union_t"
        out = SemanticCType(kind, tag=tag)
        if kw == "union":
            out.unfuzzable_reason = "union field"
            return out
        if depth > 4:
            out.unfuzzable_reason = "nesting too deep"
            return out
        for decl in _split_decls(body):
            if any(t.text == ":" for t in decl):
                out.unfuzzable_reason = "bitfield"
                continue
            for chunk in self._expand_multi(decl):
                name, ftype = self.parse_param(chunk, depth + 1)
                out.fields.append((name, ftype))
        return out

    def _expand_multi(self, decl: list[Tok]) -> list[list[Tok]]:
        # int a, b; -> [int a, int b]; keeps single declarations untouched
        parts = _split_top_commas(decl)
        if len(parts) <= 1:
            return parts
        head = parts[0]
        split_at = 0
        for k, t in enumerate(head):
            if t.kind == "ident" and t.text not in ("struct", "union", "enum"):
                split_at = k  # last ident is the declarator name
        base = head[:split_at]
        out = [head]
        for extra in parts[1:]:
            out.append(base + extra)
        return out

    def _resolve_tag(self, kw: str, tag: str, depth: int) -> SemanticCType:
        found = self.struct_lookup(kw, tag)
        if found is None:
            out = SemanticCType("struct_t" if kw == "struct" else "union_t", tag=tag)
            out.unfuzzable_reason = f"opaque {kw} {tag}"
            return out
        return self._struct_from_body(kw, tag, found, depth)

    def _resolve_typedef(self, name: str, depth: int) -> Optional[SemanticCType]:
        if name in _WELL_KNOWN_TYPEDEFS:
            kind, width = _WELL_KNOWN_TYPEDEFS[name]
            return SemanticCType(kind, width=width, tag=name)
        if depth > 8:
            return SemanticCType("opaque", tag=name, unfuzzable_reason="typedef chain too deep")
        under = self.typedef_lookup(name)
        if under is None:
            return None
        _, ctype = self.parse_param(under, depth + 1)
        if not ctype.tag:
            ctype.tag = name
        return ctype


def _split_decls(body: list[Tok]) -> list[list[Tok]]:
    decls: list[list[Tok]] = []
    depth = 0
    cur: list[Tok] = []
    for t in body:
        if t.text in "({[":
            depth += 1
        elif t.text in ")}]":
            depth -= 1
        if t.text == ";" and depth == 0:
            if cur:
                decls.append(cur)
            cur = []
        else:
            cur.append(t)
    if cur:
        decls.append(cur)
    return decls


def _render(toks: list[Tok]) -> str:
    out: list[str] = []
    for t in toks:
        if out and t.kind == "ident" and out[-1][-1].isalnum():
            out.append(" " + t.text)
        elif t.text == "*" and out:
            out.append(" *")
        else:
            out.append(t.text)
    return "".join(out)
