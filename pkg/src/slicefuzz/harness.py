"""Type-aware fuzzing harness generation.

For the slice's root function, plans how each parameter decodes from the
fuzzer's byte buffer (scalars fixed-width little-endian, char pointers as
NUL-padded byte strings, char** as a counted, NULL-terminated string array,
structs field by field from the index), then emits a C file defining the
standard fuzzing entry point that performs exactly that decode, calls the
target once, and releases everything it allocated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .ctypes_model import SemanticCType
from .index import ITEM_GLOBAL, ITEM_TYPE, FunctionDecl, RepoIndex, _item_text
from .slicer import Slice

COUNT_CAP = 4096
STRING_CAP = 4096
ZEROED_BUFFER_BYTES = 4096


@dataclass
class ArgPlan:
    ctype: SemanticCType
    strategy: str   # fixed_width_scalar | byte_string | string_array |
                    # struct_fields | null_pointer | zeroed_buffer
    notes: str = ""
    fields: list[tuple[str, "ArgPlan"]] = field(default_factory=list)

    @property
    def prefix_bytes(self) -> int:
        if self.strategy == "fixed_width_scalar":
            return max(1, self.ctype.width // 8)
        if self.strategy == "byte_string":
            return 2
        if self.strategy == "string_array":
            return 8
        if self.strategy == "struct_fields":
            return sum(p.prefix_bytes for _, p in self.fields)
        return 0


@dataclass
class HarnessSpec:
    target: FunctionDecl
    arg_plans: list[ArgPlan]
    prefix_bytes: int
    globals_policy: str = "zero_init"
    fn_ptr_policy: str = "null"
    globals_referenced: list[str] = field(default_factory=list)
    type_prelude: list[str] = field(default_factory=list)
    proto_text: str = ""
    notes: list[str] = field(default_factory=list)


@dataclass
class Unfuzzable:
    reason: str


def _is_charish(ct: SemanticCType) -> bool:
    return ct.kind == "char" or (ct.kind in ("signed_int", "unsigned_int") and ct.width == 8)


def _plan_type(ct: SemanticCType, pointer_hop: bool = False) -> ArgPlan:
    if ct.is_scalar:
        return ArgPlan(ct, "fixed_width_scalar")
    if ct.kind == "function_ptr":
        return ArgPlan(ct, "null_pointer", notes="function pointers are not fuzzed")
    if ct.kind == "array":
        inner = ct.pointee
        adjusted = SemanticCType("pointer", pointee=inner, text=ct.text)
        return _plan_type(adjusted, pointer_hop)
    if ct.kind == "pointer":
        pt = ct.pointee
        if pt is None:
            return ArgPlan(ct, "zeroed_buffer", notes="pointer with unknown pointee")
        if _is_charish(pt):
            return ArgPlan(ct, "byte_string", notes="char pointer treated as NUL-padded byte string")
        if pt.kind in ("pointer", "array") and pt.pointee is not None and _is_charish(pt.pointee):
            return ArgPlan(ct, "string_array")
        if pt.kind == "struct_t":
            if pt.unfuzzable_reason or not pt.fields:
                return ArgPlan(ct, "zeroed_buffer", notes=f"unfuzzable field: {pt.unfuzzable_reason or 'no resolvable fields'}")
            return ArgPlan(ct, "struct_fields", fields=[(n, _plan_field(f)) for n, f in pt.fields])
        if pt.kind == "union_t":
            return ArgPlan(ct, "zeroed_buffer", notes="unfuzzable field: union")
        if pt.kind == "void" or pt.kind == "opaque":
            return ArgPlan(ct, "zeroed_buffer", notes=f"opaque pointee {pt.tag or pt.kind}")
        if pt.is_scalar:
            # one decoded element behind an allocation
            return ArgPlan(ct, "struct_fields", fields=[("", ArgPlan(pt, "fixed_width_scalar"))],
                           notes="pointer to scalar decoded as a single element")
        if pt.kind == "function_ptr":
            return ArgPlan(ct, "null_pointer")
        return ArgPlan(ct, "zeroed_buffer", notes=f"unhandled pointee kind {pt.kind}")
    if ct.kind == "struct_t":
        if ct.unfuzzable_reason or not ct.fields:
            return ArgPlan(ct, "zeroed_buffer", notes=f"unfuzzable field: {ct.unfuzzable_reason or 'no resolvable fields'}")
        return ArgPlan(ct, "struct_fields", fields=[(n, _plan_field(f)) for n, f in ct.fields])
    if ct.kind == "union_t":
        return ArgPlan(ct, "zeroed_buffer", notes="unfuzzable field: union")
    return ArgPlan(ct, "zeroed_buffer", notes=f"unhandled kind {ct.kind}")


def _plan_field(ct: SemanticCType) -> ArgPlan:
    plan = _plan_type(ct)
    return plan


def plan_arguments(target: FunctionDecl, idx: RepoIndex):
    """HarnessSpec for the slice root, or Unfuzzable(reason)."""
    resolver = idx.type_resolver()
    params = []
    for group in target.param_groups:
        if not group:
            continue
        name, ct = resolver.parse_param(group)
        if ct.kind == "void" and len(target.param_groups) == 1:
            continue
        params.append((name, ct))

    globals_referenced = _direct_globals(target, idx)

    if any(ct.tag == "..." for _, ct in params):
        return Unfuzzable("variadic target")
    if not params and globals_referenced:
        return Unfuzzable("zero-information signature: depends only on globals "
                          f"({', '.join(globals_referenced)})")

    plans = []
    notes: list[str] = []
    for name, ct in params:
        if ct.kind == "opaque" and ct.unfuzzable_reason:
            return Unfuzzable(f"parameter {name or '?'}: {ct.unfuzzable_reason}")
        plan = _plan_type(ct)
        if plan.notes:
            notes.append(f"{name or '?'}: {plan.notes}")
        plans.append(plan)

    spec = HarnessSpec(
        target=target,
        arg_plans=plans,
        prefix_bytes=sum(p.prefix_bytes for p in plans),
        globals_referenced=globals_referenced,
        notes=notes,
    )
    spec.type_prelude = _collect_type_prelude(plans, idx)
    ret = target.ret_text.strip() or "int"
    spec.proto_text = f"extern {ret} {target.name}({target.params_text.strip() or 'void'});"
    return spec


def _direct_globals(target: FunctionDecl, idx: RepoIndex) -> list[str]:
    names = []
    for ref in sorted(target.item.ident_refs):
        for site in idx.by_symbol.get(ref, []):
            if site.kind == ITEM_GLOBAL and site.item.is_definition:
                names.append(ref)
                break
    return names


def _collect_type_prelude(plans: list[ArgPlan], idx: RepoIndex) -> list[str]:
    out: list[str] = []
    seen: set[str] = set()

    def visit(ct: Optional[SemanticCType]) -> None:
        if ct is None:
            return
        visit(ct.pointee)
        for _, f in ct.fields:
            visit(f)
        tag = ct.tag
        if ct.kind in ("struct_t", "union_t", "enum_t") and tag and tag not in seen:
            for site in idx.by_symbol.get(tag, []):
                if site.kind == ITEM_TYPE:
                    seen.add(tag)
                    out.append(_item_text(idx.files[site.unit_index], site.item))
                    break

    for p in plans:
        visit(p.ctype)
        for _, f in p.fields:
            visit(f.ctype)
    return out


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


class _Emitter:
    def __init__(self) -> None:
        self.lines: list[str] = []
        self.frees: list[str] = []
        self.tmp = 0

    def w(self, text: str = "") -> None:
        self.lines.append(text)

    def fresh(self, base: str) -> str:
        self.tmp += 1
        return f"{base}_{self.tmp}"


def _scalar_c_type(ct: SemanticCType) -> str:
    width = max(8, ct.width)
    if ct.kind == "floating":
        return "float" if width == 32 else "double"
    if ct.kind in ("bool",):
        return "uint8_t"
    if ct.kind == "enum_t":
        return "int32_t"
    u = "u" if ct.kind == "unsigned_int" else ""
    if ct.kind == "char":
        return "char"
    return f"{u}int{width}_t"


def _emit_scalar(e: _Emitter, var: str, ct: SemanticCType, declare: bool = True) -> None:
    cty = _scalar_c_type(ct)
    width = max(1, ct.width // 8)
    if declare:
        e.w(f"    {cty} {var} = 0;")
    e.w(f"    sf_take_scalar(&cur, &{var}, {width});")


def _emit_byte_string(e: _Emitter, var: str) -> None:
    hdr = e.fresh("len")
    e.w(f"    char *{var} = NULL;")
    e.w(f"    uint16_t {hdr} = 0;")
    e.w(f"    sf_take_u16(&cur, &{hdr});")
    e.w(f"    {var} = sf_take_cstring(&cur, {hdr} % {STRING_CAP}u);")
    e.w(f"    if (!{var}) goto done;")
    e.frees.append(f"free({var});")


def _emit_string_array(e: _Emitter, var: str) -> None:
    raw = e.fresh("raw")
    n = f"{var}_n"
    i = e.fresh("i")
    chunk = e.fresh("chunk")
    e.w(f"    char **{var} = NULL;")
    e.w(f"    size_t {n} = 0;")
    e.w(f"    uint64_t {raw} = 0;")
    e.w(f"    sf_take_u64(&cur, &{raw});")
    e.w(f"    {n} = sf_count_from_header({raw}, {COUNT_CAP});")
    e.w(f"    size_t {chunk} = sf_cursor_remaining(&cur) / {n};")
    e.w(f"    {var} = calloc({n} + 1, sizeof(char *));")
    e.w(f"    if (!{var}) goto done;")
    e.w(f"    for (size_t {i} = 0; {i} < {n}; {i}++) {{")
    e.w(f"        {var}[{i}] = sf_take_cstring(&cur, {chunk});")
    e.w(f"        if (!{var}[{i}]) goto done;")
    e.w("    }")
    e.frees.append(
        f"if ({var}) {{ for (size_t k = 0; k < {n}; k++) free({var}[k]); free({var}); }}"
    )


def _emit_struct_fields(e: _Emitter, var: str, plan: ArgPlan, struct_text: str) -> str:
    """Declares <var>_val of the struct type, fills fields, returns &<var>_val."""
    val = f"{var}_val"
    e.w(f"    {struct_text} {val};")
    e.w(f"    memset(&{val}, 0, sizeof({val}));")
    _fill_struct(e, val, plan)
    return val


def _fill_struct(e: _Emitter, base: str, plan: ArgPlan) -> None:
    for idx_f, (fname, fplan) in enumerate(plan.fields):
        target = f"{base}.{fname}" if fname else f"(*(&{base}))"
        if fplan.strategy == "fixed_width_scalar":
            width = max(1, fplan.ctype.width // 8)
            e.w(f"    sf_take_scalar(&cur, &{target}, {width});")
        elif fplan.strategy == "byte_string":
            tmp = e.fresh("fstr")
            _emit_byte_string(e, tmp)
            e.w(f"    {base}.{fname} = {tmp};") if fname else e.w(f"    {target} = {tmp};")
        elif fplan.strategy == "struct_fields" and fplan.ctype.kind == "struct_t":
            _fill_struct(e, target, fplan)
        elif fplan.strategy == "null_pointer":
            e.w(f"    /* field {fname}: function pointer left NULL */")
        else:
            e.w(f"    /* field {fname}: left zeroed ({fplan.notes or fplan.strategy}) */")


def _struct_type_text(ct: SemanticCType) -> str:
    if ct.kind == "struct_t" and ct.tag:
        return f"struct {ct.tag}"
    if ct.kind == "union_t" and ct.tag:
        return f"union {ct.tag}"
    return ct.tag or "struct _unknown"


def emit_harness(spec: HarnessSpec, slice_: Optional[Slice] = None) -> str:
    """C source for the fuzzing entry point implementing the decode plan."""
    e = _Emitter()
    e.w("/* Generated fuzzing harness. Decodes the engine's byte buffer into")
    e.w(f" * arguments for {spec.target.name} and calls it once. */")
    e.w("#include <stdint.h>")
    e.w("#include <stdlib.h>")
    e.w("#include <string.h>")
    e.w('#include "byte_cursor.h"')
    e.w()
    for text in spec.type_prelude:
        e.w(text)
        e.w()
    e.w(spec.proto_text)
    e.w()
    e.w("int LLVMFuzzerTestOneInput(const uint8_t *Fuzz_Data, size_t Fuzz_Size)")
    e.w("{")
    if spec.prefix_bytes:
        e.w(f"    if (Fuzz_Size < {spec.prefix_bytes})")
        e.w("        return 0;")
    e.w("    sf_cursor cur;")
    e.w("    sf_cursor_init(&cur, Fuzz_Data, Fuzz_Size);")
    e.w()

    call_args: list[str] = []
    arg_debug: list[tuple[str, str]] = []
    for i, plan in enumerate(spec.arg_plans):
        var = f"a{i}"
        if plan.strategy == "fixed_width_scalar":
            _emit_scalar(e, var, plan.ctype)
            call_args.append(var)
            arg_debug.append((var, "scalar"))
        elif plan.strategy == "byte_string":
            _emit_byte_string(e, var)
            call_args.append(var)
            arg_debug.append((var, "string"))
        elif plan.strategy == "string_array":
            _emit_string_array(e, var)
            call_args.append(f"(void *){var}")
        elif plan.strategy == "struct_fields" and plan.ctype.kind == "pointer":
            pt = plan.ctype.pointee
            if pt is not None and pt.kind == "struct_t":
                val = _emit_struct_fields(e, var, plan, _struct_type_text(pt))
                call_args.append(f"&{val}")
            else:
                # pointer to scalar: decode one element
                inner = plan.fields[0][1]
                _emit_scalar(e, f"{var}_elem", inner.ctype)
                call_args.append(f"&{var}_elem")
        elif plan.strategy == "struct_fields":
            val = _emit_struct_fields(e, var, plan, _struct_type_text(plan.ctype))
            call_args.append(val)
        elif plan.strategy == "null_pointer":
            e.w(f"    void *{var} = NULL;")
            call_args.append(var)
        else:  # zeroed_buffer
            e.w(f"    uint8_t {var}_buf[{ZEROED_BUFFER_BYTES}];")
            e.w(f"    memset({var}_buf, 0, sizeof({var}_buf));")
            e.w(f"    void *{var} = {var}_buf;")
            call_args.append(var)
        e.w()

    if arg_debug:
        e.w("#ifdef SF_DEBUG_DECODE")
        for var, kind in arg_debug:
            if kind == "scalar":
                e.w(f'    fprintf(stderr, "decode {var}=%llx\\n", (unsigned long long){var});')
            else:
                e.w(f'    fprintf(stderr, "decode {var}=%s\\n", {var});')
        e.w("#endif")
        e.w()

    e.w(f"    {spec.target.name}({', '.join(call_args)});")
    e.w()
    e.w("done:")
    for stmt in reversed(e.frees):
        e.w(f"    {stmt}")
    e.w("    return 0;")
    e.w("}")

    text = "\n".join(e.lines) + "\n"
    if "goto done" not in text:
        # avoid an unused-label warning turning into noise
        text = text.replace("\ndone:\n", "\n")
    if "SF_DEBUG_DECODE" in text:
        text = text.replace('#include "byte_cursor.h"', '#include <stdio.h>\n#include "byte_cursor.h"')
    return text


def emit_stub_target(spec: HarnessSpec) -> str:
    """A no-op definition matching the target's prototype, for harness-only
    memory-safety testing."""
    ret = spec.target.ret_text.strip() or "int"
    params = spec.target.params_text.strip() or "void"
    body = "" if ret == "void" else f"    return ({ret})0;\n"
    prelude = "\n\n".join(spec.type_prelude)
    if prelude:
        prelude += "\n\n"
    return f"{prelude}{ret} {spec.target.name}({params})\n{{\n{body}}}\n"


def write_harness(spec: HarnessSpec, work_dir: Path, slice_: Optional[Slice] = None) -> Path:
    path = Path(work_dir) / "harness.c"
    path.write_text(emit_harness(spec, slice_))
    return path
