"""Minimal compilable slice construction.

Per warning: retain the enclosing function and its same-unit callee closure,
drop every other function definition, keep referenced declarations/types/
globals, compile with the recorded build arguments, and let compiler and
linker diagnostics drive discovery of cross-file dependencies until the slice
compiles (or provably cannot).
"""

from __future__ import annotations

import json
import re
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .buildcap import CompilationDatabase, PreprocessedUnit
from .ctok import C_KEYWORDS
from .index import (
    ITEM_FUNCTION,
    ITEM_GLOBAL,
    ITEM_PROTO,
    ITEM_RAW,
    ITEM_TYPE,
    FileIndex,
    FileItem,
    FunctionDecl,
    RepoIndex,
)
from .warnings_io import Warning


class ToolchainError(Exception):
    """The compiler itself could not be invoked (distinct from compile errors)."""


@dataclass
class RetainedSpan:
    item: FileItem
    provenance: str
    round_added: int


@dataclass
class MinimizedFile:
    unit_index: int
    origin_source: str
    emitted_path: Path
    retained: list[RetainedSpan]
    injected_decls: list[tuple[str, str]]            # (text, provenance)
    emitted_line_map: list[Optional[tuple[str, int]]]
    emitted_lines: list[str] = field(default_factory=list)
    retained_lines: int = 0

    def write(self, out_dir: Path, stem: str) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.emitted_path = out_dir / f"{stem}.c"
        self.emitted_path.write_text("\n".join(self.emitted_lines) + "\n")
        return self.emitted_path


@dataclass
class SliceCaps:
    max_rounds: int = 25
    max_retained: int = 10000


@dataclass
class Slice:
    warning: Warning
    root_fn: Optional[FunctionDecl]
    files: list[MinimizedFile] = field(default_factory=list)
    objects: list[Path] = field(default_factory=list)
    link_extras: list[str] = field(default_factory=list)
    rounds: int = 0
    status: str = "not_compiled"
    reason: str = ""
    unresolved: list[str] = field(default_factory=list)
    compile_seconds: float = 0.0
    retained_lines: int = 0
    project_lines: int = 0

    @property
    def compiled(self) -> bool:
        return self.status == "compiled"


# ---------------------------------------------------------------------------
# Single-file minimization
# ---------------------------------------------------------------------------


def minimize_file(
    fi: FileIndex,
    roots: dict[str, str],
    destatic: frozenset[str] = frozenset(),
    injected: Optional[list[tuple[str, str]]] = None,
    round_of: Optional[dict[str, int]] = None,
) -> MinimizedFile:
    """BFS closure over same-unit callees plus referenced support items.

    roots maps identifier -> provenance. Function roots seed the callee BFS;
    type/global roots force-retain their defining items. Raw blocks are always
    kept (their contents cannot be analyzed for references).
    """
    round_of = round_of or {}
    items = fi.items
    fn_by_name = {it.name: it for it in items if it.kind == ITEM_FUNCTION}

    for name in roots:
        if name not in fn_by_name and not any(name in it.names or name == it.tag for it in items):
            raise KeyError(f"root {name!r} not defined in unit {fi.unit.index}")

    retained: dict[int, RetainedSpan] = {}

    def keep(item: FileItem, provenance: str, rnd: int = 1) -> None:
        key = id(item)
        if key not in retained:
            retained[key] = RetainedSpan(item, provenance, rnd)

    # function BFS
    queue: list[tuple[str, str]] = []
    visited: set[str] = set()
    for name, prov in roots.items():
        if name in fn_by_name:
            queue.append((name, prov))
    while queue:
        name, prov = queue.pop(0)
        if name in visited:
            continue
        visited.add(name)
        item = fn_by_name[name]
        keep(item, prov, round_of.get(name, 1))
        for callee in item.callees:
            if callee in fn_by_name and callee not in visited:
                queue.append((callee, f"bfs:{name}"))

    # non-function roots (types/globals demanded by compiler diagnostics)
    for name, prov in roots.items():
        if name in fn_by_name:
            continue
        for it in items:
            if it.kind in (ITEM_TYPE, ITEM_GLOBAL, ITEM_PROTO) and (name in it.names or name == it.tag):
                keep(it, prov, round_of.get(name, 1))
                break

    # raw blocks are retained verbatim
    for it in items:
        if it.kind == ITEM_RAW:
            keep(it, "raw")

    # reference-closure fixpoint over declarations, types, globals, prototypes
    changed = True
    while changed:
        changed = False
        needed: set[str] = set()
        for span in retained.values():
            needed.update(span.item.ident_refs)
        for it in items:
            if id(it) in retained or it.kind == ITEM_FUNCTION:
                continue
            names = set(it.names)
            if it.tag:
                names.add(it.tag)
            if names & needed:
                keep(it, "ref")
                changed = True

    ordered = sorted(retained.values(), key=lambda s: s.item.span[0])
    return _emit(fi, ordered, destatic, injected or [])


def _emit(
    fi: FileIndex,
    ordered: list[RetainedSpan],
    destatic: frozenset[str],
    injected: list[tuple[str, str]],
) -> MinimizedFile:
    src_lines = Path(fi.unit.pp_path).read_text().splitlines()
    out: list[str] = []
    line_map: list[Optional[tuple[str, int]]] = []
    retained_lines = 0

    def synthetic(text: str) -> None:
        out.append(text)
        line_map.append(None)

    first_fn_at = next(
        (i for i, s in enumerate(ordered) if s.item.kind == ITEM_FUNCTION), len(ordered)
    )

    for i, span in enumerate(ordered):
        if i == first_fn_at:
            for text, prov in injected:
                synthetic(f"/* slicefuzz: injected ({prov}) */")
                synthetic(text)
        item = span.item
        label = item.name or item.tag or item.kind
        synthetic(f"/* slicefuzz: {item.kind} {label} via {span.provenance} round {span.round_added} */")
        body = src_lines[item.span[0] - 1 : item.span[1]]
        if item.kind == ITEM_FUNCTION and item.name in destatic and item.is_static:
            body = list(body)
            for k, text in enumerate(body):
                new = re.sub(r"\bstatic\b", "", text, count=1)
                if new != text:
                    body[k] = new
                    break
        for offset, text in enumerate(body):
            out.append(text)
            pp_line = item.span[0] + offset
            origin = fi.unit.lines[pp_line - 1]
            line_map.append((origin.file, origin.line) if origin.project else None)
            retained_lines += 1

    if first_fn_at == len(ordered):
        for text, prov in injected:
            synthetic(f"/* slicefuzz: injected ({prov}) */")
            synthetic(text)

    return MinimizedFile(
        unit_index=fi.unit.index,
        origin_source=fi.unit.record.source,
        emitted_path=Path(),  # assigned by write()
        retained=ordered,
        injected_decls=list(injected),
        emitted_line_map=line_map,
        emitted_lines=out,
        retained_lines=retained_lines,
    )


# ---------------------------------------------------------------------------
# Compilation attempts and diagnostic parsing
# ---------------------------------------------------------------------------

SLICE_COMPILE_FLAGS = ["-Werror=implicit-function-declaration"]

_QUOTE_TRANS = str.maketrans({"‘": "'", "’": "'", "`": "'", "´": "'"})

DIAGNOSTIC_PATTERNS = [
    r"implicit declaration of function '(?P<ref>[A-Za-z_]\w*)'",
    r"call to undeclared function '(?P<ref>[A-Za-z_]\w*)'",
    r"use of undeclared identifier '(?P<ref>[A-Za-z_]\w*)'",
    r"'(?P<ref>[A-Za-z_]\w*)' undeclared",
    r"unknown type name '(?P<ref>[A-Za-z_]\w*)'",
    r"undefined reference to '(?P<ref>[A-Za-z_]\w*)'",
    r"undefined symbol: (?P<ref>[A-Za-z_]\w*)",
]

_MULTIDEF_RE = re.compile(r"multiple definition of '(?P<ref>[A-Za-z_.]\w*)'")


@dataclass
class CompileResult:
    ok: bool
    objects: list[Path]
    log: str
    phase: str = "compile"   # compile | link


def extract_missing_refs(log: str, patterns: Optional[list[str]] = None) -> list[str]:
    """Identifiers named by missing-reference diagnostics, first-seen order."""
    text = log.translate(_QUOTE_TRANS)
    refs: list[str] = []
    seen: set[str] = set()
    hits = []
    for pat in patterns or DIAGNOSTIC_PATTERNS:
        for m in re.finditer(pat, text):
            hits.append((m.start(), m.group("ref")))
    for _, ref in sorted(hits):
        if ref not in seen and ref not in C_KEYWORDS:
            seen.add(ref)
            refs.append(ref)
    return refs


def duplicate_symbols(log: str) -> list[str]:
    text = log.translate(_QUOTE_TRANS)
    return sorted({m.group("ref") for m in _MULTIDEF_RE.finditer(text)})


def _tool_for(db: CompilationDatabase, rec) -> str:
    return db.toolchain.get("tools", {}).get(rec.tool) or db.toolchain.get("cc", "cc")


def _swap_compile_args(rec, emitted: Path, obj: Path) -> list[str]:
    args = []
    skip = False
    swapped_src = False
    for a in rec.args:
        if skip:
            args.append(str(obj))
            skip = False
            continue
        if a == "-o":
            args.append(a)
            skip = True
            continue
        resolved = str((Path(rec.directory) / a).resolve()) if not a.startswith("-") else a
        if not a.startswith("-") and resolved == rec.source:
            args.append(str(emitted))
            swapped_src = True
            continue
        args.append(a)
    if not swapped_src:
        args.append(str(emitted))
    if "-o" not in rec.args:
        args += ["-o", str(obj)]
    return args


_STUB_MAIN = "int main(void) { return 0; }\n"


def _link_extras(db: CompilationDatabase, link_group: Optional[str]) -> list[str]:
    if not link_group or link_group not in db.link_commands:
        return []
    extras = []
    argv = db.link_commands[link_group]
    skip = False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "-o":
            skip = True
            continue
        if a.startswith("-l") or a.startswith("-L") or a.startswith("-Wl,") or a in ("-pthread", "-static", "-rdynamic"):
            extras.append(a)
    return extras


def attempt_compile(
    files: list[tuple[MinimizedFile, "CompileRecordLike"]],
    db: CompilationDatabase,
    work_dir: Path,
    extra_flags: Optional[list[str]] = None,
    link_extras: Optional[list[str]] = None,
) -> CompileResult:
    """Compile each emitted file with its origin's recorded args, then probe
    the link. Returns the object list on success, the diagnostic log on
    failure."""
    if not files:
        raise ValueError("empty file list")
    obj_dir = Path(work_dir) / "objects"
    obj_dir.mkdir(parents=True, exist_ok=True)
    flags = SLICE_COMPILE_FLAGS if extra_flags is None else extra_flags

    objects: list[Path] = []
    logs: list[str] = []
    for mf, rec in files:
        obj = obj_dir / (mf.emitted_path.stem + ".o")
        args = _swap_compile_args(rec, mf.emitted_path, obj) + list(flags)
        tool = _tool_for(db, rec)
        try:
            proc = subprocess.run([tool] + args, cwd=rec.directory, capture_output=True, text=True)
        except OSError as exc:
            raise ToolchainError(f"cannot invoke {tool}: {exc}") from exc
        if proc.returncode != 0:
            logs.append(proc.stderr)
        else:
            objects.append(obj)
    if logs:
        return CompileResult(ok=False, objects=[], log="\n".join(logs), phase="compile")

    # link probe: undefined references and duplicate definitions surface here
    stub = obj_dir / "_sf_stub_main.o"
    if not stub.exists():
        stub_src = obj_dir / "_sf_stub_main.c"
        stub_src.write_text(_STUB_MAIN)
        tool = db.toolchain.get("cc", "cc")
        subprocess.run([tool, "-c", str(stub_src), "-o", str(stub)], check=True, capture_output=True)

    tool = db.toolchain.get("cc", "cc")
    probe = obj_dir / "_sf_probe.bin"
    extras = link_extras if link_extras is not None else []
    cmd = [tool] + [str(o) for o in objects] + [str(stub)] + extras + ["-o", str(probe)]
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True)
    except OSError as exc:
        raise ToolchainError(f"cannot invoke {tool}: {exc}") from exc
    if proc.returncode != 0 and "multiple definition of 'main'" in proc.stderr.translate(_QUOTE_TRANS):
        cmd = [tool] + [str(o) for o in objects] + extras + ["-o", str(probe)]
        proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        return CompileResult(ok=False, objects=[], log=proc.stderr, phase="link")
    return CompileResult(ok=True, objects=objects, log="", phase="link")


# ---------------------------------------------------------------------------
# The slice loop
# ---------------------------------------------------------------------------


def _proto_text(site_item: FileItem) -> str:
    ret = site_item.ret_text.strip() or "int"
    params = site_item.params_text.strip() or "void"
    return f"extern {ret} {site_item.name}({params});"


def build_slice(
    w: Warning,
    idx: RepoIndex,
    db: CompilationDatabase,
    work_dir: Path,
    caps: SliceCaps = SliceCaps(),
) -> Slice:
    import time

    t0 = time.monotonic()
    root_fn = idx.enclosing_function(w.file, w.line)
    sl = Slice(warning=w, root_fn=root_fn)
    if root_fn is None:
        sl.status = "not_compiled"
        sl.reason = "no enclosing function"
        return sl

    work_dir = Path(work_dir)
    files_dir = work_dir / "files"

    roots_by_unit: dict[int, dict[str, str]] = {root_fn.unit_index: {root_fn.name: "root"}}
    round_added: dict[int, dict[str, int]] = {root_fn.unit_index: {root_fn.name: 1}}
    injected: dict[int, dict[str, str]] = {}
    resolved: set[str] = {root_fn.name}
    unresolved: list[str] = []

    link_extras = _link_extras(db, db.records[root_fn.unit_index].link_group)
    sl.link_extras = link_extras

    while True:
        sl.rounds += 1
        emitted: list[tuple[MinimizedFile, object]] = []
        total_retained_items = 0
        for unit_index in sorted(roots_by_unit):
            fi = idx.file_index(unit_index)
            inj = [( _proto_text_cached(idx, sym), f"error-resolution {prov}")
                   for sym, prov in sorted(injected.get(unit_index, {}).items())]
            mf = minimize_file(
                fi,
                roots_by_unit[unit_index],
                destatic=frozenset({root_fn.name}) if unit_index == root_fn.unit_index else frozenset(),
                injected=inj,
                round_of=round_added.get(unit_index, {}),
            )
            mf.write(files_dir, f"unit{unit_index:04d}_{Path(fi.unit.record.source).stem}")
            total_retained_items += len(mf.retained)
            emitted.append((mf, fi.unit.record))
        sl.files = [mf for mf, _ in emitted]

        if total_retained_items > caps.max_retained:
            sl.status = "not_compiled"
            sl.reason = "cap: retained definitions"
            break

        result = attempt_compile(emitted, db, work_dir, link_extras=link_extras)
        if result.ok:
            sl.status = "compiled"
            sl.objects = result.objects
            break

        refs = extract_missing_refs(result.log)
        dups = duplicate_symbols(result.log)
        new_roots = False
        for ref in refs:
            if ref in resolved or ref in unresolved:
                continue
            sites = idx.locate_symbol(ref, from_unit=root_fn.unit_index)
            if not sites:
                unresolved.append(ref)
                continue
            site = sites[0]
            roots_by_unit.setdefault(site.unit_index, {})[ref] = f"error:r{sl.rounds}"
            round_added.setdefault(site.unit_index, {})[ref] = sl.rounds + 1
            resolved.add(ref)
            new_roots = True
            if site.kind == ITEM_FUNCTION:
                for unit_index in list(roots_by_unit):
                    if unit_index == site.unit_index:
                        continue
                    fi = idx.file_index(unit_index)
                    declares = any(
                        it.kind in (ITEM_FUNCTION, ITEM_PROTO) and it.name == ref for it in fi.items
                    )
                    if not declares:
                        injected.setdefault(unit_index, {})[ref] = f"r{sl.rounds}"

        if not new_roots:
            sl.status = "not_compiled"
            if dups and not refs:
                sl.reason = "link: multiple definition of " + ", ".join(dups)
            elif unresolved:
                sl.reason = "unresolved: " + ", ".join(unresolved)
            elif result.phase == "link":
                sl.reason = "link: " + result.log.strip().splitlines()[-1][:200] if result.log.strip() else "link failure"
            else:
                sl.reason = "unrecognized compile failure"
            break

        if sl.rounds >= caps.max_rounds:
            sl.status = "not_compiled"
            sl.reason = "cap: rounds"
            break

    sl.unresolved = unresolved
    sl.compile_seconds = time.monotonic() - t0
    sl.retained_lines = sum(mf.retained_lines for mf in sl.files)
    sl.project_lines = sum(
        sum(1 for o in fi.unit.lines if o.project) for fi in idx.files if fi.unit.ok
    )
    save_slice_json(sl, work_dir / "slice.json")
    return sl


_proto_cache: dict[tuple[int, str], str] = {}


def _proto_text_cached(idx: RepoIndex, sym: str) -> str:
    sites = idx.locate_symbol(sym)
    for site in sites:
        if site.kind == ITEM_FUNCTION:
            return _proto_text(site.item)
    return f"extern int {sym}();"


def save_slice_json(sl: Slice, path: Path) -> None:
    data = {
        "warning": {"id": sl.warning.id, "file": sl.warning.file, "line": sl.warning.line},
        "root_fn": sl.root_fn.name if sl.root_fn else None,
        "status": sl.status,
        "reason": sl.reason,
        "rounds": sl.rounds,
        "unresolved": sl.unresolved,
        "link_extras": sl.link_extras,
        "compile_seconds": round(sl.compile_seconds, 3),
        "retained_lines": sl.retained_lines,
        "project_lines": sl.project_lines,
        "files": [
            {
                "unit": mf.unit_index,
                "source": mf.origin_source,
                "emitted": str(mf.emitted_path),
                "line_map": [list(e) if e else None for e in mf.emitted_line_map],
                "retained": [
                    {
                        "kind": s.item.kind,
                        "name": s.item.name or s.item.tag,
                        "span": list(s.item.span),
                        "provenance": s.provenance,
                        "round": s.round_added,
                    }
                    for s in mf.retained
                ],
                "injected": [{"text": t, "provenance": p} for t, p in mf.injected_decls],
            }
            for mf in sl.files
        ],
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(data, indent=1))


def load_slice(path: Path, w: Warning, idx: RepoIndex) -> Slice:
    """Rehydrate a slice from its stage artifact for the fuzz/classify stages.

    Retained-span metadata is left as recorded in the JSON; the fields the
    later stages need (emitted paths, line maps, link extras, root function)
    are restored fully.
    """
    data = json.loads(Path(path).read_text())
    sl = Slice(warning=w, root_fn=idx.enclosing_function(w.file, w.line))
    sl.status = data["status"]
    sl.reason = data.get("reason", "")
    sl.rounds = data.get("rounds", 0)
    sl.unresolved = data.get("unresolved", [])
    sl.link_extras = data.get("link_extras", [])
    sl.compile_seconds = data.get("compile_seconds", 0.0)
    sl.retained_lines = data.get("retained_lines", 0)
    sl.project_lines = data.get("project_lines", 0)
    for f in data.get("files", []):
        mf = MinimizedFile(
            unit_index=f["unit"],
            origin_source=f["source"],
            emitted_path=Path(f["emitted"]),
            retained=[],
            injected_decls=[(d["text"], d["provenance"]) for d in f.get("injected", [])],
            emitted_line_map=[tuple(e) if e else None for e in f.get("line_map", [])],
        )
        sl.files.append(mf)
    return sl
