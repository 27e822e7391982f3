"""Four-state verdicts, report aggregation, and cross-version persistence.

A warning classifies from its stored pipeline outcome alone, so re-running
classification over persisted artifacts is idempotent:

    NC  - slice failed to compile, or the binary could not be linked/started
    C   - a sanitizer crash was attributed to the warning line
    PFP - the warning line executed, no attributed crash within the budget
    NR  - fuzzed, but the warning line never executed

A PFP is explicitly "possible": the verdict is relative to the fuzzing
budget. Crashes elsewhere in the slice never upgrade a warning to C; they are
kept as auxiliary findings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .ctok import tokenize
from .index import ITEM_FUNCTION, parse_items
from .orchestrator import FuzzVerdict, WarningOutcome
from .slicer import Slice
from .warnings_io import Warning

STATES = ("C", "PFP", "NR", "NC")

PFP_CAVEAT = "possible false positive: no crash within the fuzzing budget; verdict is budget-relative"
GLOBALS_CAVEAT = "globals caveat: referenced globals keep default initialization and are not fuzzed"


@dataclass
class Classification:
    state: str
    reason: str
    evidence: dict = field(default_factory=dict)
    caveats: list[str] = field(default_factory=list)


def classify(w: Warning, sl: Optional[Slice], v: Optional[FuzzVerdict],
             failure: str = "", unfuzzable_reason: str = "",
             globals_referenced: Optional[list[str]] = None) -> Classification:
    """Exactly one state per warning, derived purely from stored outcomes."""
    if sl is None or not sl.compiled:
        reason = sl.reason if sl is not None else "no slice"
        return Classification("NC", reason or "slice not compiled",
                              evidence={"slice_status": sl.status if sl else "missing"})
    if failure == "link":
        return Classification("NC", "link", evidence={"stage": "link"})
    if failure == "runtime":
        return Classification("NC", "runtime", evidence={"stage": "runtime"})
    if failure == "unfuzzable":
        return Classification("NC", f"unfuzzable: {unfuzzable_reason}",
                              evidence={"stage": "harness"})
    if v is None:
        return Classification("NC", "no verdict recorded", evidence={"stage": "fuzz"})

    evidence = {
        "hits": v.target_line_hits,
        "crashes": len(v.crashes),
        "crash_at_target": v.crash_at_target,
        "wall_time": v.wall_time,
        "executions": v.executions,
    }
    if v.crash_at_target:
        kinds = sorted({c.kind for c in v.crashes})
        return Classification("C", f"crash at warning line ({', '.join(kinds)})", evidence=evidence)
    caveats = []
    if v.executed_target_line:
        caveats.append(PFP_CAVEAT)
        if globals_referenced:
            caveats.append(GLOBALS_CAVEAT + f" ({', '.join(globals_referenced)})")
        off_target = [c for c in v.crashes if c.frames]
        if off_target:
            evidence["off_target_crashes"] = len(off_target)
        return Classification("PFP", "line executed, no attributed crash", evidence=evidence, caveats=caveats)
    return Classification("NR", "warning line not executed within budget", evidence=evidence)


def classify_outcome(out: WarningOutcome) -> Classification:
    return classify(
        out.warning,
        out.slice,
        out.verdict,
        failure=out.failure,
        unfuzzable_reason=out.unfuzzable_reason,
        globals_referenced=out.spec.globals_referenced if out.spec else None,
    )


# ---------------------------------------------------------------------------
# Report tables
# ---------------------------------------------------------------------------


@dataclass
class ReportRow:
    warning: Warning
    classification: Classification
    hits: int = 0
    wall_time: float = 0.0
    rounds: int = 0
    retained_loc: int = 0
    compile_seconds: float = 0.0


@dataclass
class ReportTable:
    repository: str
    rows: list[ReportRow]
    counts: dict = field(default_factory=dict)   # (tool) -> {state: n, Total: n}

    def state_of(self, warning_id: str) -> Optional[str]:
        for row in self.rows:
            if row.warning.id == warning_id:
                return row.classification.state
        return None


def make_row(out: WarningOutcome, cls: Classification) -> ReportRow:
    return ReportRow(
        warning=out.warning,
        classification=cls,
        hits=out.verdict.target_line_hits if out.verdict else 0,
        wall_time=out.verdict.wall_time if out.verdict else 0.0,
        rounds=out.slice.rounds if out.slice else 0,
        retained_loc=out.slice.retained_lines if out.slice else 0,
        compile_seconds=out.slice.compile_seconds if out.slice else 0.0,
    )


def summarize(rows: list[ReportRow], repository: str = "") -> ReportTable:
    table = ReportTable(repository=repository, rows=list(rows))
    for row in rows:
        tool = row.warning.tool
        bucket = table.counts.setdefault(tool, {s: 0 for s in STATES} | {"Total": 0})
        bucket[row.classification.state] += 1
        bucket["Total"] += 1
    return table


def render_text(table: ReportTable) -> str:
    lines = []
    header = f"{'repository':<16} {'tool':<10} {'Total':>6} {'PFP':>5} {'C':>5} {'NR':>5} {'NC':>5}"
    lines.append(header)
    lines.append("-" * len(header))
    for tool, counts in sorted(table.counts.items()):
        lines.append(
            f"{table.repository:<16} {tool:<10} {counts['Total']:>6} {counts['PFP']:>5} "
            f"{counts['C']:>5} {counts['NR']:>5} {counts['NC']:>5}"
        )
    lines.append("")
    lines.append(f"{'warning':<46} {'state':<5} {'hits':>10} {'wall_s':>7} {'rounds':>6} {'loc':>6} {'slice_s':>8}")
    for row in table.rows:
        w = row.warning
        loc = f"{w.file}:{w.line}"
        lines.append(
            f"{loc:<46} {row.classification.state:<5} {row.hits:>10} {row.wall_time:>7.1f} "
            f"{row.rounds:>6} {row.retained_loc:>6} {row.compile_seconds:>8.2f}"
        )
        for caveat in row.classification.caveats:
            lines.append(f"    ! {caveat}")
        if row.classification.state in ("NC",):
            lines.append(f"    reason: {row.classification.reason}")
    return "\n".join(lines) + "\n"


def render_json(table: ReportTable) -> dict:
    return {
        "repository": table.repository,
        "counts": {tool: dict(c) for tool, c in table.counts.items()},
        "rows": [
            {
                "id": r.warning.id,
                "tool": r.warning.tool,
                "file": r.warning.file,
                "line": r.warning.line,
                "category": r.warning.category,
                "severity": r.warning.severity,
                "state": r.classification.state,
                "reason": r.classification.reason,
                "caveats": r.classification.caveats,
                "hits": r.hits,
                "wall_time": round(r.wall_time, 2),
                "rounds": r.rounds,
                "retained_loc": r.retained_loc,
                "compile_seconds": round(r.compile_seconds, 3),
                "evidence": r.classification.evidence,
            }
            for r in table.rows
        ],
    }


def save_report(table: ReportTable, out_dir: Path) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jpath = out_dir / "report.json"
    tpath = out_dir / "report.txt"
    jpath.write_text(json.dumps(render_json(table), indent=1))
    tpath.write_text(render_text(table))
    return jpath, tpath


# ---------------------------------------------------------------------------
# Persistence matching across two repository versions
# ---------------------------------------------------------------------------


@dataclass
class DiffContext:
    old_root: Path
    new_root: Path


@dataclass
class PersistenceResult:
    old_warning: Warning
    matched: Optional[Warning]
    reason: str = ""            # line_deleted / line_modified / function_removed when unmatched


def _normalize(text: str) -> str:
    return "".join(text.split())


def _function_extents(path: Path) -> list[tuple[str, int, int]]:
    """Best-effort (name, start, end) spans from raw source."""
    try:
        toks = tokenize(path.read_text())
    except OSError:
        return []
    items = parse_items(toks, 0)
    return [(it.name, it.span[0], it.span[1]) for it in items if it.kind == ITEM_FUNCTION]


def _enclosing_name(extents: list[tuple[str, int, int]], line: int) -> str:
    for name, start, end in extents:
        if start <= line <= end:
            return name
    return ""


def match_persistent(
    old_rows: list[ReportRow],
    new_warnings: list[Warning],
    ctx: DiffContext,
    require_new_pfp: bool = False,
    new_states: Optional[dict[str, str]] = None,
) -> list[PersistenceResult]:
    """Match old-version PFPs to new-version warnings by content anchoring.

    An old PFP matches when a new warning with the same tool+category sits on
    a line whose normalized text and enclosing function name both equal the
    old ones. Raw line numbers are never compared; they drift.
    """
    results: list[PersistenceResult] = []
    extent_cache: dict[tuple[str, str], list] = {}
    text_cache: dict[tuple[str, str], list[str]] = {}

    def lines_of(root: Path, rel: str, side: str) -> list[str]:
        key = (side, rel)
        if key not in text_cache:
            try:
                text_cache[key] = (Path(root) / rel).read_text().splitlines()
            except OSError:
                text_cache[key] = []
        return text_cache[key]

    def extents_of(root: Path, rel: str, side: str) -> list:
        key = (side, rel)
        if key not in extent_cache:
            extent_cache[key] = _function_extents(Path(root) / rel)
        return extent_cache[key]

    for row in old_rows:
        if row.classification.state != "PFP":
            continue
        w = row.warning
        old_lines = lines_of(ctx.old_root, w.file, "old")
        if not old_lines or w.line > len(old_lines):
            results.append(PersistenceResult(w, None, "line_deleted"))
            continue
        anchor = _normalize(old_lines[w.line - 1])
        old_fn = _enclosing_name(extents_of(ctx.old_root, w.file, "old"), w.line)

        new_lines = lines_of(ctx.new_root, w.file, "new")
        new_extents = extents_of(ctx.new_root, w.file, "new")

        matched = None
        for nw in new_warnings:
            if nw.tool != w.tool or nw.category != w.category or nw.file != w.file:
                continue
            if nw.line > len(new_lines):
                continue
            if _normalize(new_lines[nw.line - 1]) != anchor:
                continue
            if _enclosing_name(new_extents, nw.line) != old_fn:
                continue
            if require_new_pfp and new_states is not None and new_states.get(nw.id) != "PFP":
                continue
            matched = nw
            break
        if matched is not None:
            results.append(PersistenceResult(w, matched))
            continue

        # unmatched: derive the reason from the new version's text
        new_fn_names = {name for name, _, _ in new_extents}
        if old_fn and old_fn not in new_fn_names:
            results.append(PersistenceResult(w, None, "function_removed"))
            continue
        norm_new = [_normalize(l) for l in new_lines]
        if anchor not in norm_new:
            prev_a = _normalize(old_lines[w.line - 2]) if w.line >= 2 else None
            next_a = _normalize(old_lines[w.line]) if w.line < len(old_lines) else None
            reason = "line_modified"
            if prev_a is not None and next_a is not None:
                for j, text in enumerate(norm_new):
                    if text == prev_a and j + 1 < len(norm_new):
                        reason = "line_deleted" if norm_new[j + 1] == next_a else "line_modified"
                        break
            results.append(PersistenceResult(w, None, reason))
        else:
            results.append(PersistenceResult(w, None, "line_modified"))
    return results
