"""Load, filter and deduplicate static-analysis warnings.

Reports are consumed in a normalized form (JSON-lines or CSV with the columns
tool/file/line/category/severity) rather than in any analyzer's native format;
thin adapters upstream are expected to produce these files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

KNOWN_TOOLS = ("ratslike", "inferlike", "generic")

REQUIRED_FIELDS = ("tool", "file", "line", "category", "severity")


class ReportError(Exception):
    """Unreadable report file or unknown format tag."""


@dataclass(frozen=True)
class Warning:
    """One static-analysis finding at a repo-relative file:line."""

    id: str
    tool: str
    file: str
    line: int
    category: str
    severity: str

    @staticmethod
    def make(tool: str, file: str, line: int, category: str, severity: str) -> "Warning":
        return Warning(
            id=warning_id(tool, file, line, category),
            tool=tool,
            file=file,
            line=line,
            category=category,
            severity=severity,
        )


def warning_id(tool: str, file: str, line: int, category: str) -> str:
    """Stable id; a pure function of (tool, file, line, category)."""
    key = f"{tool}|{file}|{line}|{category}".encode("utf-8")
    return hashlib.sha1(key).hexdigest()[:12]


@dataclass
class IngestDiagnostic:
    record_no: int
    reason: str
    raw: str


@dataclass
class SeverityPolicy:
    """Per-tool allowed severity sets.

    Tools absent from the mapping keep everything (used for "generic").
    """

    allowed: dict[str, frozenset[str]] = field(
        default_factory=lambda: {
            "ratslike": frozenset({"High", "Medium"}),
            "inferlike": frozenset({"L1", "L2"}),
        }
    )

    def permits(self, tool: str, severity: str) -> bool:
        severities = self.allowed.get(tool)
        return severities is None or severity in severities

    @staticmethod
    def allow_all() -> "SeverityPolicy":
        return SeverityPolicy(allowed={})

    @staticmethod
    def from_json(path: Path) -> "SeverityPolicy":
        data = json.loads(Path(path).read_text())
        return SeverityPolicy(allowed={tool: frozenset(sevs) for tool, sevs in data.items()})


def _validate_record(rec: dict, record_no: int) -> tuple[Optional[Warning], Optional[IngestDiagnostic]]:
    raw = json.dumps(rec, sort_keys=True)
    for name in REQUIRED_FIELDS:
        if name not in rec or rec[name] in (None, ""):
            return None, IngestDiagnostic(record_no, f"missing field {name!r}", raw)
    try:
        line = int(rec["line"])
    except (TypeError, ValueError):
        return None, IngestDiagnostic(record_no, "line is not an integer", raw)
    if line < 1:
        return None, IngestDiagnostic(record_no, "line < 1", raw)
    tool = str(rec["tool"])
    if tool not in KNOWN_TOOLS:
        return None, IngestDiagnostic(record_no, f"unknown tool {tool!r}", raw)
    return (
        Warning.make(tool, str(rec["file"]), line, str(rec["category"]), str(rec["severity"])),
        None,
    )


def load_warnings(
    report_path: Path, format: str = "jsonl", repo_root: Optional[Path] = None
) -> tuple[list[Warning], list[IngestDiagnostic]]:
    """Parse a normalized report file.

    Every input record becomes exactly one Warning or one diagnostic; nothing
    is silently dropped. When repo_root is given, records whose file does not
    exist under it are diagnosed and excluded.
    """
    path = Path(report_path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot read report {path}: {exc}") from exc

    records: list[dict] = []
    diags: list[IngestDiagnostic] = []
    if format == "jsonl":
        for no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                diags.append(IngestDiagnostic(no, f"bad json: {exc.msg}", line))
                records.append(None)  # keep record numbering aligned
    elif format == "csv":
        for no, row in enumerate(csv.DictReader(text.splitlines()), start=1):
            records.append({k: v for k, v in row.items() if k is not None})
    else:
        raise ReportError(f"unknown report format {format!r}")

    warnings: list[Warning] = []
    for no, rec in enumerate(records, start=1):
        if rec is None:
            continue
        if format == "csv" and "line" in rec and rec["line"] is not None:
            rec = dict(rec)
            try:
                rec["line"] = int(rec["line"])
            except ValueError:
                pass
        w, diag = _validate_record(rec, no)
        if diag is not None:
            diags.append(diag)
            continue
        assert w is not None
        if repo_root is not None and not (Path(repo_root) / w.file).is_file():
            diags.append(IngestDiagnostic(no, f"file not under repository root: {w.file}", w.file))
            continue
        warnings.append(w)
    return warnings, diags


def filter_by_severity(ws: Iterable[Warning], policy: SeverityPolicy) -> list[Warning]:
    """Keep warnings whose severity is allowed for their tool; order preserved."""
    return [w for w in ws if policy.permits(w.tool, w.severity)]


def dedupe_warnings(ws: Iterable[Warning]) -> tuple[list[Warning], dict[str, str]]:
    """Collapse to one warning per (file, line, category), keeping the first.

    Returns the retained list and a dropped-id -> retained-id mapping. The
    dedup key deliberately excludes the tool: two analyzers flagging the same
    location produce one slice-and-fuzz work item.
    """
    seen: dict[tuple[str, int, str], Warning] = {}
    dropped: dict[str, str] = {}
    out: list[Warning] = []
    for w in ws:
        key = (w.file, w.line, w.category)
        kept = seen.get(key)
        if kept is None:
            seen[key] = w
            out.append(w)
        else:
            dropped[w.id] = kept.id
    return out, dropped


def write_warnings_jsonl(ws: Iterable[Warning], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for w in ws:
            fh.write(
                json.dumps(
                    {
                        "tool": w.tool,
                        "file": w.file,
                        "line": w.line,
                        "category": w.category,
                        "severity": w.severity,
                    }
                )
                + "\n"
            )
