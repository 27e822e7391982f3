"""Per-line execution counts from block-level coverage dumps.

The replay binary's guard dump gives (block pc, flags, hit count). DWARF line
tables (objdump --dwarf=decodedline) give (file, line, address) rows. A
block's extent runs from its pc to the next block's pc, so every line-table
row falling inside a covered block executed at least that block's count; a
line covered by several blocks keeps the maximum.
"""

from __future__ import annotations

import bisect
import subprocess
from collections import defaultdict
from pathlib import Path

OBJDUMP = "objdump"
ADDR2LINE = "addr2line"


def parse_cov_dump(path: Path) -> list[tuple[int, int, int]]:
    """[(pc, flags, count)] rows from a runtime dump; missing file -> []."""
    rows = []
    p = Path(path)
    if not p.exists():
        return rows
    for line in p.read_text().splitlines():
        parts = line.split()
        if len(parts) != 3:
            continue
        rows.append((int(parts[0], 16), int(parts[1]), int(parts[2])))
    return rows


def merge_dumps(dumps: list[list[tuple[int, int, int]]]) -> dict[int, tuple[int, int]]:
    """pc -> (flags, summed count) across per-process dumps."""
    merged: dict[int, tuple[int, int]] = {}
    for rows in dumps:
        for pc, flags, count in rows:
            old = merged.get(pc)
            merged[pc] = (flags, count + (old[1] if old else 0))
    return merged


def decoded_lines(binary: Path) -> list[tuple[str, int, int]]:
    """[(file, line, address)] from the binary's DWARF line table."""
    proc = subprocess.run(
        [OBJDUMP, "--dwarf=decodedline", str(binary)], capture_output=True, text=True
    )
    rows: list[tuple[str, int, int]] = []
    current_file = ""
    for raw in proc.stdout.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("CU:") and line.endswith(":"):
            current_file = line[3:-1].strip()
            continue
        if line.endswith(":") and "0x" not in line:
            current_file = line[:-1].strip()
            continue
        parts = line.split()
        if len(parts) >= 3 and parts[1].lstrip("-").isdigit() and parts[2].startswith("0x"):
            fname = parts[0] if not parts[0].startswith("0x") else current_file
            if parts[1] == "-":
                continue
            try:
                lineno = int(parts[1])
                addr = int(parts[2], 16)
            except ValueError:
                continue
            if lineno > 0:
                rows.append((fname or current_file, lineno, addr))
        elif len(parts) == 2 and parts[0].lstrip("-").isdigit() and parts[1].startswith("0x"):
            try:
                lineno = int(parts[0])
                addr = int(parts[1], 16)
            except ValueError:
                continue
            if lineno > 0 and current_file:
                rows.append((current_file, lineno, addr))
    return rows


def line_counts(
    merged: dict[int, tuple[int, int]], dwarf_rows: list[tuple[str, int, int]]
) -> dict[tuple[str, int], int]:
    """(file, line) -> execution count in the replay binary's coordinates."""
    if not merged:
        return {}
    pcs = sorted(merged)
    counts: dict[tuple[str, int], int] = defaultdict(int)
    for fname, lineno, addr in dwarf_rows:
        i = bisect.bisect_right(pcs, addr) - 1
        if i < 0:
            continue
        block_pc = pcs[i]
        count = merged[block_pc][1]
        key = (fname, lineno)
        if count > counts[key]:
            counts[key] = count
    return dict(counts)


def symbolize(binary: Path, offsets: list[int]) -> list[tuple[str, int]]:
    """Module offsets -> (file, line) via addr2line; unresolvable -> ("", 0).

    Offsets are return/report addresses; querying addr-1 lands inside the
    faulting instruction's line record.
    """
    if not offsets:
        return []
    args = [ADDR2LINE, "-e", str(binary)] + [hex(max(0, off - 1)) for off in offsets]
    proc = subprocess.run(args, capture_output=True, text=True)
    out: list[tuple[str, int]] = []
    for line in proc.stdout.splitlines():
        if ":" not in line:
            out.append(("", 0))
            continue
        fname, _, lineno = line.rpartition(":")
        lineno = lineno.split()[0] if lineno else "0"
        try:
            no = int(lineno)
        except ValueError:
            no = 0
        out.append((fname, no) if fname and not fname.startswith("?") else ("", 0))
    return out
