#!/usr/bin/env python3
"""Regenerate manifest.json and warnings.jsonl from the /* WARN */ markers.

Run from the corpus directory after adding or editing fixtures:
    python3 tools/gen_manifest.py
"""

import json
import re
from pathlib import Path

CORPUS = Path(__file__).resolve().parent.parent

WARN_RE = re.compile(r"/\* WARN \*/")

# Alternate the synthetic analyzers so both severity policies get exercised.
TOOL_CYCLE = [("ratslike", "High"), ("inferlike", "L1"), ("ratslike", "Medium"), ("inferlike", "L2")]


def warn_line(path: Path) -> int:
    hits = [no for no, text in enumerate(path.read_text().splitlines(), 1) if WARN_RE.search(text)]
    if len(hits) != 1:
        raise SystemExit(f"{path}: expected exactly one WARN marker, found {len(hits)}")
    return hits[0]


def main() -> None:
    manifest = []
    warnings = []

    pair_files = sorted((CORPUS / "src" / "pairs").glob("*.c"))
    for i, path in enumerate(pair_files):
        rel = path.relative_to(CORPUS).as_posix()
        truth = "TP" if path.stem.endswith("_bad") else "FP"
        tool, sev = TOOL_CYCLE[i % len(TOOL_CYCLE)]
        line = warn_line(path)
        manifest.append({"file": rel, "line": line, "category": "buffer_overflow", "ground_truth": truth})
        warnings.append({"tool": tool, "file": rel, "line": line, "category": "buffer_overflow", "severity": sev})

    glue = CORPUS / "src" / "gluepair" / "driver.c"
    line = warn_line(glue)
    rel = glue.relative_to(CORPUS).as_posix()
    manifest.append({"file": rel, "line": line, "category": "buffer_overflow", "ground_truth": "FP"})
    warnings.append({"tool": "ratslike", "file": rel, "line": line, "category": "buffer_overflow", "severity": "High"})

    specials = json.loads((CORPUS / "specials.json").read_text())
    for entry in specials:
        warnings.append(
            {
                "tool": entry["tool"],
                "file": entry["file"],
                "line": entry["line"],
                "category": entry["category"],
                "severity": entry["severity"],
            }
        )

    (CORPUS / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    with open(CORPUS / "warnings.jsonl", "w") as fh:
        for rec in warnings:
            fh.write(json.dumps(rec) + "\n")
    print(f"{len(manifest)} manifest entries, {len(warnings)} warnings")


if __name__ == "__main__":
    main()
