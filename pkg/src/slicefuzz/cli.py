"""Command-line surface: per-stage commands plus a one-shot end-to-end run.

Stage artifacts under the workspace are the only inter-stage contract, so
expensive stages can be resumed or re-run individually:

    capture   build_db.json, pp/            (build capture + preprocessing)
    index     index.json                    (symbol dump, debugging aid)
    slice     warnings.norm.jsonl, w/<id>/slice.json
    fuzz      w/<id>/{harness.c,bin/,corpus/,crashes/,verdict.json,outcome.json}
    classify  report.json, report.txt

Exit codes: 0 = completed, 2 = completed with NC warnings present.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .buildcap import CompilationDatabase, capture_build, load_units, preprocess_sources
from .classify import (
    DiffContext,
    ReportRow,
    classify,
    classify_outcome,
    make_row,
    match_persistent,
    render_json,
    save_report,
    summarize,
)
from .index import RepoIndex
from .orchestrator import WarningOutcome, fuzz_sliced, orchestrate
from .slicer import SliceCaps, build_slice, load_slice
from .warnings_io import (
    SeverityPolicy,
    Warning,
    dedupe_warnings,
    filter_by_severity,
    load_warnings,
    write_warnings_jsonl,
)


@dataclass
class RunConfig:
    repo_root: Path
    build_cmd: str
    warnings_path: Path
    budget_seconds: float = 300.0
    seed: int = 0
    workers: int = 4
    severity_policy: SeverityPolicy = field(default_factory=SeverityPolicy)
    caps: SliceCaps = field(default_factory=SliceCaps)
    out_dir: Path = Path("slicefuzz-work")

    def __post_init__(self) -> None:
        if self.budget_seconds < 0:
            raise ValueError("budget must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


class StageError(Exception):
    pass


def _workdir(args) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    env = os.environ.get("SLICEFUZZ_WORKDIR")
    if env:
        return Path(env)
    return Path("slicefuzz-work")


def _need(path: Path, stage: str) -> Path:
    if not path.exists():
        raise StageError(f"missing {path.name}: run `slicefuzz {stage}` first")
    return path


def _load_db(work: Path) -> CompilationDatabase:
    return CompilationDatabase.load(_need(work / "build_db.json", "capture"))


def _load_index(work: Path) -> tuple[CompilationDatabase, RepoIndex]:
    db = _load_db(work)
    units = load_units(db, work)
    return db, RepoIndex.build(units)


def _policy(args) -> SeverityPolicy:
    if getattr(args, "severity_policy", None):
        if args.severity_policy == "all":
            return SeverityPolicy.allow_all()
        return SeverityPolicy.from_json(Path(args.severity_policy))
    return SeverityPolicy()


def _ingest(args, work: Path, repo_root: Optional[Path]) -> list[Warning]:
    fmt = "csv" if str(args.warnings).endswith(".csv") else "jsonl"
    warnings, diags = load_warnings(Path(args.warnings), fmt, repo_root=repo_root)
    warnings = filter_by_severity(warnings, _policy(args))
    warnings, dropped = dedupe_warnings(warnings)
    write_warnings_jsonl(warnings, work / "warnings.norm.jsonl")
    (work / "ingest_diagnostics.json").write_text(
        json.dumps(
            {
                "diagnostics": [{"record": d.record_no, "reason": d.reason} for d in diags],
                "deduped": dropped,
            },
            indent=1,
        )
    )
    if diags:
        print(f"[ingest] {len(diags)} record(s) diagnosed, see ingest_diagnostics.json", file=sys.stderr)
    return warnings


def _read_norm_warnings(work: Path) -> list[Warning]:
    path = _need(work / "warnings.norm.jsonl", "slice")
    warnings, _ = load_warnings(path, "jsonl")
    return warnings


def cmd_capture(args) -> int:
    work = _workdir(args)
    work.mkdir(parents=True, exist_ok=True)
    db = capture_build(Path(args.repo), args.build_cmd, work)
    units = preprocess_sources(db, Path(args.repo), work)
    failed = [u for u in units if not u.ok]
    print(f"captured {len(db.records)} translation units, {len(db.link_commands)} link groups")
    if failed:
        print(f"{len(failed)} unit(s) failed to preprocess; their warnings will classify NC")
    return 0


def cmd_index(args) -> int:
    work = _workdir(args)
    _, idx = _load_index(work)
    idx.dump_json(work / "index.json")
    n_fn = sum(1 for fi in idx.files for it in fi.items if it.kind == "function")
    print(f"indexed {len(idx.files)} units, {n_fn} function definitions, {len(idx.by_symbol)} symbols")
    return 0


def cmd_slice(args) -> int:
    work = _workdir(args)
    db, idx = _load_index(work)
    repo_root = Path(args.repo) if getattr(args, "repo", None) else None
    warnings = _ingest(args, work, repo_root)
    caps = SliceCaps()
    compiled = 0
    for w in warnings:
        sl = build_slice(w, idx, db, work / "w" / w.id, caps)
        compiled += 1 if sl.compiled else 0
        print(f"{w.file}:{w.line} [{w.id}] -> {sl.status}"
              + (f" ({sl.reason})" if sl.reason else "")
              + f" rounds={sl.rounds}")
    print(f"{compiled}/{len(warnings)} slices compiled")
    return 0


def cmd_fuzz(args) -> int:
    work = _workdir(args)
    db, idx = _load_index(work)
    warnings = _read_norm_warnings(work)
    runtime_dir = Path(args.runtime) if getattr(args, "runtime", None) else None

    def one(w: Warning) -> WarningOutcome:
        warn_dir = work / "w" / w.id
        slice_json = warn_dir / "slice.json"
        if not slice_json.exists():
            raise StageError(f"missing slice for {w.id}: run `slicefuzz slice` first")
        sl = load_slice(slice_json, w, idx)
        out = fuzz_sliced(w, sl, idx, db, warn_dir, args.budget, args.seed, runtime_dir)
        _write_outcome(warn_dir, out)
        return out

    if args.workers > 1 and len(warnings) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            outs = list(pool.map(one, warnings))
    else:
        outs = [one(w) for w in warnings]
    fuzzed = sum(1 for o in outs if o.verdict is not None)
    print(f"fuzzed {fuzzed}/{len(outs)} warnings (budget {args.budget}s, seed {args.seed})")
    return 0


def _write_outcome(warn_dir: Path, out: WarningOutcome) -> None:
    (warn_dir / "outcome.json").write_text(
        json.dumps(
            {
                "failure": out.failure,
                "unfuzzable_reason": out.unfuzzable_reason,
                "globals_referenced": out.spec.globals_referenced if out.spec else [],
            }
        )
    )


def _classify_from_artifacts(work: Path, idx: RepoIndex, warnings: list[Warning]) -> list[ReportRow]:
    from .orchestrator import CrashReport, FuzzVerdict

    rows = []
    for w in warnings:
        warn_dir = work / "w" / w.id
        slice_json = warn_dir / "slice.json"
        if not slice_json.exists():
            raise StageError(f"missing slice for {w.id}: run `slicefuzz slice` first")
        sl = load_slice(slice_json, w, idx)
        verdict = None
        vpath = warn_dir / "verdict.json"
        if vpath.exists():
            data = json.loads(vpath.read_text())
            verdict = FuzzVerdict(
                warning_id=w.id,
                executed_target_line=data["executed"],
                target_line_hits=data["hits"],
                crash_at_target=data["crash_at_target"],
                wall_time=data["wall_time"],
                executions=data.get("executions", 0),
                engine_abnormal=data.get("engine_abnormal", ""),
                harness_suspect=data.get("harness_suspect", False),
                covered_lines={(f, l): c for f, l, c in data.get("covered_lines", [])},
            )
            verdict.crashes = [
                CrashReport(
                    kind=c["kind"],
                    frames=[tuple(f) for f in c["frames"]],
                    raw_frames=[],
                    witness_input=bytes.fromhex(c.get("witness", "")),
                    artifact=c.get("artifact", ""),
                )
                for c in data.get("crashes", [])
            ]
        failure = ""
        unfuzzable_reason = ""
        globals_referenced: list[str] = []
        opath = warn_dir / "outcome.json"
        if opath.exists():
            od = json.loads(opath.read_text())
            failure = od.get("failure", "")
            unfuzzable_reason = od.get("unfuzzable_reason", "")
            globals_referenced = od.get("globals_referenced", [])
        cls = classify(w, sl, verdict, failure=failure,
                       unfuzzable_reason=unfuzzable_reason,
                       globals_referenced=globals_referenced)
        rows.append(
            ReportRow(
                warning=w,
                classification=cls,
                hits=verdict.target_line_hits if verdict else 0,
                wall_time=verdict.wall_time if verdict else 0.0,
                rounds=sl.rounds,
                retained_loc=sl.retained_lines,
                compile_seconds=sl.compile_seconds,
            )
        )
    return rows


def cmd_classify(args) -> int:
    work = _workdir(args)
    _, idx = _load_index(work)
    warnings = _read_norm_warnings(work)
    rows = _classify_from_artifacts(work, idx, warnings)
    table = summarize(rows, repository=getattr(args, "repository", "") or "repo")
    save_report(table, work)
    if args.format == "json":
        print(json.dumps(render_json(table), indent=1))
    else:
        from .classify import render_text

        print(render_text(table))
    return 2 if any(r.classification.state == "NC" for r in rows) else 0


def cmd_run(args) -> int:
    work = _workdir(args)
    work.mkdir(parents=True, exist_ok=True)
    cfg = RunConfig(
        repo_root=Path(args.repo),
        build_cmd=args.build_cmd,
        warnings_path=Path(args.warnings),
        budget_seconds=args.budget,
        seed=args.seed,
        workers=args.workers,
        out_dir=work,
    )
    db = capture_build(cfg.repo_root, cfg.build_cmd, work)
    units = preprocess_sources(db, cfg.repo_root, work)
    idx = RepoIndex.build(units)
    idx.dump_json(work / "index.json")
    warnings = _ingest(args, work, cfg.repo_root)
    runtime_dir = Path(args.runtime) if getattr(args, "runtime", None) else None
    outs = orchestrate(
        warnings, idx, db, work / "w", cfg.budget_seconds, cfg.seed,
        workers=cfg.workers, caps=cfg.caps, runtime_dir=runtime_dir,
    )
    rows = []
    for out in outs:
        _write_outcome(work / "w" / out.warning.id, out)
        cls = classify_outcome(out)
        rows.append(make_row(out, cls))
    table = summarize(rows, repository=str(cfg.repo_root.name))
    save_report(table, work)
    if args.format == "json":
        print(json.dumps(render_json(table), indent=1))
    else:
        from .classify import render_text

        print(render_text(table))
    return 2 if any(r.classification.state == "NC" for r in rows) else 0


def cmd_persist(args) -> int:
    old_report = json.loads(Path(args.old_report).read_text())
    old_rows = []
    for r in old_report["rows"]:
        w = Warning.make(r["tool"], r["file"], r["line"], r["category"], r["severity"])
        from .classify import Classification

        old_rows.append(ReportRow(warning=w, classification=Classification(r["state"], r.get("reason", ""))))
    fmt = "csv" if str(args.new_warnings).endswith(".csv") else "jsonl"
    new_warnings, _ = load_warnings(Path(args.new_warnings), fmt)
    results = match_persistent(
        old_rows, new_warnings, DiffContext(Path(args.old_root), Path(args.new_root))
    )
    matched = sum(1 for r in results if r.matched is not None)
    print(f"persistent PFPs: {matched}/{len(results)}")
    for r in results:
        if r.matched is None:
            print(f"  unmatched {r.old_warning.file}:{r.old_warning.line} -> {r.reason}")
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    ap = argparse.ArgumentParser(
        prog="slicefuzz",
        description="Prune probable false positives from static-analysis buffer-overflow warnings "
                    "by fuzzing minimal compilable slices.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, repo=False, warnings=False, fuzz=False):
        p.add_argument("--out", help="workspace directory (or env SLICEFUZZ_WORKDIR)")
        if repo:
            p.add_argument("--repo", required=True, help="repository root")
            p.add_argument("--build-cmd", required=True, help="native build command")
        if warnings:
            p.add_argument("--warnings", required=True, help="normalized report (.jsonl or .csv)")
            p.add_argument("--severity-policy", help="'all' or a JSON file tool->severities")
        if fuzz:
            p.add_argument("--budget", type=float, default=300.0, help="fuzz seconds per warning")
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--workers", type=int, default=4)
            p.add_argument("--runtime", help="byte-cursor runtime directory")

    p = sub.add_parser("capture", help="build under the capture shim and preprocess")
    common(p, repo=True)
    p.set_defaults(fn=cmd_capture)

    p = sub.add_parser("index", help="build and dump the structural index")
    common(p)
    p.set_defaults(fn=cmd_index)

    p = sub.add_parser("slice", help="construct minimal compilable slices per warning")
    common(p, warnings=True)
    p.add_argument("--repo", help="repository root (for warning path validation)")
    p.set_defaults(fn=cmd_slice)

    p = sub.add_parser("fuzz", help="fuzz each compiled slice and collect verdicts")
    common(p, fuzz=True)
    p.set_defaults(fn=cmd_fuzz)

    p = sub.add_parser("classify", help="classify warnings from stored artifacts")
    common(p)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--repository", help="repository label for the report")
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("run", help="end-to-end: capture, index, slice, fuzz, classify")
    common(p, repo=True, warnings=True, fuzz=True)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("persist", help="match old-version PFPs against new-version warnings")
    p.add_argument("--old-report", required=True)
    p.add_argument("--new-warnings", required=True)
    p.add_argument("--old-root", required=True)
    p.add_argument("--new-root", required=True)
    p.set_defaults(fn=cmd_persist)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
