"""Compile, link, fuzz, and attribute: one sanitizer-instrumented binary per
warning, a fixed engine budget, then crash replay and coverage replay to
produce a verdict in original source coordinates.

The engine is treated as a black box speaking the standard entry-point
convention; crash frames come from replaying artifacts under the sanitizer
binary, per-line execution counts from replaying the final corpus in a
separate block-count-instrumented twin binary.
"""

from __future__ import annotations

import os
import re
import shutil
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import coverage
from .buildcap import CompilationDatabase
from .harness import HarnessSpec, Unfuzzable, plan_arguments, write_harness
from .index import RepoIndex
from .slicer import Slice, SliceCaps, _swap_compile_args, build_slice
from .warnings_io import Warning

FUZZ_CC = os.environ.get("SLICEFUZZ_CLANG", "clang")
CRUNTIME_DIR = Path(__file__).parent / "cruntime"
ATTRIBUTION_FRAMES = 3       # topmost project frames checked against the warning line
BUDGET_GRACE_SECONDS = 10    # engine teardown allowance beyond the budget
RSS_LIMIT_MB = 2048

SANITIZE_COMPILE_FLAGS = ["-gdwarf-4", "-fsanitize=address,fuzzer-no-link"]
# no-prune: dominator-pruned blocks would otherwise carry no counter and their
# lines would be attributed to a neighboring (possibly never-executed) block
REPLAY_COMPILE_FLAGS = ["-gdwarf-4", "-fsanitize-coverage=trace-pc-guard,pc-table,no-prune"]

_ASAN_ENV = "symbolize=0:detect_leaks=0:abort_on_error=0:allocator_may_return_null=1"


class LinkError(Exception):
    def __init__(self, message: str, log: str = "") -> None:
        super().__init__(message)
        self.log = log


class RuntimeFailure(Exception):
    """The fuzz binary could not be started."""


@dataclass
class CrashReport:
    kind: str
    frames: list[tuple[str, int]]          # original (file, line), project frames only
    raw_frames: list[tuple[str, int]]      # including harness/external, for diagnostics
    witness_input: bytes
    artifact: str = ""


@dataclass
class FuzzVerdict:
    warning_id: str
    executed_target_line: bool = False
    target_line_hits: int = 0
    crashes: list[CrashReport] = field(default_factory=list)
    crash_at_target: bool = False
    wall_time: float = 0.0
    covered_lines: dict = field(default_factory=dict)    # (file, line) -> count
    executions: int = 0
    engine_abnormal: str = ""                            # oom / timeout / killed, empty if clean
    harness_suspect: bool = False
    external_lines: int = 0


@dataclass
class RunArtifacts:
    binary: Path
    corpus_dir: Path
    crash_files: list[Path]
    other_artifacts: list[Path]
    log_path: Path
    executions: int
    wall_time: float
    engine_abnormal: str = ""


def _runtime_include(runtime_dir: Optional[Path]) -> Path:
    if runtime_dir is not None:
        return Path(runtime_dir)
    # repo checkout layout: harness_runtime/src next to the workdir
    env = os.environ.get("SLICEFUZZ_RUNTIME")
    if env:
        return Path(env)
    return Path.cwd() / "harness_runtime" / "src"


def _compile(cmd: list[str], cwd: Optional[str] = None) -> subprocess.CompletedProcess:
    try:
        return subprocess.run(cmd, cwd=cwd, capture_output=True, text=True)
    except OSError as exc:
        raise LinkError(f"toolchain invocation failed: {exc}") from exc


def _include_flags(rec) -> list[str]:
    out = []
    take_next = False
    for a in rec.args:
        if take_next:
            out.append(a)
            take_next = False
            continue
        if a in ("-I", "-isystem", "-iquote", "-include"):
            out.append(a)
            take_next = True
        elif a.startswith(("-I", "-D", "-U", "-std=")):
            out.append(a)
    return out


def _build_objects(
    sl: Slice, db: CompilationDatabase, out_dir: Path, flags: list[str], tag: str
) -> list[Path]:
    objs = []
    for mf in sl.files:
        rec = db.records[mf.unit_index]
        obj = out_dir / f"{mf.emitted_path.stem}.{tag}.o"
        args = _swap_compile_args(rec, mf.emitted_path, obj) + flags
        proc = _compile([FUZZ_CC] + args, cwd=rec.directory)
        if proc.returncode != 0:
            raise LinkError(f"instrumented recompile failed for {mf.emitted_path.name}", proc.stderr)
        objs.append(obj)
    return objs


def _compile_support(src: Path, obj: Path, flags: list[str], includes: list[str]) -> None:
    proc = _compile([FUZZ_CC] + flags + includes + ["-c", str(src), "-o", str(obj)])
    if proc.returncode != 0:
        raise LinkError(f"support compile failed for {src.name}", proc.stderr)


def link_executable(
    sl: Slice,
    harness: Path,
    db: CompilationDatabase,
    work_dir: Path,
    runtime_dir: Optional[Path] = None,
) -> Path:
    """ASan+engine binary from the slice objects and the harness."""
    assert sl.compiled, "precondition: slice.status == compiled"
    work_dir = Path(work_dir)
    bin_dir = work_dir / "bin"
    bin_dir.mkdir(parents=True, exist_ok=True)
    rt = _runtime_include(runtime_dir)

    objs = _build_objects(sl, db, bin_dir, SANITIZE_COMPILE_FLAGS, "asan")
    root_rec = db.records[sl.root_fn.unit_index]
    includes = _include_flags(root_rec) + [f"-I{rt}"]
    hobj = bin_dir / "harness.asan.o"
    _compile_support(harness, hobj, SANITIZE_COMPILE_FLAGS + ["-O0"], includes)
    cobj = bin_dir / "byte_cursor.asan.o"
    _compile_support(rt / "byte_cursor.c", cobj, SANITIZE_COMPILE_FLAGS + ["-O0"], [f"-I{rt}"])

    binary = bin_dir / "fuzz.bin"
    cmd = (
        [FUZZ_CC, "-fsanitize=address,fuzzer", "-gdwarf-4"]
        + [str(o) for o in objs + [hobj, cobj]]
        + sl.link_extras
        + ["-o", str(binary)]
    )
    proc = _compile(cmd)
    if proc.returncode != 0:
        raise LinkError("link failed", proc.stderr)
    return binary


def build_replay_binary(
    sl: Slice,
    harness: Path,
    db: CompilationDatabase,
    work_dir: Path,
    runtime_dir: Optional[Path] = None,
) -> Path:
    work_dir = Path(work_dir)
    bin_dir = work_dir / "bin"
    bin_dir.mkdir(parents=True, exist_ok=True)
    rt = _runtime_include(runtime_dir)

    objs = _build_objects(sl, db, bin_dir, REPLAY_COMPILE_FLAGS, "cov")
    root_rec = db.records[sl.root_fn.unit_index]
    includes = _include_flags(root_rec) + [f"-I{rt}"]
    hobj = bin_dir / "harness.cov.o"
    _compile_support(harness, hobj, REPLAY_COMPILE_FLAGS + ["-O0"], includes)
    cobj = bin_dir / "byte_cursor.cov.o"
    _compile_support(rt / "byte_cursor.c", cobj, REPLAY_COMPILE_FLAGS + ["-O0"], [f"-I{rt}"])
    # the runtime and driver stay uninstrumented and carry no line info
    rtobj = bin_dir / "sf_cov_runtime.o"
    _compile_support(CRUNTIME_DIR / "sf_cov_runtime.c", rtobj, ["-O1"], [])
    mobj = bin_dir / "sf_replay_main.o"
    _compile_support(CRUNTIME_DIR / "sf_replay_main.c", mobj, ["-O1"], [])

    binary = bin_dir / "replay.bin"
    cmd = [FUZZ_CC] + [str(o) for o in objs + [hobj, cobj, rtobj, mobj]] + sl.link_extras + ["-o", str(binary)]
    proc = _compile(cmd)
    if proc.returncode != 0:
        raise LinkError("replay link failed", proc.stderr)
    return binary


# ---------------------------------------------------------------------------
# Engine runs
# ---------------------------------------------------------------------------


def run_fuzz(
    binary: Path,
    budget: float,
    seed: int,
    work_dir: Path,
    seed_corpus: Optional[Path] = None,
    max_len: int = 4096,
) -> RunArtifacts:
    work_dir = Path(work_dir)
    corpus_dir = work_dir / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    crashes_dir = work_dir / "crashes"
    crashes_dir.mkdir(parents=True, exist_ok=True)
    log_path = work_dir / "logs" / "fuzz.log"
    log_path.parent.mkdir(parents=True, exist_ok=True)

    if budget <= 0:
        log_path.write_text("budget 0: engine not started\n")
        return RunArtifacts(binary, corpus_dir, [], [], log_path, executions=0, wall_time=0.0)

    cmd = [
        str(binary),
        f"-max_total_time={int(budget)}",
        f"-seed={seed}",
        f"-rss_limit_mb={RSS_LIMIT_MB}",
        "-print_final_stats=1",
        f"-max_len={max_len}",
        f"-artifact_prefix={crashes_dir}/",
        str(corpus_dir),
    ]
    if seed_corpus is not None:
        cmd.append(str(seed_corpus))

    env = dict(os.environ)
    env["ASAN_OPTIONS"] = _ASAN_ENV
    t0 = time.monotonic()
    abnormal = ""
    try:
        proc = subprocess.run(
            cmd, capture_output=True, text=True, env=env,
            timeout=budget + BUDGET_GRACE_SECONDS + 20,
        )
        log = proc.stderr
    except subprocess.TimeoutExpired as exc:
        log = (exc.stderr or b"").decode("utf-8", "replace") if isinstance(exc.stderr, bytes) else (exc.stderr or "")
        abnormal = "engine timeout (killed)"
    except OSError as exc:
        raise RuntimeFailure(f"fuzz binary failed to start: {exc}") from exc
    wall = time.monotonic() - t0
    log_path.write_text(log)

    if not abnormal:
        if re.search(r"ERROR: libFuzzer: out-of-memory", log):
            abnormal = "oom"
        elif re.search(r"ERROR: libFuzzer: timeout", log):
            abnormal = "per-input timeout"

    executions = 0
    m = re.search(r"stat::number_of_executed_units:\s*(\d+)", log)
    if m:
        executions = int(m.group(1))
    else:
        runs = re.findall(r"^#(\d+)", log, re.MULTILINE)
        if runs:
            executions = int(runs[-1])

    crash_files = sorted(crashes_dir.glob("crash-*"))
    others = sorted(p for p in crashes_dir.iterdir() if not p.name.startswith("crash-"))
    return RunArtifacts(binary, corpus_dir, crash_files, others, log_path,
                        executions=executions, wall_time=wall, engine_abnormal=abnormal)


# ---------------------------------------------------------------------------
# Crash replay and attribution
# ---------------------------------------------------------------------------

_FRAME_RE = re.compile(r"^\s*#\d+\s+0x[0-9a-f]+\s+.*?\((?P<mod>[^)+]+)\+0x(?P<off>[0-9a-f]+)\)")
_KIND_RE = re.compile(r"(?:AddressSanitizer|libFuzzer): (?:SUMMARY: )?([a-zA-Z][\w-]+)")
_SUMMARY_RE = re.compile(r"SUMMARY: AddressSanitizer: ([\w-]+)")


def _emitted_lookup(sl: Slice) -> dict[str, list]:
    return {str(mf.emitted_path.resolve()): mf.emitted_line_map for mf in sl.files}


def map_emitted_line(sl: Slice, fname: str, lineno: int) -> Optional[tuple[str, int]]:
    """Emitted-file coordinates -> original (file, line); None if external.

    DWARF consumers report emitted files sometimes by absolute path and
    sometimes by basename; emitted stems are unique within one warning's
    workspace, so basename matching is unambiguous here.
    """
    base = Path(fname).name
    for mf in sl.files:
        if mf.emitted_path.name == base:
            if 1 <= lineno <= len(mf.emitted_line_map):
                return mf.emitted_line_map[lineno - 1]
            return None
    return None


def replay_crash(binary: Path, artifact: Path, sl: Slice) -> Optional[CrashReport]:
    env = dict(os.environ)
    env["ASAN_OPTIONS"] = _ASAN_ENV
    try:
        proc = subprocess.run(
            [str(binary), str(artifact)], capture_output=True, text=True, env=env, timeout=30
        )
    except subprocess.TimeoutExpired:
        return CrashReport(kind="timeout", frames=[], raw_frames=[],
                           witness_input=artifact.read_bytes(), artifact=str(artifact))
    except OSError:
        return None
    log = proc.stderr
    if proc.returncode == 0 and "ERROR" not in log:
        return None

    kind = "unknown"
    m = _SUMMARY_RE.search(log)
    if m:
        kind = m.group(1)
    else:
        m = re.search(r"AddressSanitizer: ([\w-]+)", log)
        if m:
            kind = m.group(1)
        elif "deadly signal" in log:
            kind = "deadly-signal"

    bin_resolved = str(Path(binary).resolve())
    offsets = []
    for line in log.splitlines():
        fm = _FRAME_RE.match(line)
        if not fm:
            continue
        mod = fm.group("mod")
        if str(Path(mod).resolve() if mod.startswith("/") else mod) != bin_resolved:
            continue
        offsets.append(int(fm.group("off"), 16))
        if len(offsets) >= 24:
            break

    located = coverage.symbolize(binary, offsets)
    raw_frames: list[tuple[str, int]] = []
    project_frames: list[tuple[str, int]] = []
    for fname, lineno in located:
        if not fname or lineno <= 0:
            continue
        raw_frames.append((fname, lineno))
        mapped = map_emitted_line(sl, fname, lineno)
        if mapped is not None:
            project_frames.append(mapped)

    return CrashReport(
        kind=kind,
        frames=project_frames,
        raw_frames=raw_frames,
        witness_input=artifact.read_bytes(),
        artifact=str(artifact),
    )


def attribute_crash(report: CrashReport, w: Warning, k: int = ATTRIBUTION_FRAMES) -> bool:
    """True when one of the topmost k project frames is the warning line."""
    return any(f == (w.file, w.line) for f in report.frames[:k])


# ---------------------------------------------------------------------------
# Verdict collection
# ---------------------------------------------------------------------------


def _replay_corpus(replay_bin: Path, inputs: list[Path], cov_dir: Path) -> list[list[tuple[int, int, int]]]:
    cov_dir.mkdir(parents=True, exist_ok=True)
    dumps = []

    def run_batch(batch: list[Path], tag: str) -> bool:
        out = cov_dir / f"cov_{tag}.txt"
        env = dict(os.environ)
        env["SLICEFUZZ_COV_OUT"] = str(out)
        try:
            proc = subprocess.run(
                [str(replay_bin)] + [str(p) for p in batch],
                capture_output=True, env=env, timeout=60 + 2 * len(batch),
            )
            ok = proc.returncode == 0
        except (subprocess.TimeoutExpired, OSError):
            ok = False
        dumps.append(coverage.parse_cov_dump(out))
        return ok

    batch = list(inputs)
    if batch and not run_batch(batch, "all"):
        # a dying input poisons the batch: redo one at a time, keeping partials
        dumps.clear()
        for i, p in enumerate(batch):
            run_batch([p], f"one{i:04d}")
    return dumps


def collect_verdict(
    artifacts: RunArtifacts,
    w: Warning,
    sl: Slice,
    harness: Path,
    db: CompilationDatabase,
    work_dir: Path,
    runtime_dir: Optional[Path] = None,
) -> FuzzVerdict:
    v = FuzzVerdict(warning_id=w.id, wall_time=artifacts.wall_time,
                    executions=artifacts.executions, engine_abnormal=artifacts.engine_abnormal)
    work_dir = Path(work_dir)

    corpus_inputs = sorted(artifacts.corpus_dir.iterdir()) if artifacts.corpus_dir.exists() else []
    inputs = [p for p in corpus_inputs if p.is_file()] + list(artifacts.crash_files)

    if inputs:
        replay_bin = build_replay_binary(sl, harness, db, work_dir, runtime_dir)
        dumps = _replay_corpus(replay_bin, inputs, work_dir / "cov")
        merged = coverage.merge_dumps(dumps)
        dwarf = coverage.decoded_lines(replay_bin)
        raw_counts = coverage.line_counts(merged, dwarf)
        for (fname, lineno), count in raw_counts.items():
            if count <= 0:
                continue
            mapped = map_emitted_line(sl, fname, lineno)
            if mapped is None:
                v.external_lines += 1
                continue
            key = mapped
            v.covered_lines[key] = max(v.covered_lines.get(key, 0), count)

    for artifact in artifacts.crash_files:
        report = replay_crash(artifacts.binary, artifact, sl)
        if report is None:
            continue
        v.crashes.append(report)
        if attribute_crash(report, w):
            v.crash_at_target = True
            key = (w.file, w.line)
            v.covered_lines[key] = max(v.covered_lines.get(key, 0), 1)
        elif not report.frames:
            v.harness_suspect = True

    v.target_line_hits = v.covered_lines.get((w.file, w.line), 0)
    v.executed_target_line = v.target_line_hits > 0
    return v


def save_verdict(v: FuzzVerdict, path: Path) -> None:
    import json

    data = {
        "warning_id": v.warning_id,
        "executed": v.executed_target_line,
        "hits": v.target_line_hits,
        "crashes": [
            {
                "kind": c.kind,
                "frames": [list(f) for f in c.frames],
                "witness": c.witness_input.hex(),
                "artifact": c.artifact,
            }
            for c in v.crashes
        ],
        "crash_at_target": v.crash_at_target,
        "wall_time": round(v.wall_time, 3),
        "executions": v.executions,
        "engine_abnormal": v.engine_abnormal,
        "harness_suspect": v.harness_suspect,
        "covered_lines": [[f, l, c] for (f, l), c in sorted(v.covered_lines.items())],
    }
    Path(path).write_text(json.dumps(data, indent=1))


# ---------------------------------------------------------------------------
# Per-warning pipeline and the worker pool
# ---------------------------------------------------------------------------


@dataclass
class WarningOutcome:
    warning: Warning
    slice: Optional[Slice] = None
    spec: Optional[HarnessSpec] = None
    unfuzzable_reason: str = ""
    verdict: Optional[FuzzVerdict] = None
    failure: str = ""          # link / runtime / unfuzzable, empty when fuzzed


def run_warning(
    w: Warning,
    idx: RepoIndex,
    db: CompilationDatabase,
    warn_dir: Path,
    budget: float,
    seed: int,
    caps: SliceCaps = SliceCaps(),
    runtime_dir: Optional[Path] = None,
    seed_corpus: Optional[Path] = None,
) -> WarningOutcome:
    warn_dir = Path(warn_dir)
    warn_dir.mkdir(parents=True, exist_ok=True)
    sl = build_slice(w, idx, db, warn_dir, caps)
    return fuzz_sliced(w, sl, idx, db, warn_dir, budget, seed, runtime_dir, seed_corpus)


def fuzz_sliced(
    w: Warning,
    sl: Slice,
    idx: RepoIndex,
    db: CompilationDatabase,
    warn_dir: Path,
    budget: float,
    seed: int,
    runtime_dir: Optional[Path] = None,
    seed_corpus: Optional[Path] = None,
) -> WarningOutcome:
    warn_dir = Path(warn_dir)
    warn_dir.mkdir(parents=True, exist_ok=True)
    out = WarningOutcome(warning=w)
    out.slice = sl
    if not sl.compiled:
        return out

    spec = plan_arguments(sl.root_fn, idx)
    if isinstance(spec, Unfuzzable):
        out.unfuzzable_reason = spec.reason
        out.failure = "unfuzzable"
        return out
    out.spec = spec
    harness = write_harness(spec, warn_dir, sl)

    try:
        binary = link_executable(sl, harness, db, warn_dir, runtime_dir)
    except LinkError as exc:
        out.failure = "link"
        (warn_dir / "logs").mkdir(exist_ok=True)
        (warn_dir / "logs" / "link.log").write_text(f"{exc}\n{exc.log}")
        return out

    try:
        artifacts = run_fuzz(binary, budget, seed, warn_dir, seed_corpus=seed_corpus)
    except RuntimeFailure as exc:
        out.failure = "runtime"
        (warn_dir / "logs").mkdir(exist_ok=True)
        (warn_dir / "logs" / "runtime.log").write_text(str(exc))
        return out

    try:
        verdict = collect_verdict(artifacts, w, sl, harness, db, warn_dir, runtime_dir)
    except LinkError as exc:
        out.failure = "runtime"
        (warn_dir / "logs").mkdir(exist_ok=True)
        (warn_dir / "logs" / "coverage.log").write_text(f"{exc}\n{exc.log}")
        return out
    out.verdict = verdict
    save_verdict(verdict, warn_dir / "verdict.json")
    return out


def orchestrate(
    warnings: list[Warning],
    idx: RepoIndex,
    db: CompilationDatabase,
    work_root: Path,
    budget: float,
    seed: int,
    workers: int = 4,
    caps: SliceCaps = SliceCaps(),
    runtime_dir: Optional[Path] = None,
) -> list[WarningOutcome]:
    work_root = Path(work_root)

    def one(w: Warning) -> WarningOutcome:
        return run_warning(w, idx, db, work_root / w.id, budget, seed, caps, runtime_dir)

    if workers <= 1 or len(warnings) <= 1:
        return [one(w) for w in warnings]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, warnings))
