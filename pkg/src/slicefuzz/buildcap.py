"""Build capture, preprocessing, and line maps.

A wrapper shim placed first on PATH records every compiler invocation during
one native build, yielding a replayable compilation database. Each translation
unit is then preprocessed with its own recorded arguments; the preprocessor's
line markers drive a total map from preprocessed lines back to original
(file, line) coordinates, which everything downstream (slicing, coverage,
crash attribution) relies on.
"""

from __future__ import annotations

import fcntl
import json
import os
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

WRAPPED_TOOLS = ("cc", "gcc", "clang", "c++", "g++", "clang++")

_SHIM_SOURCE = '''#!/usr/bin/env python3
import fcntl, json, os, sys

name = os.path.basename(sys.argv[0])
here = os.path.dirname(os.path.abspath(sys.argv[0]))
real = None
for entry in os.environ.get("PATH", "").split(os.pathsep):
    if not entry or os.path.abspath(entry) == here:
        continue
    cand = os.path.join(entry, name)
    if os.path.isfile(cand) and os.access(cand, os.X_OK):
        real = cand
        break
if real is None:
    sys.stderr.write(f"capture shim: no real {name} on PATH\\n")
    sys.exit(127)

log = os.environ.get("SLICEFUZZ_CAPTURE_LOG")
if log:
    event = {"tool": name, "real": real, "cwd": os.getcwd(), "argv": sys.argv[1:]}
    with open(log, "a") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        fh.write(json.dumps(event) + "\\n")
        fh.flush()
        fcntl.flock(fh, fcntl.LOCK_UN)

# argv[0] must be the full real path: gcc locates its internal tools (cc1)
# by searching PATH for argv[0] when it is a bare name, which would find this
# shim again and derive a bogus exec prefix.
os.execv(real, [real] + sys.argv[1:])
'''


class CaptureError(Exception):
    """Build failed, the wrapper never engaged, or replay verification failed."""


@dataclass
class CompileRecord:
    directory: str
    source: str
    args: list[str]
    output: str
    link_group: Optional[str] = None
    tool: str = "cc"


@dataclass
class CompilationDatabase:
    records: list[CompileRecord]
    link_commands: dict[str, list[str]]
    toolchain: dict[str, str]

    def to_json(self) -> dict:
        return {
            "records": [
                {
                    "directory": r.directory,
                    "source": r.source,
                    "args": r.args,
                    "output": r.output,
                    "link_group": r.link_group,
                    "tool": r.tool,
                }
                for r in self.records
            ],
            "links": self.link_commands,
            "toolchain": self.toolchain,
        }

    @staticmethod
    def from_json(data: dict) -> "CompilationDatabase":
        records = [
            CompileRecord(
                directory=r["directory"],
                source=r["source"],
                args=list(r["args"]),
                output=r["output"],
                link_group=r.get("link_group"),
                tool=r.get("tool", "cc"),
            )
            for r in data["records"]
        ]
        return CompilationDatabase(records, dict(data.get("links", {})), dict(data.get("toolchain", {})))

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @staticmethod
    def load(path: Path) -> "CompilationDatabase":
        return CompilationDatabase.from_json(json.loads(Path(path).read_text()))


def _is_c_source(arg: str) -> bool:
    return arg.endswith(".c") and not arg.startswith("-")


def _output_of(args: list[str], default: Optional[str]) -> Optional[str]:
    for i, a in enumerate(args):
        if a == "-o" and i + 1 < len(args):
            return args[i + 1]
        if a.startswith("-o") and len(a) > 2:
            return a[2:]
    return default


def _classify_event(event: dict) -> Optional[tuple[str, dict]]:
    argv = event["argv"]
    if any(a in ("-E", "-S", "--version", "-dumpversion", "-print-search-dirs") for a in argv):
        return None
    sources = [a for a in argv if _is_c_source(a)]
    if "-c" in argv:
        if len(sources) != 1:
            return None  # multi-source compiles are not C translation units we track
        src = sources[0]
        default_out = Path(src).stem + ".o"
        out = _output_of(argv, default_out)
        return "compile", {"source": src, "output": out}
    inputs = [a for a in argv if a.endswith((".o", ".a")) and not a.startswith("-")]
    if inputs or sources:
        out = _output_of(argv, "a.out")
        return "link", {"inputs": inputs + sources, "output": out}
    return None


def write_shim_dir(shim_dir: Path) -> Path:
    shim_dir = Path(shim_dir)
    shim_dir.mkdir(parents=True, exist_ok=True)
    script = shim_dir / "_capture_shim.py"
    script.write_text(_SHIM_SOURCE)
    script.chmod(0o755)
    for tool in WRAPPED_TOOLS:
        dest = shim_dir / tool
        if dest.exists() or dest.is_symlink():
            dest.unlink()
        dest.symlink_to(script.name)
    return shim_dir


def capture_build(repo_root: Path, build_cmd: str, workdir: Path, verify_replay: bool = True) -> CompilationDatabase:
    """Run the native build under the wrapper shim and assemble the database."""
    repo_root = Path(repo_root).resolve()
    workdir = Path(workdir).resolve()
    workdir.mkdir(parents=True, exist_ok=True)
    capture_dir = workdir / "capture"
    capture_dir.mkdir(exist_ok=True)

    lock_path = capture_dir / ".lock"
    with open(lock_path, "w") as lock_fh:
        fcntl.flock(lock_fh, fcntl.LOCK_EX)

        log_path = capture_dir / "events.jsonl"
        if log_path.exists():
            log_path.unlink()
        shim_dir = write_shim_dir(capture_dir / "bin")

        env = dict(os.environ)
        env["PATH"] = f"{shim_dir}{os.pathsep}{env.get('PATH', '')}"
        env["SLICEFUZZ_CAPTURE_LOG"] = str(log_path)

        proc = subprocess.run(
            build_cmd, shell=True, cwd=repo_root, env=env,
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
        )
        (capture_dir / "build.log").write_text(proc.stdout)
        if proc.returncode != 0:
            raise CaptureError(f"build command failed (exit {proc.returncode}); log:\n{proc.stdout[-4000:]}")

        events = []
        if log_path.exists():
            for line in log_path.read_text().splitlines():
                if line.strip():
                    events.append(json.loads(line))

    records: list[CompileRecord] = []
    links: list[dict] = []
    real_tools: dict[str, str] = {}
    for event in events:
        real_tools.setdefault(event["tool"], event["real"])
        kind = _classify_event(event)
        if kind is None:
            continue
        what, info = kind
        cwd = event["cwd"]
        if what == "compile":
            records.append(
                CompileRecord(
                    directory=cwd,
                    source=str((Path(cwd) / info["source"]).resolve()),
                    args=list(event["argv"]),
                    output=str((Path(cwd) / info["output"]).resolve()),
                    tool=event["tool"],
                )
            )
        else:
            links.append(
                {
                    "cwd": cwd,
                    "argv": list(event["argv"]),
                    "output": str((Path(cwd) / info["output"]).resolve()),
                    "inputs": [str((Path(cwd) / p).resolve()) for p in info["inputs"]],
                }
            )

    if not records:
        raise CaptureError("zero compile steps observed; wrapper not engaged or no C build system")

    link_commands: dict[str, list[str]] = {}
    for link in links:
        link_commands[link["output"]] = link["argv"]
    for rec in records:
        for link in links:
            if rec.output in link["inputs"]:
                rec.link_group = link["output"]
                break

    toolchain = {"tools": real_tools}
    cc_path = real_tools.get("cc") or next(iter(real_tools.values()), shutil.which("cc") or "cc")
    version = subprocess.run([cc_path, "--version"], capture_output=True, text=True)
    toolchain["cc"] = cc_path
    toolchain["version"] = version.stdout.splitlines()[0] if version.stdout else "unknown"

    db = CompilationDatabase(records, link_commands, toolchain)

    if verify_replay:
        for rec in records:
            tool = real_tools.get(rec.tool, cc_path)
            proc = subprocess.run([tool] + rec.args, cwd=rec.directory, capture_output=True, text=True)
            if proc.returncode != 0:
                raise CaptureError(
                    f"replay of recorded compile failed for {rec.source}:\n{proc.stderr[-2000:]}"
                )

    db.save(Path(workdir) / "build_db.json")
    return db


# ---------------------------------------------------------------------------
# Preprocessing and line maps
# ---------------------------------------------------------------------------

EXTERNAL = "<external>"


@dataclass
class LineOrigin:
    file: str   # repo-relative for project lines, absolute or pseudo for external
    line: int
    project: bool


@dataclass
class PreprocessedUnit:
    index: int
    record: CompileRecord
    pp_path: Optional[Path]
    raw_path: Optional[Path]
    lines: list[LineOrigin] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def map_line(self, pp_line: int) -> tuple[str, int]:
        """Original (file, line) for a 1-based stripped-text line."""
        if pp_line < 1 or pp_line > len(self.lines):
            raise IndexError(f"pp line {pp_line} outside unit {self.index} (1..{len(self.lines)})")
        origin = self.lines[pp_line - 1]
        if not origin.project:
            return EXTERNAL, origin.line
        return origin.file, origin.line

    def save_map(self, path: Path) -> None:
        data = {
            "index": self.index,
            "source": self.record.source,
            "error": self.error,
            "lines": [[o.file, o.line, o.project] for o in self.lines],
        }
        Path(path).write_text(json.dumps(data))


def _strip_flag_with_value(args: list[str], flag: str) -> list[str]:
    out = []
    skip = False
    for a in args:
        if skip:
            skip = False
            continue
        if a == flag:
            skip = True
            continue
        if a.startswith(flag) and len(a) > len(flag) and flag == "-o":
            continue
        out.append(a)
    return out


_MARKER_FLAGS = ("1", "2", "3", "4")


def _parse_marker(line: str) -> Optional[tuple[str, int, bool]]:
    # e.g.: # 12 "/usr/include/string.h" 1 3 4
    if not line.startswith("# "):
        return None
    rest = line[2:].strip()
    parts = rest.split(" ", 1)
    if not parts or not parts[0].isdigit() or len(parts) < 2:
        return None
    lineno = int(parts[0])
    tail = parts[1].strip()
    if not tail.startswith('"'):
        return None
    end = tail.find('"', 1)
    if end < 0:
        return None
    fname = tail[1:end]
    flags = tail[end + 1 :].split()
    system = "3" in flags
    return fname, lineno, system


def preprocess_unit(
    index: int, rec: CompileRecord, repo_root: Path, pp_dir: Path, toolchain: dict
) -> PreprocessedUnit:
    pp_dir = Path(pp_dir)
    pp_dir.mkdir(parents=True, exist_ok=True)
    raw_path = pp_dir / f"unit{index:04d}.raw.i"
    pp_path = pp_dir / f"unit{index:04d}.i"

    tool = toolchain.get("tools", {}).get(rec.tool) or toolchain.get("cc", "cc")
    args = _strip_flag_with_value([a for a in rec.args if a != "-c"], "-o")
    args = args + ["-E"]
    proc = subprocess.run([tool] + args, cwd=rec.directory, capture_output=True, text=True)
    unit = PreprocessedUnit(index=index, record=rec, pp_path=pp_path, raw_path=raw_path)
    if proc.returncode != 0:
        unit.error = f"preprocessor failed (exit {proc.returncode}): {proc.stderr[-1000:]}"
        unit.pp_path = None
        unit.raw_path = None
        return unit
    raw_path.write_text(proc.stdout)

    repo_root = Path(repo_root).resolve()
    cur_file = rec.source
    cur_line = 1
    stripped: list[str] = []
    origins: list[LineOrigin] = []
    for text_line in proc.stdout.splitlines():
        marker = _parse_marker(text_line)
        if marker is not None:
            fname, lineno, system = marker
            cur_file = fname
            cur_line = lineno
            continue
        resolved = Path(cur_file)
        if not resolved.is_absolute():
            resolved = Path(rec.directory) / resolved
        try:
            rel = resolved.resolve().relative_to(repo_root).as_posix()
            project = True
            display = rel
        except ValueError:
            project = False
            display = str(resolved)
        stripped.append(text_line)
        origins.append(LineOrigin(file=display, line=cur_line, project=project))
        cur_line += 1

    pp_path.write_text("\n".join(stripped) + ("\n" if stripped else ""))
    unit.lines = origins
    unit.save_map(pp_dir / f"unit{index:04d}.map.json")
    return unit


def preprocess_sources(db: CompilationDatabase, repo_root: Path, workdir: Path) -> list[PreprocessedUnit]:
    pp_dir = Path(workdir) / "pp"
    units = []
    for i, rec in enumerate(db.records):
        units.append(preprocess_unit(i, rec, repo_root, pp_dir, db.toolchain))
    return units


def load_units(db: CompilationDatabase, workdir: Path) -> list[PreprocessedUnit]:
    """Rehydrate units from the pp stage artifacts."""
    pp_dir = Path(workdir) / "pp"
    units = []
    for i, rec in enumerate(db.records):
        map_path = pp_dir / f"unit{i:04d}.map.json"
        if not map_path.exists():
            raise FileNotFoundError(f"pp artifacts missing for unit {i}; run the capture stage first")
        data = json.loads(map_path.read_text())
        unit = PreprocessedUnit(
            index=i,
            record=rec,
            pp_path=pp_dir / f"unit{i:04d}.i" if data.get("error") is None else None,
            raw_path=pp_dir / f"unit{i:04d}.raw.i" if data.get("error") is None else None,
            error=data.get("error"),
        )
        unit.lines = [LineOrigin(file=f, line=n, project=p) for f, n, p in data["lines"]]
        units.append(unit)
    return units


def build_origin_lookup(units: list[PreprocessedUnit]) -> dict[tuple[str, int], list[tuple[int, int]]]:
    """(repo-relative file, original line) -> [(unit index, pp line)]."""
    lookup: dict[tuple[str, int], list[tuple[int, int]]] = {}
    for unit in units:
        if not unit.ok:
            continue
        for pp_line, origin in enumerate(unit.lines, start=1):
            if origin.project:
                lookup.setdefault((origin.file, origin.line), []).append((unit.index, pp_line))
    return lookup
