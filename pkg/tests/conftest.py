import json
import shutil
import subprocess
from dataclasses import dataclass
from pathlib import Path

import pytest

from slicefuzz.buildcap import (
    CompilationDatabase,
    CompileRecord,
    LineOrigin,
    PreprocessedUnit,
    capture_build,
    preprocess_sources,
)
from slicefuzz.index import RepoIndex
from slicefuzz.warnings_io import Warning

REPO_ROOT = Path(__file__).resolve().parent.parent
CORPUS = REPO_ROOT / "harness_runtime" / "corpus"
RUNTIME = REPO_ROOT / "harness_runtime" / "src"
VERSIONS = REPO_ROOT / "harness_runtime" / "corpus_versions"

BUILD_CMD = "make clean && make"


@dataclass
class CorpusEnv:
    root: Path
    work: Path
    db: CompilationDatabase
    units: list
    idx: RepoIndex

    def unit_for(self, source_suffix: str) -> int:
        for i, rec in enumerate(self.db.records):
            if rec.source.endswith(source_suffix):
                return i
        raise KeyError(source_suffix)


def load_manifest():
    return json.loads((CORPUS / "manifest.json").read_text())


def load_specials():
    return json.loads((CORPUS / "specials.json").read_text())


def corpus_warning(file: str, line: int, tool: str = "ratslike", severity: str = "High") -> Warning:
    return Warning.make(tool, file, line, "buffer_overflow", severity)


@pytest.fixture(scope="session")
def corpus_env(tmp_path_factory) -> CorpusEnv:
    work = tmp_path_factory.mktemp("corpus-work")
    db = capture_build(CORPUS, BUILD_CMD, work, verify_replay=True)
    units = preprocess_sources(db, CORPUS, work)
    idx = RepoIndex.build(units)
    return CorpusEnv(root=CORPUS, work=work, db=db, units=units, idx=idx)


@pytest.fixture()
def synthetic_unit(tmp_path):
    """Build a PreprocessedUnit directly from C text, identity line map."""

    def make(text: str, name: str = "synthetic.c") -> PreprocessedUnit:
        src = tmp_path / name
        src.write_text(text)
        rec = CompileRecord(
            directory=str(tmp_path), source=str(src), args=["-c", name], output=str(src) + ".o"
        )
        n = len(text.splitlines())
        unit = PreprocessedUnit(index=0, record=rec, pp_path=src, raw_path=src)
        unit.lines = [LineOrigin(file=name, line=i + 1, project=True) for i in range(n)]
        return unit

    return make


def require_clang():
    if shutil.which("clang") is None:
        pytest.skip("clang not available")


def run(cmd, **kw):
    return subprocess.run(cmd, capture_output=True, text=True, **kw)
