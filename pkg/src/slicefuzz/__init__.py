"""Static-analysis warning triage by function-level slice fuzzing.

The pipeline: ingest warnings, capture the project's build, preprocess and
index the sources, construct a minimal compilable slice around the function
enclosing each warning, generate a type-aware fuzzing harness, fuzz the slice
under a sanitizer oracle, and classify each warning as C / PFP / NR / NC.
"""

__version__ = "0.1.0"

from .warnings_io import Warning, SeverityPolicy, load_warnings, filter_by_severity, dedupe_warnings

__all__ = [
    "Warning",
    "SeverityPolicy",
    "load_warnings",
    "filter_by_severity",
    "dedupe_warnings",
]
