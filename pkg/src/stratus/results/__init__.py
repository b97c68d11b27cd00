from .analytics import (
    RunMetrics,
    ScalingSeries,
    aggregate_repetitions,
    cost_per_run,
    parallel_efficiency,
)
from .records import FieldDiff, ProvenanceRecord, build_record, canonical_json, compare_runs
from .store import RecordStore
from .report import write_report

__all__ = [
    "FieldDiff",
    "ProvenanceRecord",
    "RecordStore",
    "RunMetrics",
    "ScalingSeries",
    "aggregate_repetitions",
    "build_record",
    "canonical_json",
    "compare_runs",
    "cost_per_run",
    "parallel_efficiency",
    "write_report",
]
