"""Shared backend result types."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class ExitStatus(str, enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"


@dataclass(frozen=True)
class ExecutionOutcome:
    wall_time_hours: float
    exit_status: ExitStatus
    log_text: str = ""
    output_refs: tuple[str, ...] = ()

    def __post_init__(self):
        if self.exit_status == ExitStatus.SUCCESS and self.wall_time_hours <= 0:
            raise ValueError("successful outcomes must have positive wall time")
        object.__setattr__(self, "output_refs", tuple(self.output_refs))
