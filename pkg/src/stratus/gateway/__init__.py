from .cliparse import ParsedRun, RunRequest, TemplateRef, parse_run_command, render_argv
from .service import DryRunReport, StatusEvent, StratusService

__all__ = [
    "DryRunReport",
    "ParsedRun",
    "RunRequest",
    "StatusEvent",
    "StratusService",
    "TemplateRef",
    "parse_run_command",
    "render_argv",
]
