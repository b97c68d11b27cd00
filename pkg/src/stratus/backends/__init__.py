from .base import ExecutionOutcome, ExitStatus
from .local import LocalRunner, local_execute
from .simulator import (
    ProvisionResult,
    SimParams,
    calibrate_model,
    load_sim_params,
    sim_execute,
    sim_provision,
    simulate_repetitions,
)

__all__ = [
    "ExecutionOutcome",
    "ExitStatus",
    "LocalRunner",
    "local_execute",
    "ProvisionResult",
    "SimParams",
    "calibrate_model",
    "load_sim_params",
    "sim_execute",
    "sim_provision",
    "simulate_repetitions",
]
