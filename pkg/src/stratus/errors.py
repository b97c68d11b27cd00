"""Error family shared by every layer of the platform.

Every error the platform raises on purpose derives from :class:`StratusError`,
so callers (and the CLI/HTTP surfaces) can distinguish structured failures
from genuine bugs. Each class carries a stable ``exit_code`` used by the CLI.
"""

from __future__ import annotations


class StratusError(Exception):
    """Base class for all structured platform errors."""

    exit_code = 1


# --- catalog ---------------------------------------------------------------

class CatalogError(StratusError):
    exit_code = 10


class MalformedCatalog(CatalogError):
    exit_code = 11


class DuplicateEntry(CatalogError):
    exit_code = 12


class NoFeasibleInstance(CatalogError):
    exit_code = 13


class UnknownInstanceType(CatalogError):
    exit_code = 14


class AmbiguousInstanceType(CatalogError):
    exit_code = 15


class InfeasibleExplicitChoice(CatalogError):
    exit_code = 16


# --- workflow --------------------------------------------------------------

class WorkflowError(StratusError):
    exit_code = 20


class ValidationFailed(WorkflowError):
    exit_code = 21

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("template validation failed: " + "; ".join(self.violations))


class UnknownParameter(WorkflowError):
    exit_code = 22


class TypeMismatch(WorkflowError):
    exit_code = 23


class MissingParameter(WorkflowError):
    exit_code = 24


class UnknownTemplate(WorkflowError):
    exit_code = 25


# --- execution -------------------------------------------------------------

class ExecutionError(StratusError):
    exit_code = 30


class InsufficientSlots(ExecutionError):
    exit_code = 31


class InvalidTransition(ExecutionError):
    exit_code = 32


# --- backends --------------------------------------------------------------

class BackendError(StratusError):
    exit_code = 40


class CommandFailed(BackendError):
    """A backend command exited nonzero; carries the exit status and log."""

    exit_code = 41

    def __init__(self, message, status, log_text=""):
        self.status = status
        self.log_text = log_text
        super().__init__(message)


class SetupFailed(CommandFailed):
    exit_code = 42


class RunFailed(CommandFailed):
    exit_code = 43


class CommandTimeout(BackendError):
    exit_code = 44

    def __init__(self, message, log_text=""):
        self.log_text = log_text
        super().__init__(message)


class Underdetermined(BackendError):
    exit_code = 45


class SimulatedStockout(BackendError):
    exit_code = 46


# --- results ---------------------------------------------------------------

class ResultsError(StratusError):
    exit_code = 50


class JobNotTerminal(ResultsError):
    exit_code = 51


class InsufficientSamples(ResultsError):
    exit_code = 52


class UnknownRecord(ResultsError):
    exit_code = 53


# --- governance ------------------------------------------------------------

class GovernanceError(StratusError):
    exit_code = 60


class UnknownResource(GovernanceError):
    exit_code = 61


class PermissionDenied(GovernanceError):
    exit_code = 62


class BudgetExhausted(GovernanceError):
    """Reservation rejected; carries the budget's remaining headroom."""

    exit_code = 63

    def __init__(self, message, headroom):
        self.headroom = headroom
        super().__init__(message)


class UnknownReservation(GovernanceError):
    exit_code = 64


class DoubleSettle(GovernanceError):
    exit_code = 65


# --- gateway ---------------------------------------------------------------

class GatewayError(StratusError):
    exit_code = 70


class UnknownFlag(GatewayError):
    exit_code = 71


class MissingFlagValue(GatewayError):
    exit_code = 72


class InvalidFlagValue(GatewayError):
    exit_code = 73


class ConflictingCommandSources(GatewayError):
    exit_code = 74


class UnknownJob(GatewayError):
    exit_code = 75
