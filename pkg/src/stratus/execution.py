"""Provisioning plans, MPI launch envelopes, and the job state machine.

Given requirements and a catalog snapshot this module produces a concrete
node/instance plan, factorizes the MPI rank count into a 2-D process grid,
spreads ranks block-contiguously over nodes, and emits a standard hostfile.
It also owns the fixed job lifecycle transition table.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .catalog import CatalogSnapshot, InstanceType, ResourceRequirements, select_instance
from .catalog import FamilyClass
from .errors import InsufficientSlots, InvalidTransition
from .workflow import ParameterSet, TemplateVersion


class Backend(str, enum.Enum):
    LOCAL = "local"
    SIMULATED = "simulated"


@dataclass(frozen=True)
class ProvisioningPlan:
    instance: InstanceType
    num_nodes: int
    total_slots: int
    backend: Backend

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ValueError("num_nodes must be >= 1")
        if self.total_slots != self.num_nodes * self.instance.vcpus:
            raise ValueError("total_slots must equal num_nodes * vcpus")


@dataclass(frozen=True)
class MpiPlan:
    np: int
    grid: tuple[int, int]
    hostfile_text: str
    rank_map: tuple[tuple[int, int], ...]  # (rank, node_index)
    slots_per_node: tuple[int, ...]
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "metadata", dict(self.metadata))


def plan_provisioning(req: ResourceRequirements, snapshot: CatalogSnapshot,
                      backend: Backend) -> ProvisioningPlan:
    """Resolve the instance via catalog selection and size the slot pool."""
    selection = select_instance(req, snapshot)
    num_nodes = req.num_nodes
    return ProvisioningPlan(
        instance=selection.instance,
        num_nodes=num_nodes,
        total_slots=num_nodes * selection.instance.vcpus,
        backend=Backend(backend),
    )


def decompose_grid(np: int) -> tuple[int, int]:
    """2-D process grid (N_x, N_y): N_x is the largest divisor of np <= sqrt(np)."""
    if np < 1:
        raise ValueError("np must be >= 1")
    for d in range(math.isqrt(np), 0, -1):
        if np % d == 0:
            return (d, np // d)
    raise AssertionError("unreachable: 1 divides np")


def _even_shares(total: int, buckets: int) -> list[int]:
    # earlier buckets take the larger share
    base, extra = divmod(total, buckets)
    return [base + 1 if i < extra else base for i in range(buckets)]


def build_mpi_envelope(np: int, plan: ProvisioningPlan) -> MpiPlan:
    """Spread np ranks over the plan's nodes and emit the launch envelope.

    Ranks are block-contiguous: node 0 carries ranks 0..k-1, node 1 the next
    block, and so on. The hostfile lists one "node-<i> slots=<assigned>" line
    per node that received ranks.
    """
    if np < 1:
        raise ValueError("np must be >= 1")
    if np > plan.total_slots:
        raise InsufficientSlots(
            f"np={np} exceeds {plan.total_slots} slots "
            f"({plan.num_nodes} x {plan.instance.vcpus})")
    shares = _even_shares(np, plan.num_nodes)
    shares = [s for s in shares if s > 0]

    rank_map = []
    rank = 0
    for node_index, share in enumerate(shares):
        for _ in range(share):
            rank_map.append((rank, node_index))
            rank += 1

    hostfile_text = "".join(
        f"node-{i} slots={share}\n" for i, share in enumerate(shares))

    metadata = {}
    if plan.instance.family_class == FamilyClass.HPC:
        metadata["interconnect"] = "efa"

    return MpiPlan(
        np=np,
        grid=decompose_grid(np),
        hostfile_text=hostfile_text,
        rank_map=tuple(rank_map),
        slots_per_node=tuple(shares),
        metadata=metadata,
    )


def parse_hostfile(text: str) -> list[tuple[str, int]]:
    """Inverse of hostfile emission: [(hostname, slots)] in file order."""
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        host, _, slots = line.partition(" slots=")
        out.append((host, int(slots)))
    return out


class JobState(str, enum.Enum):
    QUEUED = "Queued"
    PROVISIONING = "Provisioning"
    SETUP = "Setup"
    RUNNING = "Running"
    COLLECTING = "Collecting"
    SUCCEEDED = "Succeeded"
    FAILED = "Failed"
    CANCELLED = "Cancelled"


class JobEvent(str, enum.Enum):
    PROVISION_STARTED = "ProvisionStarted"
    NODES_READY = "NodesReady"
    SETUP_DONE = "SetupDone"
    RUN_COMPLETED = "RunCompleted"
    OUTPUTS_STORED = "OutputsStored"
    ERROR_RAISED = "ErrorRaised"
    CANCEL_REQUESTED = "CancelRequested"


TERMINAL_STATES = frozenset(
    {JobState.SUCCEEDED, JobState.FAILED, JobState.CANCELLED})

_CHAIN = {
    (JobState.QUEUED, JobEvent.PROVISION_STARTED): JobState.PROVISIONING,
    (JobState.PROVISIONING, JobEvent.NODES_READY): JobState.SETUP,
    (JobState.SETUP, JobEvent.SETUP_DONE): JobState.RUNNING,
    (JobState.RUNNING, JobEvent.RUN_COMPLETED): JobState.COLLECTING,
    (JobState.COLLECTING, JobEvent.OUTPUTS_STORED): JobState.SUCCEEDED,
}

TRANSITIONS: dict[tuple[JobState, JobEvent], JobState] = dict(_CHAIN)
for _state in JobState:
    if _state not in TERMINAL_STATES:
        TRANSITIONS[(_state, JobEvent.ERROR_RAISED)] = JobState.FAILED
        TRANSITIONS[(_state, JobEvent.CANCEL_REQUESTED)] = JobState.CANCELLED


def transition(current: JobState, event: JobEvent) -> JobState:
    """Apply one lifecycle event; anything outside the table is invalid."""
    nxt = TRANSITIONS.get((JobState(current), JobEvent(event)))
    if nxt is None:
        raise InvalidTransition(f"no transition for ({current}, {event})")
    return nxt


@dataclass
class JobEventRecord:
    timestamp: float
    event: JobEvent
    state: JobState  # state after the event
    lines: tuple[str, ...] = ()


@dataclass
class Job:
    id: str
    template_version: TemplateVersion
    parameters: ParameterSet
    plan: ProvisioningPlan
    mpi: Optional[MpiPlan] = None
    state: JobState = JobState.QUEUED
    submitted_at: float = field(default_factory=time.time)
    events: list[JobEventRecord] = field(default_factory=list)
    budget_reservation: Optional[str] = None
    workspace: str = "default"
    principal: str = ""
    cost_estimate: float = 0.0
    cost_settled: Optional[float] = None

    def apply(self, event: JobEvent, lines: tuple[str, ...] = ()) -> JobEventRecord:
        """Advance the state machine and append to the event log.

        Caller must hold the job's lock; the append and the state update are
        a single step so the log always replays to the stored state.
        """
        new_state = transition(self.state, event)
        record = JobEventRecord(timestamp=time.time(), event=event,
                                state=new_state, lines=tuple(lines))
        self.events.append(record)
        self.state = new_state
        return record

    def replay_state(self) -> JobState:
        state = JobState.QUEUED
        for rec in self.events:
            state = transition(state, rec.event)
        return state
