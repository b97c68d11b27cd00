"""Orchestrator behind the CLI and HTTP surfaces.

Admission (permission check, template resolution, instance planning, budget
reservation) runs synchronously and atomically: a job record exists only
after every check has passed. Execution then proceeds on a bounded worker
pool through the lifecycle state machine, emitting an ordered event stream
that subscribers can join at any time (full history replay, then live tail).
Terminal jobs settle their budget reservation and persist a provenance
record.
"""

from __future__ import annotations

import dataclasses
import queue
import re
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterator, NamedTuple, Optional

from .. import workflow
from ..backends.base import ExecutionOutcome, ExitStatus
from ..backends.local import LocalRunner
from ..backends.simulator import sim_execute, sim_provision
from ..catalog import ResourceRequirements, estimate_cost, select_instance
from ..config import ServiceConfig
from ..errors import PermissionDenied, UnknownJob
from ..execution import (
    Backend,
    Job,
    JobEvent,
    JobState,
    TERMINAL_STATES,
    build_mpi_envelope,
    plan_provisioning,
)
from ..governance import Action
from ..results.report import report_from_records
from ..results.store import RecordStore
from .cliparse import RunRequest

_NP_FLAG = re.compile(r"(?:^|\s)--?np[=\s]+(\d+)\b")


class _CancelSignal(Exception):
    pass


@dataclasses.dataclass(frozen=True)
class DryRunReport:
    instance_name: str
    provider: str
    region: str
    price_per_hour: float
    num_nodes: int
    total_slots: int
    estimated_cost: float
    rationale: str
    np: Optional[int] = None
    grid: Optional[tuple[int, int]] = None

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


class StatusEvent(NamedTuple):
    seq: int
    timestamp: float
    state: str
    event: str
    lines: tuple[str, ...]


class JobHandle:
    """Service-side per-job bookkeeping (single writer: the worker thread)."""

    def __init__(self, job: Job, template, commands):
        self.job = job
        self.template = template
        self.commands = commands
        self.lock = threading.Lock()
        self.cancel_requested = threading.Event()
        self.done = threading.Event()
        self.runner: Optional[LocalRunner] = None
        self.subscribers: list[queue.SimpleQueue] = []
        self.record_id: Optional[str] = None


class StratusService:
    def __init__(self, config: Optional[ServiceConfig] = None):
        self.config = config or ServiceConfig()
        self.snapshot = self.config.load_snapshot()
        self.sim_params = self.config.load_params()
        self.governance = self.config.build_governance()
        self.registry = workflow.TemplateRegistry()
        self.records = RecordStore(self.config.record_dir)
        self.workdir_root = Path(self.config.workdir_root)
        self.workdir_root.mkdir(parents=True, exist_ok=True)
        self._handles: dict[str, JobHandle] = {}
        self._jobs_lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=self.config.worker_limit)

    # -- lifecycle ---------------------------------------------------------

    def close(self):
        self._pool.shutdown(wait=True)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- admission ---------------------------------------------------------

    def _require(self, principal: str, resource: str, action: Action, workspace: str):
        decision = self.governance.check_permission(principal, resource, action, workspace)
        if not decision.allowed:
            raise PermissionDenied(decision.reason)

    def _budget_for(self, workspace_id: str):
        ws = self.governance.workspaces.get(workspace_id)
        if ws is not None and ws.budgets:
            return self.governance.budget(ws.budgets[0])
        return self.governance.budget(self.config.default_budget)

    @staticmethod
    def _merge_requirements(base: Optional[ResourceRequirements],
                            override: ResourceRequirements) -> ResourceRequirements:
        if base is None:
            return override
        merged = {}
        for f in dataclasses.fields(ResourceRequirements):
            ov = getattr(override, f.name)
            default = 1 if f.name == "num_nodes" else None
            merged[f.name] = ov if ov != default else getattr(base, f.name)
        return ResourceRequirements(**merged)

    @staticmethod
    def _detect_np(run_command: str) -> Optional[int]:
        m = _NP_FLAG.search(run_command)
        return int(m.group(1)) if m else None

    def submit(self, req: RunRequest, principal: str):
        """Admit and queue a run; returns a job id (or a DryRunReport).

        Nothing is recorded and no budget moves unless every admission step
        passes; dry runs stop after planning and never touch the budget.
        """
        workspace = req.workspace or self.config.default_workspace
        self._require(principal, f"workspace:{workspace}", Action.RUN, workspace)

        if req.template_ref is not None:
            template = self.registry.get(req.template_ref.name, req.template_ref.version)
        else:
            template = self.registry.get_or_register_adhoc(
                req.run_command, req.setup_command)
        params = workflow.resolve_parameters(template, req.overrides)
        commands = workflow.render_commands(template, params)

        requirements = self._merge_requirements(
            template.default_requirements, req.requirements)
        selection = select_instance(requirements, self.snapshot)
        plan = plan_provisioning(requirements, self.snapshot, req.backend)

        np_ = self._detect_np(commands.run)
        mpi = build_mpi_envelope(np_, plan) if np_ is not None else None

        estimate = estimate_cost(plan.instance, self.config.default_wall_hours_cap,
                                 plan.num_nodes)
        if req.dry_run:
            return DryRunReport(
                instance_name=plan.instance.name,
                provider=plan.instance.provider,
                region=plan.instance.region,
                price_per_hour=plan.instance.price_per_hour,
                num_nodes=plan.num_nodes,
                total_slots=plan.total_slots,
                estimated_cost=estimate,
                rationale=selection.rationale,
                np=np_,
                grid=mpi.grid if mpi else None,
            )

        budget = self._budget_for(workspace)
        reservation = budget.reserve(estimate)

        job = Job(
            id=f"job-{uuid.uuid4().hex[:12]}",
            template_version=workflow.TemplateVersion(template.name, template.version),
            parameters=params,
            plan=plan,
            mpi=mpi,
            budget_reservation=reservation.id,
            workspace=workspace,
            principal=principal,
            cost_estimate=estimate,
        )
        handle = JobHandle(job, template, commands)
        with self._jobs_lock:
            self._handles[job.id] = handle
        self._pool.submit(self._run_job, handle)
        return job.id

    # -- execution ---------------------------------------------------------

    def _advance(self, handle: JobHandle, event: JobEvent, lines=()):
        with handle.lock:
            record = handle.job.apply(event, tuple(lines))
            seq = len(handle.job.events)
            status = StatusEvent(seq=seq, timestamp=record.timestamp,
                                 state=record.state.value, event=record.event.value,
                                 lines=record.lines)
            for sub in handle.subscribers:
                sub.put(status)

    def _check_cancel(self, handle: JobHandle):
        if handle.cancel_requested.is_set():
            raise _CancelSignal()

    def _run_job(self, handle: JobHandle):
        try:
            self._run_job_inner(handle)
        finally:
            # belt and braces: no caller may block forever on a wedged job
            handle.done.set()

    def _run_job_inner(self, handle: JobHandle):
        job = handle.job
        log_parts: list[str] = []
        wall_hours = 0.0
        outcome: Optional[ExecutionOutcome] = None
        try:
            self._check_cancel(handle)
            self._advance(handle, JobEvent.PROVISION_STARTED,
                          [f"plan: {job.plan.num_nodes}x {job.plan.instance.name} "
                           f"({job.plan.instance.provider}/{job.plan.instance.region}), "
                           f"{job.plan.total_slots} slots"])
            if job.plan.backend == Backend.SIMULATED:
                provisioned = sim_provision(job.plan, self.sim_params)
                provision_lines = [
                    f"provisioned {len(provisioned.nodes)} simulated nodes "
                    f"(virtual delay {provisioned.delay_seconds:.0f} s)"]
            else:
                handle.runner = LocalRunner(
                    self.workdir_root / job.id,
                    timeout_seconds=self.config.local_timeout_seconds,
                    env=handle.template.environment.env_vars)
                provision_lines = [f"local workdir {handle.runner.workdir}"]
            self._check_cancel(handle)
            self._advance(handle, JobEvent.NODES_READY, provision_lines)

            setup_lines = []
            if job.plan.backend == Backend.LOCAL and handle.commands.setup:
                elapsed, log = handle.runner.run_stage(handle.commands.setup, "setup")
                self._check_cancel(handle)
                wall_hours += elapsed / 3600.0
                log_parts.append(log)
                setup_lines = [f"setup finished in {elapsed:.3f} s"]
            elif handle.commands.setup:
                setup_lines = [f"setup (simulated): {handle.commands.setup}"]
            self._check_cancel(handle)
            self._advance(handle, JobEvent.SETUP_DONE, setup_lines)

            if job.plan.backend == Backend.LOCAL:
                elapsed, log = handle.runner.run_stage(handle.commands.run, "run")
                self._check_cancel(handle)
                wall_hours += elapsed / 3600.0
                log_parts.append(log)
                outcome = ExecutionOutcome(
                    wall_time_hours=max(wall_hours, 1e-9),
                    exit_status=ExitStatus.SUCCESS,
                    log_text="".join(log_parts),
                    output_refs=handle.runner.collect_outputs(),
                )
                run_lines = [f"run finished in {elapsed:.3f} s"]
            else:
                np_ = job.mpi.np if job.mpi else job.plan.total_slots
                sim = sim_execute(np_, job.plan.num_nodes, self.sim_params)
                log_parts.append(sim.log_text)
                outcome = ExecutionOutcome(
                    wall_time_hours=sim.wall_time_hours,
                    exit_status=ExitStatus.SUCCESS,
                    log_text="".join(log_parts),
                    output_refs=sim.output_refs,
                )
                run_lines = [f"simulated wall time {sim.wall_time_hours:.4f} h"]
            self._check_cancel(handle)
            self._advance(handle, JobEvent.RUN_COMPLETED, run_lines)

            self._settle(handle, outcome)
            self._advance(handle, JobEvent.OUTPUTS_STORED,
                          [f"{len(outcome.output_refs)} output artifacts"])
            self._store_record(handle, outcome)
        except _CancelSignal:
            outcome = ExecutionOutcome(
                wall_time_hours=wall_hours,
                exit_status=ExitStatus.FAILURE,
                log_text="".join(log_parts) + "cancelled by user\n",
                output_refs=(),
            )
            self._settle(handle, outcome)
            self._advance(handle, JobEvent.CANCEL_REQUESTED, ["cancelled by user"])
            self._store_record(handle, outcome)
        except Exception as exc:
            # anything raised mid-flight (structured or not) fails the job;
            # a job must never be left wedged in a non-terminal state
            with handle.lock:
                already_terminal = job.state in TERMINAL_STATES
            if already_terminal:
                handle.done.set()
                return
            log = getattr(exc, "log_text", "")
            if log:
                log_parts.append(log)
            outcome = ExecutionOutcome(
                wall_time_hours=wall_hours,
                exit_status=ExitStatus.FAILURE,
                log_text="".join(log_parts) + f"error: {exc}\n",
                output_refs=(),
            )
            self._settle(handle, outcome)
            self._advance(handle, JobEvent.ERROR_RAISED, [f"{type(exc).__name__}: {exc}"])
            self._store_record(handle, outcome)

    def _settle(self, handle: JobHandle, outcome: ExecutionOutcome):
        """Charge the budget before the terminal transition is published."""
        job = handle.job
        if job.budget_reservation is None or job.cost_settled is not None:
            return
        actual = estimate_cost(job.plan.instance, outcome.wall_time_hours,
                               job.plan.num_nodes)
        budget = self._budget_for(job.workspace)
        budget.settle(job.budget_reservation, actual)
        job.cost_settled = actual

    def _store_record(self, handle: JobHandle, outcome: ExecutionOutcome):
        try:
            resolver = None
            if handle.runner is not None:
                output_dir = handle.runner.output_dir

                def resolver(ref: str) -> Optional[bytes]:
                    try:
                        return (output_dir / ref).read_bytes()
                    except OSError:
                        return None

            record = self.records.record_run(handle.job, outcome,
                                             handle.template.environment, resolver)
            handle.record_id = record.record_id
        finally:
            handle.done.set()

    # -- queries and streams -----------------------------------------------

    def _handle(self, job_id: str) -> JobHandle:
        with self._jobs_lock:
            handle = self._handles.get(job_id)
        if handle is None:
            raise UnknownJob(f"no job {job_id}")
        return handle

    def get_job(self, job_id: str) -> Job:
        return self._handle(job_id).job

    def record_for(self, job_id: str) -> Optional[str]:
        return self._handle(job_id).record_id

    def list_jobs(self, workspace: Optional[str] = None) -> list[Job]:
        with self._jobs_lock:
            jobs = [h.job for h in self._handles.values()]
        if workspace is not None:
            jobs = [j for j in jobs if j.workspace == workspace]
        return sorted(jobs, key=lambda j: j.submitted_at)

    def cancel_job(self, job_id: str, principal: str) -> bool:
        """Request cancellation; returns False if the job was already terminal."""
        handle = self._handle(job_id)
        self._require(principal, f"workspace:{handle.job.workspace}", Action.RUN,
                      handle.job.workspace)
        with handle.lock:
            if handle.job.state in TERMINAL_STATES:
                return False
            handle.cancel_requested.set()
            if handle.runner is not None:
                handle.runner.cancel()
        return True

    def job_status_stream(self, job_id: str,
                          principal: Optional[str] = None) -> Iterator[StatusEvent]:
        """Replay the full event history, then tail live until terminal."""
        handle = self._handle(job_id)
        if principal is not None:
            self._require(principal, f"workspace:{handle.job.workspace}", Action.READ,
                          handle.job.workspace)
        sub: queue.SimpleQueue = queue.SimpleQueue()
        with handle.lock:
            history = list(handle.job.events)
            terminal = handle.job.state in TERMINAL_STATES
            if not terminal:
                handle.subscribers.append(sub)
        try:
            yield StatusEvent(seq=0, timestamp=handle.job.submitted_at,
                              state=JobState.QUEUED.value, event="Submitted", lines=())
            for i, rec in enumerate(history):
                yield StatusEvent(seq=i + 1, timestamp=rec.timestamp,
                                  state=rec.state.value, event=rec.event.value,
                                  lines=rec.lines)
            if terminal:
                return
            while True:
                status = sub.get()
                yield status
                if status.state in {s.value for s in TERMINAL_STATES}:
                    return
        finally:
            with handle.lock:
                if sub in handle.subscribers:
                    handle.subscribers.remove(sub)

    def wait_for(self, job_id: str) -> Job:
        """Block until the job is terminal and its record is persisted."""
        handle = self._handle(job_id)
        for _ in self.job_status_stream(job_id):
            pass
        handle.done.wait()
        return self.get_job(job_id)

    # -- reporting ---------------------------------------------------------

    def write_report(self, outdir, template_name: Optional[str] = None,
                     basename: str = "scaling") -> list[Path]:
        records = self.records.list_records(template_name)
        return report_from_records(records, outdir, label=template_name,
                                   basename=basename)
