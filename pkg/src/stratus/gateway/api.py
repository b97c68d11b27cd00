"""HTTP surface mirroring the CLI one-to-one.

Endpoints (all JSON unless noted):

    GET  /api/v1/health                     liveness probe
    GET  /api/v1/catalog                    catalog snapshot
    GET  /api/v1/templates                  list registered templates
    POST /api/v1/templates                  register a template
    GET  /api/v1/templates/{name}           latest version of a template
    GET  /api/v1/templates/{name}/{version} specific version
    POST /api/v1/jobs                       submit (or dry-run) a run request
    GET  /api/v1/jobs                       list jobs (?workspace=)
    GET  /api/v1/jobs/{job_id}              job detail with event log
    POST /api/v1/jobs/{job_id}/cancel       request cancellation
    GET  /api/v1/jobs/{job_id}/events       SSE stream: full history replay,
                                            then live tail until terminal
    GET  /api/v1/budgets                    all budgets
    GET  /api/v1/budgets/{budget_id}        one budget

The caller identity comes from the X-User header. Structured platform
errors map to HTTP statuses with a JSON body naming the error class.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .. import errors as E
from ..execution import Backend, Job
from ..workflow import (
    EnvironmentSpec,
    ParameterDecl,
    WorkflowTemplate,
)
from ..catalog import ResourceRequirements
from .cliparse import RunRequest, TemplateRef
from .service import DryRunReport, StratusService

_STATUS_BY_ERROR = (
    (E.PermissionDenied, 403),
    (E.UnknownJob, 404),
    (E.UnknownTemplate, 404),
    (E.UnknownRecord, 404),
    (E.UnknownResource, 404),
    (E.UnknownInstanceType, 404),
    (E.BudgetExhausted, 409),
    (E.NoFeasibleInstance, 409),
    (E.InfeasibleExplicitChoice, 409),
    (E.AmbiguousInstanceType, 409),
    (E.InsufficientSlots, 409),
    (E.StratusError, 400),
)


class RequirementsBody(BaseModel):
    min_gpus: Optional[int] = None
    min_memory_gib: Optional[float] = None
    min_vcpus: Optional[int] = None
    provider: Optional[str] = None
    instance_type: Optional[str] = None
    num_nodes: int = 1
    max_price_per_hour: Optional[float] = None


class SubmitBody(BaseModel):
    run_command: Optional[str] = None
    setup_command: Optional[str] = None
    template: Optional[str] = None
    template_version: Optional[int] = None
    overrides: dict[str, Any] = Field(default_factory=dict)
    requirements: RequirementsBody = Field(default_factory=RequirementsBody)
    backend: str = "simulated"
    workspace: str = "default"
    dry_run: bool = False


class ParameterBody(BaseModel):
    name: str
    kind: str
    default: Any
    description: str = ""


class EnvironmentBody(BaseModel):
    image_ref: Optional[str] = None
    env_vars: dict[str, str] = Field(default_factory=dict)
    required_tools: list[str] = Field(default_factory=list)


class TemplateBody(BaseModel):
    name: str
    run_command: str
    setup_command: Optional[str] = None
    parameters: list[ParameterBody] = Field(default_factory=list)
    environment: EnvironmentBody = Field(default_factory=EnvironmentBody)
    default_requirements: Optional[RequirementsBody] = None
    description: str = ""


def _job_dict(job: Job, record_id: Optional[str] = None) -> dict:
    doc = {
        "id": job.id,
        "state": job.state.value,
        "template": {"name": job.template_version.name,
                     "version": job.template_version.version},
        "parameters": dict(job.parameters.values),
        "workspace": job.workspace,
        "principal": job.principal,
        "submitted_at": job.submitted_at,
        "cost_estimate": job.cost_estimate,
        "cost_settled": job.cost_settled,
        "record_id": record_id,
        "plan": {
            "instance": job.plan.instance.name,
            "provider": job.plan.instance.provider,
            "region": job.plan.instance.region,
            "price_per_hour": job.plan.instance.price_per_hour,
            "num_nodes": job.plan.num_nodes,
            "total_slots": job.plan.total_slots,
            "backend": job.plan.backend.value,
        },
        "events": [
            {"seq": i + 1, "timestamp": rec.timestamp, "state": rec.state.value,
             "event": rec.event.value, "lines": list(rec.lines)}
            for i, rec in enumerate(job.events)
        ],
    }
    if job.mpi is not None:
        doc["mpi"] = {"np": job.mpi.np, "grid": list(job.mpi.grid),
                      "slots_per_node": list(job.mpi.slots_per_node)}
    return doc


def _template_dict(t: WorkflowTemplate) -> dict:
    return {
        "name": t.name,
        "version": t.version,
        "description": t.description,
        "run_command": t.run_command,
        "setup_command": t.setup_command,
        "parameters": [
            {"name": d.name, "kind": d.kind, "default": d.default,
             "description": d.description}
            for d in t.parameters.values()
        ],
        "environment": {
            "image_ref": t.environment.image_ref,
            "env_vars": dict(t.environment.env_vars),
            "required_tools": list(t.environment.required_tools),
        },
        "default_requirements": (
            None if t.default_requirements is None
            else dataclasses.asdict(t.default_requirements)),
    }


def create_app(service: StratusService,
               dashboard_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="stratus gateway", version="0.1.0")

    @app.exception_handler(E.StratusError)
    async def _platform_error(_request: Request, exc: E.StratusError):
        status = next(s for cls, s in _STATUS_BY_ERROR if isinstance(exc, cls))
        body = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, E.BudgetExhausted):
            body["headroom"] = exc.headroom
        if isinstance(exc, E.ValidationFailed):
            body["violations"] = exc.violations
        return JSONResponse(status_code=status, content=body)

    @app.get("/api/v1/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/v1/catalog")
    def catalog():
        snap = service.snapshot
        return {
            "snapshot_date": snap.snapshot_date.isoformat(),
            "source_label": snap.source_label,
            "entries": [
                {"provider": e.provider, "region": e.region, "name": e.name,
                 "vcpus": e.vcpus, "memory_gib": e.memory_gib, "gpus": e.gpus,
                 "gpu_model": e.gpu_model, "network_gbps": e.network_gbps,
                 "price_per_hour": e.price_per_hour,
                 "family_class": e.family_class.value}
                for e in snap.entries
            ],
        }

    @app.get("/api/v1/templates")
    def list_templates():
        return {"templates": [
            _template_dict(service.registry.get(name, version))
            for name, version in service.registry.list_versions()
        ]}

    @app.post("/api/v1/templates", status_code=201)
    def register_template(body: TemplateBody):
        t = WorkflowTemplate(
            name=body.name,
            version=1,
            run_command=body.run_command,
            setup_command=body.setup_command,
            parameters={p.name: ParameterDecl(p.name, p.kind, p.default, p.description)
                        for p in body.parameters},
            environment=EnvironmentSpec(
                image_ref=body.environment.image_ref,
                env_vars=body.environment.env_vars,
                required_tools=tuple(body.environment.required_tools)),
            description=body.description,
            default_requirements=(
                ResourceRequirements(**body.default_requirements.model_dump())
                if body.default_requirements is not None else None),
        )
        tv = service.registry.register_template(t)
        return {"name": tv.name, "version": tv.version}

    @app.get("/api/v1/templates/{name}")
    def get_template_latest(name: str):
        return _template_dict(service.registry.get(name))

    @app.get("/api/v1/templates/{name}/{version}")
    def get_template(name: str, version: int):
        return _template_dict(service.registry.get(name, version))

    @app.post("/api/v1/jobs", status_code=201)
    def submit(body: SubmitBody, x_user: str = Header(default="anonymous")):
        # same single-command-source rule the token grammar enforces
        if (body.run_command is None) == (body.template is None):
            raise E.ConflictingCommandSources(
                "exactly one of run_command or template is required")
        if body.template is not None and body.setup_command is not None:
            raise E.ConflictingCommandSources(
                "setup_command applies to raw commands, not templates")
        try:
            backend = Backend(body.backend)
        except ValueError:
            raise E.InvalidFlagValue(
                f"backend must be local or simulated, got {body.backend!r}") from None
        req = RunRequest(
            run_command=body.run_command,
            setup_command=body.setup_command,
            requirements=ResourceRequirements(**body.requirements.model_dump()),
            template_ref=(TemplateRef(body.template, body.template_version)
                          if body.template else None),
            overrides=body.overrides,
            backend=backend,
            workspace=body.workspace,
            dry_run=body.dry_run,
        )
        result = service.submit(req, principal=x_user)
        if isinstance(result, DryRunReport):
            return {"dry_run": result.as_dict()}
        return {"job_id": result}

    @app.get("/api/v1/jobs")
    def list_jobs(workspace: Optional[str] = None):
        return {"jobs": [
            _job_dict(job, service.record_for(job.id))
            for job in service.list_jobs(workspace)
        ]}

    @app.get("/api/v1/jobs/{job_id}")
    def get_job(job_id: str):
        return _job_dict(service.get_job(job_id), service.record_for(job_id))

    @app.post("/api/v1/jobs/{job_id}/cancel")
    def cancel(job_id: str, x_user: str = Header(default="anonymous")):
        return {"cancelled": service.cancel_job(job_id, principal=x_user)}

    @app.get("/api/v1/jobs/{job_id}/events")
    def events(job_id: str, x_user: str = Header(default="anonymous"),
               last_event_id: Optional[str] = Header(default=None)):
        # touch the job first so UnknownJob surfaces as a JSON 404,
        # not mid-stream
        service.get_job(job_id)
        skip_to = int(last_event_id) if last_event_id else -1

        def generate():
            for status in service.job_status_stream(job_id, principal=x_user):
                if status.seq <= skip_to:
                    continue
                payload = json.dumps({
                    "seq": status.seq, "timestamp": status.timestamp,
                    "state": status.state, "event": status.event,
                    "lines": list(status.lines),
                })
                yield f"id: {status.seq}\nevent: status\ndata: {payload}\n\n"
            yield "event: end\ndata: {}\n\n"

        return StreamingResponse(generate(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    @app.get("/api/v1/budgets")
    def budgets():
        out = {}
        for budget_id, budget in service.governance.budgets.items():
            out[budget_id] = _budget_dict(budget)
        return {"budgets": out}

    @app.get("/api/v1/budgets/{budget_id}")
    def get_budget(budget_id: str):
        return _budget_dict(service.governance.budget(budget_id))

    if dashboard_dir is not None and Path(dashboard_dir).is_dir():
        app.mount("/", StaticFiles(directory=dashboard_dir, html=True),
                  name="dashboard")

    return app


def _budget_dict(budget) -> dict:
    snap = budget.snapshot()
    return {
        "id": budget.id,
        "allocation": snap.allocation,
        "reserved": snap.reserved,
        "spent": snap.spent,
        "headroom": snap.headroom,
        "overage_flags": [
            {"reservation_id": f.reservation_id, "uncharged": f.uncharged}
            for f in budget.overage_flags
        ],
    }
