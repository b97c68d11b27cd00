"""Thin HTTP client for a remote gateway (CLI remote mode, tests)."""

from __future__ import annotations

import dataclasses
import json
from typing import Iterator, Optional

import httpx

from ..errors import StratusError, UnknownJob
from .cliparse import RunRequest


class RemoteError(StratusError):
    """Server-side structured error relayed to the client."""

    def __init__(self, error: str, message: str, status_code: int):
        self.error = error
        self.status_code = status_code
        super().__init__(f"{error}: {message}")


def _raise_for_error(resp: httpx.Response):
    if resp.status_code < 400:
        return
    try:
        body = resp.json()
    except ValueError:
        resp.raise_for_status()
        return
    raise RemoteError(body.get("error", "HTTPError"),
                      body.get("message", resp.text), resp.status_code)


def template_body(t) -> dict:
    """API registration body for a loaded template document."""
    body = {
        "name": t.name,
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
        "description": t.description,
    }
    if t.default_requirements is not None:
        body["default_requirements"] = dataclasses.asdict(t.default_requirements)
    return body


def request_body(req: RunRequest) -> dict:
    r = req.requirements
    body = {
        "run_command": req.run_command,
        "setup_command": req.setup_command,
        "overrides": dict(req.overrides),
        "requirements": {
            "min_gpus": r.min_gpus,
            "min_memory_gib": r.min_memory_gib,
            "min_vcpus": r.min_vcpus,
            "provider": r.provider,
            "instance_type": r.instance_type,
            "num_nodes": r.num_nodes,
            "max_price_per_hour": r.max_price_per_hour,
        },
        "backend": req.backend.value,
        "workspace": req.workspace,
        "dry_run": req.dry_run,
    }
    if req.template_ref is not None:
        body["template"] = req.template_ref.name
        body["template_version"] = req.template_ref.version
    return body


class HttpGateway:
    def __init__(self, base_url: str, user: str = "anonymous",
                 timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.user = user
        self._client = httpx.Client(base_url=self.base_url, timeout=timeout,
                                    headers={"X-User": user})

    def close(self):
        self._client.close()

    def _get(self, path: str, **kwargs) -> dict:
        resp = self._client.get(path, **kwargs)
        _raise_for_error(resp)
        return resp.json()

    def _post(self, path: str, body: dict) -> dict:
        resp = self._client.post(path, json=body)
        _raise_for_error(resp)
        return resp.json()

    def submit(self, req: RunRequest) -> dict:
        return self._post("/api/v1/jobs", request_body(req))

    def list_jobs(self, workspace: Optional[str] = None) -> list[dict]:
        params = {"workspace": workspace} if workspace else None
        return self._get("/api/v1/jobs", params=params)["jobs"]

    def get_job(self, job_id: str) -> dict:
        return self._get(f"/api/v1/jobs/{job_id}")

    def cancel(self, job_id: str) -> bool:
        return self._post(f"/api/v1/jobs/{job_id}/cancel", {})["cancelled"]

    def catalog(self) -> dict:
        return self._get("/api/v1/catalog")

    def budget(self, budget_id: str) -> dict:
        return self._get(f"/api/v1/budgets/{budget_id}")

    def budgets(self) -> dict:
        return self._get("/api/v1/budgets")["budgets"]

    def templates(self) -> list[dict]:
        return self._get("/api/v1/templates")["templates"]

    def template(self, name: str, version: Optional[int] = None) -> dict:
        path = (f"/api/v1/templates/{name}" if version is None
                else f"/api/v1/templates/{name}/{version}")
        return self._get(path)

    def register_template(self, body: dict) -> dict:
        return self._post("/api/v1/templates", body)

    def stream_events(self, job_id: str,
                      last_event_id: Optional[int] = None) -> Iterator[dict]:
        """Yield decoded status events; returns when the stream ends."""
        headers = {}
        if last_event_id is not None:
            headers["Last-Event-ID"] = str(last_event_id)
        with self._client.stream("GET", f"/api/v1/jobs/{job_id}/events",
                                 headers=headers, timeout=None) as resp:
            if resp.status_code == 404:
                raise UnknownJob(f"no job {job_id}")
            event_type = "message"
            data_lines: list[str] = []
            for line in resp.iter_lines():
                if line == "":
                    if data_lines:
                        if event_type == "status":
                            yield json.loads("\n".join(data_lines))
                        elif event_type == "end":
                            return
                    event_type = "message"
                    data_lines = []
                elif line.startswith("event:"):
                    event_type = line.split(":", 1)[1].strip()
                elif line.startswith("data:"):
                    data_lines.append(line.split(":", 1)[1].strip())
