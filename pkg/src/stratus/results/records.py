"""Content-addressed provenance records.

A record links a run's template version, environment, parameters and
resource configuration to its outcome. The record id is a digest over the
canonical serialization of everything except the creation timestamp, so
identical runs produce identical ids regardless of when or where the record
was written. A second digest over the configuration alone (outcome excluded)
lets repeated runs of the same setup be recognized even though their
measured times differ.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple, Optional

from ..backends.base import ExecutionOutcome
from ..execution import Job, TERMINAL_STATES
from ..errors import JobNotTerminal

PAYLOAD_KEYS = ("template_version", "environment", "parameters", "resources", "outcome")
CONFIG_KEYS = ("template_version", "environment", "parameters", "resources")


def canonical_json(obj) -> bytes:
    """Deterministic serialization: sorted keys, minimal separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True).encode()


def _digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj)).hexdigest()


@dataclass(frozen=True)
class ProvenanceRecord:
    record_id: str
    config_digest: str
    created_at: str  # ISO-8601, excluded from both digests
    payload: Mapping[str, object]

    def __post_init__(self):
        object.__setattr__(self, "payload", dict(self.payload))

    @property
    def template_version(self):
        tv = self.payload["template_version"]
        return (tv["name"], tv["version"])

    @property
    def environment(self):
        return self.payload["environment"]

    @property
    def parameters(self):
        return self.payload["parameters"]

    @property
    def resources(self):
        return self.payload["resources"]

    @property
    def outcome(self):
        return self.payload["outcome"]

    def to_document(self) -> dict:
        doc = {"record_id": self.record_id, "config_digest": self.config_digest,
               "created_at": self.created_at}
        doc.update(self.payload)
        return doc


def _serialize_plan(job: Job) -> dict:
    inst = job.plan.instance
    resources = {
        "instance": {
            "provider": inst.provider,
            "region": inst.region,
            "name": inst.name,
            "vcpus": inst.vcpus,
            "memory_gib": inst.memory_gib,
            "gpus": inst.gpus,
            "gpu_model": inst.gpu_model,
            "network_gbps": inst.network_gbps,
            "price_per_hour": inst.price_per_hour,
            "family_class": inst.family_class.value,
        },
        "num_nodes": job.plan.num_nodes,
        "total_slots": job.plan.total_slots,
        "backend": job.plan.backend.value,
    }
    if job.mpi is not None:
        resources["mpi"] = {
            "np": job.mpi.np,
            "grid": list(job.mpi.grid),
            "slots_per_node": list(job.mpi.slots_per_node),
            "rank_map": [list(pair) for pair in job.mpi.rank_map],
            "hostfile_text": job.mpi.hostfile_text,
            "metadata": dict(job.mpi.metadata),
        }
    return resources


def build_payload(job: Job, outcome: ExecutionOutcome, environment,
                  resolver: Optional[Callable[[str], Optional[bytes]]] = None) -> dict:
    outputs = []
    for ref in outcome.output_refs:
        content = resolver(ref) if resolver is not None else None
        digest = (hashlib.sha256(content).hexdigest() if content is not None
                  else hashlib.sha256(ref.encode()).hexdigest())
        outputs.append({"ref": ref, "digest": digest})
    return {
        "template_version": {"name": job.template_version.name,
                             "version": job.template_version.version},
        "environment": {
            "image_ref": environment.image_ref,
            "env_vars": dict(environment.env_vars),
            "required_tools": list(environment.required_tools),
        },
        "parameters": dict(job.parameters.values),
        "resources": _serialize_plan(job),
        "outcome": {
            "wall_time_hours": outcome.wall_time_hours,
            "status": outcome.exit_status.value,
            "final_state": job.state.value,
            "log_digest": hashlib.sha256(outcome.log_text.encode()).hexdigest(),
            "outputs": outputs,
        },
    }


def build_record(job: Job, outcome: ExecutionOutcome, environment,
                 resolver: Optional[Callable[[str], Optional[bytes]]] = None,
                 created_at: Optional[str] = None) -> ProvenanceRecord:
    """Assemble the immutable record for a terminal job."""
    if job.state not in TERMINAL_STATES:
        raise JobNotTerminal(f"job {job.id} is {job.state.value}, not terminal")
    payload = build_payload(job, outcome, environment, resolver)
    if created_at is None:
        created_at = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return ProvenanceRecord(
        record_id=_digest(payload),
        config_digest=_digest({k: payload[k] for k in CONFIG_KEYS}),
        created_at=created_at,
        payload=payload,
    )


def record_from_document(doc: Mapping) -> ProvenanceRecord:
    """Rebuild a record from its serialized document, verifying the digest."""
    payload = {k: doc[k] for k in PAYLOAD_KEYS}
    record = ProvenanceRecord(
        record_id=_digest(payload),
        config_digest=_digest({k: payload[k] for k in CONFIG_KEYS}),
        created_at=str(doc.get("created_at", "")),
        payload=payload,
    )
    stored_id = doc.get("record_id")
    if stored_id is not None and stored_id != record.record_id:
        raise ValueError(
            f"record digest mismatch: stored {stored_id}, computed {record.record_id}")
    return record


class FieldDiff(NamedTuple):
    path: str
    left: object
    right: object


def _walk(prefix: str, a, b, out: list[FieldDiff]):
    if isinstance(a, dict) and isinstance(b, dict):
        for key in sorted(set(a) | set(b)):
            sub = f"{prefix}.{key}" if prefix else key
            _walk(sub, a.get(key), b.get(key), out)
    elif isinstance(a, list) and isinstance(b, list) and len(a) == len(b):
        for i, (x, y) in enumerate(zip(a, b)):
            _walk(f"{prefix}[{i}]", x, y, out)
    else:
        if a != b:
            out.append(FieldDiff(prefix, a, b))


def compare_runs(a: ProvenanceRecord, b: ProvenanceRecord) -> list[FieldDiff]:
    """Every field path where the two records differ; empty iff same id."""
    out: list[FieldDiff] = []
    _walk("", dict(a.payload), dict(b.payload), out)
    return out
