"""Append-only filesystem store for provenance records.

One JSON document per record, filename = record_id. Writes go through a
temp file in the same directory followed by an atomic rename, so concurrent
readers never observe a partial record. Records are immutable; storing the
same content twice is a no-op.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Callable, Optional

from ..backends.base import ExecutionOutcome
from ..errors import UnknownRecord
from ..execution import Job
from .records import ProvenanceRecord, build_record, record_from_document


class RecordStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, record_id: str) -> Path:
        return self.root / f"{record_id}.json"

    def save(self, record: ProvenanceRecord) -> ProvenanceRecord:
        path = self._path(record.record_id)
        if path.exists():
            return record  # content-addressed: same id, same content
        data = json.dumps(record.to_document(), sort_keys=True, indent=2)
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return record

    def record_run(self, job: Job, outcome: ExecutionOutcome, environment,
                   resolver: Optional[Callable[[str], Optional[bytes]]] = None
                   ) -> ProvenanceRecord:
        """Build and persist the record for a terminal job."""
        return self.save(build_record(job, outcome, environment, resolver))

    def get(self, record_id: str) -> ProvenanceRecord:
        path = self._path(record_id)
        if not path.exists():
            raise UnknownRecord(f"no record {record_id}")
        with open(path) as fh:
            return record_from_document(json.load(fh))

    def list_records(self, template_name: Optional[str] = None,
                     since: Optional[str] = None,
                     until: Optional[str] = None) -> list[ProvenanceRecord]:
        """Records filtered by template name and created_at range, oldest first."""
        out = []
        for path in self.root.glob("*.json"):
            if path.name.startswith(".tmp-"):
                continue
            with open(path) as fh:
                record = record_from_document(json.load(fh))
            if template_name is not None and record.template_version[0] != template_name:
                continue
            if since is not None and record.created_at < since:
                continue
            if until is not None and record.created_at > until:
                continue
            out.append(record)
        out.sort(key=lambda r: (r.created_at, r.record_id))
        return out
