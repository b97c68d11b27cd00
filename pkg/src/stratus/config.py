"""Service configuration: catalog path, simulator parameters, governance,
worker limits. A missing config file falls back to the bundled demo setup
(bundled catalog + calibrated simulator + a permissive single workspace)."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

import yaml

from .backends.simulator import SimParams, load_sim_params
from .catalog import CatalogSnapshot, load_catalog
from .governance import Governance, load_governance

DEFAULT_WORKSPACE = "default"
DEFAULT_BUDGET = "default"

_DEFAULT_GOVERNANCE = {
    "groups": [
        {"id": "everyone", "name": "all users", "members": ["*"]},
    ],
    "budgets": [
        {"id": DEFAULT_BUDGET, "allocation": 1000.0},
    ],
    "workspaces": [
        {
            "id": DEFAULT_WORKSPACE,
            "name": "default workspace",
            "member_groups": ["everyone"],
            "budgets": [DEFAULT_BUDGET],
            "resource_acl": [
                {"resource": f"workspace:{DEFAULT_WORKSPACE}", "group": "everyone",
                 "actions": ["run"]},
                {"resource": f"budget:{DEFAULT_BUDGET}", "group": "everyone",
                 "actions": ["read"]},
            ],
        },
    ],
}


@dataclass
class ServiceConfig:
    catalog_path: Optional[Path] = None      # None -> bundled snapshot
    sim_params_path: Optional[Path] = None   # None -> bundled calibration
    record_dir: Path = Path("records")
    workdir_root: Path = Path("work")
    worker_limit: int = 4
    default_wall_hours_cap: float = 1.0      # reservation estimate horizon
    local_timeout_seconds: float = 3600.0
    governance_doc: Mapping = field(default_factory=lambda: dict(_DEFAULT_GOVERNANCE))
    default_workspace: str = DEFAULT_WORKSPACE
    default_budget: str = DEFAULT_BUDGET

    def load_snapshot(self) -> CatalogSnapshot:
        if self.catalog_path is not None:
            with open(self.catalog_path, "rb") as fh:
                return load_catalog(fh)
        return bundled_catalog()

    def load_params(self) -> SimParams:
        if self.sim_params_path is not None:
            return load_sim_params(Path(self.sim_params_path))
        return bundled_sim_params()

    def build_governance(self) -> Governance:
        return load_governance(self.governance_doc)


def bundled_catalog() -> CatalogSnapshot:
    data = resources.files("stratus.data").joinpath("catalog.yaml").read_bytes()
    return load_catalog(data)


def bundled_sim_params() -> SimParams:
    data = resources.files("stratus.data").joinpath("simparams.yaml").read_bytes()
    return load_sim_params(data)


def load_config(path) -> ServiceConfig:
    with open(path, "rb") as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ValueError("config document must be a mapping")
    base = Path(path).resolve().parent

    def _resolve(key) -> Optional[Path]:
        value = doc.get(key)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else base / p

    cfg = ServiceConfig()
    cfg.catalog_path = _resolve("catalog_path")
    cfg.sim_params_path = _resolve("sim_params_path")
    cfg.record_dir = _resolve("record_dir") or cfg.record_dir
    cfg.workdir_root = _resolve("workdir_root") or cfg.workdir_root
    cfg.worker_limit = int(doc.get("worker_limit", cfg.worker_limit))
    cfg.default_wall_hours_cap = float(
        doc.get("default_wall_hours_cap", cfg.default_wall_hours_cap))
    cfg.local_timeout_seconds = float(
        doc.get("local_timeout_seconds", cfg.local_timeout_seconds))
    if "governance" in doc and doc["governance"]:
        cfg.governance_doc = doc["governance"]
    cfg.default_workspace = str(doc.get("default_workspace", cfg.default_workspace))
    cfg.default_budget = str(doc.get("default_budget", cfg.default_budget))
    return cfg
