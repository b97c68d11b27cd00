"""Multi-provider instance catalog: loading, capability filtering, selection, cost.

A catalog snapshot is an immutable, canonically ordered list of purchasable
machine configurations across providers. Selection picks the cheapest entry
satisfying a set of capability requirements (GPU count, memory, vCPUs, price
cap, provider pin), or validates an explicitly named instance type against
those same requirements. Cost is prorated per second: price * hours * nodes
with no hourly ceiling.
"""

from __future__ import annotations

import datetime as _dt
import enum
import io
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Optional, Union

import yaml

from .errors import (
    AmbiguousInstanceType,
    DuplicateEntry,
    InfeasibleExplicitChoice,
    MalformedCatalog,
    NoFeasibleInstance,
    UnknownInstanceType,
)


class FamilyClass(str, enum.Enum):
    COMPUTE = "compute"
    GENERAL = "general"
    MEMORY = "memory"
    HPC = "hpc"
    ACCELERATED = "accelerated"


@dataclass(frozen=True)
class InstanceType:
    provider: str
    region: str
    name: str
    vcpus: int
    memory_gib: float
    gpus: int
    network_gbps: float
    price_per_hour: float
    family_class: FamilyClass
    gpu_model: Optional[str] = None

    def __post_init__(self):
        if not self.provider or not self.region or not self.name:
            raise MalformedCatalog("provider, region and name must be non-empty")
        if self.vcpus < 1:
            raise MalformedCatalog(f"{self._key()}: vcpus must be >= 1")
        if self.memory_gib <= 0:
            raise MalformedCatalog(f"{self._key()}: memory_gib must be > 0")
        if self.gpus < 0:
            raise MalformedCatalog(f"{self._key()}: gpus must be >= 0")
        if self.network_gbps <= 0:
            raise MalformedCatalog(f"{self._key()}: network_gbps must be > 0")
        # a zero rate would dominate every price comparison; rate cards don't
        # list free machines
        if self.price_per_hour <= 0:
            raise MalformedCatalog(f"{self._key()}: price_per_hour must be > 0")
        if self.gpus > 0 and not self.gpu_model:
            raise MalformedCatalog(f"{self._key()}: gpus > 0 requires gpu_model")

    def _key(self):
        return f"{self.provider}/{self.region}/{self.name}"


@dataclass(frozen=True)
class ResourceRequirements:
    min_gpus: Optional[int] = None
    min_memory_gib: Optional[float] = None
    min_vcpus: Optional[int] = None
    provider: Optional[str] = None
    instance_type: Optional[str] = None
    num_nodes: int = 1
    max_price_per_hour: Optional[float] = None

    def __post_init__(self):
        if self.num_nodes < 1:
            raise MalformedCatalog("num_nodes must be >= 1")
        for name in ("min_gpus", "min_vcpus"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise MalformedCatalog(f"{name} must be >= 0")
        if self.min_memory_gib is not None and self.min_memory_gib <= 0:
            raise MalformedCatalog("min_memory_gib must be > 0")


@dataclass(frozen=True)
class CatalogSnapshot:
    entries: tuple[InstanceType, ...]
    snapshot_date: _dt.date
    source_label: str = ""

    def __post_init__(self):
        # canonical order makes iteration deterministic for every consumer
        object.__setattr__(
            self,
            "entries",
            tuple(sorted(self.entries, key=lambda e: (e.provider, e.region, e.name))),
        )
        seen = set()
        for e in self.entries:
            key = (e.provider, e.region, e.name)
            if key in seen:
                raise DuplicateEntry(f"duplicate catalog entry {e._key()}")
            seen.add(key)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass(frozen=True)
class SelectionResult:
    instance: InstanceType
    rationale: str


_REQUIRED_FIELDS = (
    "provider", "region", "name", "vcpus", "memory_gib", "gpus",
    "network_gbps", "price_per_hour", "family_class",
)


def load_catalog(source: Union[bytes, str, BinaryIO]) -> CatalogSnapshot:
    """Parse a catalog document (YAML) into a validated snapshot."""
    if isinstance(source, bytes):
        stream: Union[io.BytesIO, BinaryIO, str] = io.BytesIO(source)
    else:
        stream = source
    try:
        doc = yaml.safe_load(stream)
    except yaml.YAMLError as exc:
        raise MalformedCatalog(f"catalog does not parse: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedCatalog("catalog document must be a mapping")
    try:
        snapshot_date = _parse_date(doc["snapshot_date"])
    except KeyError:
        raise MalformedCatalog("missing top-level key snapshot_date") from None
    source_label = str(doc.get("source_label", ""))
    raw_entries = doc.get("entries", [])
    if raw_entries is None:
        raw_entries = []
    if not isinstance(raw_entries, list):
        raise MalformedCatalog("entries must be a list")

    entries = []
    for i, raw in enumerate(raw_entries):
        if not isinstance(raw, dict):
            raise MalformedCatalog(f"entry {i}: expected a mapping")
        missing = [f for f in _REQUIRED_FIELDS if f not in raw]
        if missing:
            raise MalformedCatalog(f"entry {i}: missing fields {', '.join(missing)}")
        unknown = set(raw) - set(_REQUIRED_FIELDS) - {"gpu_model"}
        if unknown:
            raise MalformedCatalog(f"entry {i}: unknown fields {', '.join(sorted(unknown))}")
        try:
            family = FamilyClass(raw["family_class"])
        except ValueError:
            raise MalformedCatalog(
                f"entry {i}: family_class must be one of "
                + ", ".join(f.value for f in FamilyClass)
            ) from None
        try:
            entries.append(
                InstanceType(
                    provider=str(raw["provider"]),
                    region=str(raw["region"]),
                    name=str(raw["name"]),
                    vcpus=int(raw["vcpus"]),
                    memory_gib=float(raw["memory_gib"]),
                    gpus=int(raw["gpus"]),
                    gpu_model=raw.get("gpu_model"),
                    network_gbps=float(raw["network_gbps"]),
                    price_per_hour=float(raw["price_per_hour"]),
                    family_class=family,
                )
            )
        except MalformedCatalog as exc:
            raise MalformedCatalog(f"entry {i}: {exc}") from None
        except (TypeError, ValueError) as exc:
            raise MalformedCatalog(f"entry {i}: {exc}") from None
    return CatalogSnapshot(entries=tuple(entries), snapshot_date=snapshot_date,
                           source_label=source_label)


def _parse_date(value) -> _dt.date:
    if isinstance(value, _dt.date):
        return value
    try:
        return _dt.date.fromisoformat(str(value))
    except ValueError as exc:
        raise MalformedCatalog(f"snapshot_date not an ISO date: {value!r}") from exc


def filter_feasible(req: ResourceRequirements,
                    snapshot: CatalogSnapshot) -> tuple[InstanceType, ...]:
    """Entries satisfying every set constraint, in snapshot order."""
    out = []
    for e in snapshot.entries:
        if req.min_gpus is not None and e.gpus < req.min_gpus:
            continue
        if req.min_memory_gib is not None and e.memory_gib < req.min_memory_gib:
            continue
        if req.min_vcpus is not None and e.vcpus < req.min_vcpus:
            continue
        if req.provider is not None and e.provider != req.provider:
            continue
        if req.max_price_per_hour is not None and e.price_per_hour > req.max_price_per_hour:
            continue
        out.append(e)
    return tuple(out)


def _constraint_names(req: ResourceRequirements) -> list[str]:
    names = []
    if req.min_gpus is not None:
        names.append(f"min_gpus={req.min_gpus}")
    if req.min_memory_gib is not None:
        names.append(f"min_memory_gib={req.min_memory_gib:g}")
    if req.min_vcpus is not None:
        names.append(f"min_vcpus={req.min_vcpus}")
    if req.provider is not None:
        names.append(f"provider={req.provider}")
    if req.max_price_per_hour is not None:
        names.append(f"max_price_per_hour={req.max_price_per_hour:g}")
    return names


def select_instance(req: ResourceRequirements,
                    snapshot: CatalogSnapshot) -> SelectionResult:
    """Pick the instance for a request.

    Explicit ``instance_type`` wins and is validated against the remaining
    capability constraints. Otherwise the cheapest feasible entry is chosen;
    price ties break by fewest vcpus, then by (provider, region, name).
    """
    if len(snapshot) == 0:
        raise NoFeasibleInstance("catalog snapshot is empty")

    if req.instance_type is not None:
        candidates = [e for e in snapshot.entries if e.name == req.instance_type]
        if req.provider is not None:
            candidates = [e for e in candidates if e.provider == req.provider]
        if not candidates:
            where = f" on provider {req.provider}" if req.provider else ""
            raise UnknownInstanceType(
                f"instance type {req.instance_type!r} not in snapshot{where}")
        providers = {e.provider for e in candidates}
        if len(providers) > 1:
            raise AmbiguousInstanceType(
                f"instance type {req.instance_type!r} offered by "
                f"{', '.join(sorted(providers))}; pin a provider")
        chosen = candidates[0]  # canonical snapshot order fixes the region
        violated = []
        if req.min_gpus is not None and chosen.gpus < req.min_gpus:
            violated.append(f"min_gpus={req.min_gpus} (has {chosen.gpus})")
        if req.min_memory_gib is not None and chosen.memory_gib < req.min_memory_gib:
            violated.append(f"min_memory_gib={req.min_memory_gib:g} (has {chosen.memory_gib:g})")
        if req.min_vcpus is not None and chosen.vcpus < req.min_vcpus:
            violated.append(f"min_vcpus={req.min_vcpus} (has {chosen.vcpus})")
        if req.max_price_per_hour is not None and chosen.price_per_hour > req.max_price_per_hour:
            violated.append(
                f"max_price_per_hour={req.max_price_per_hour:g} (costs {chosen.price_per_hour:g})")
        if violated:
            raise InfeasibleExplicitChoice(
                f"{chosen._key()} violates " + "; ".join(violated))
        return SelectionResult(
            instance=chosen,
            rationale=f"explicit instance type {chosen.name} on {chosen.provider}/{chosen.region}",
        )

    feasible = filter_feasible(req, snapshot)
    if not feasible:
        raise NoFeasibleInstance(
            "no catalog entry satisfies " + (", ".join(_constraint_names(req)) or "request"))
    chosen = min(feasible, key=lambda e: (e.price_per_hour, e.vcpus,
                                          e.provider, e.region, e.name))
    constraints = _constraint_names(req)
    rationale = (
        f"cheapest of {len(feasible)} feasible entries at "
        f"{chosen.price_per_hour:g}/h"
        + (f" (constraints: {', '.join(constraints)})" if constraints else " (unconstrained)")
    )
    return SelectionResult(instance=chosen, rationale=rationale)


def estimate_cost(instance: InstanceType, wall_hours: float, node_count: int) -> float:
    """On-demand cost of a run: price * hours * nodes, prorated per second."""
    if wall_hours < 0:
        raise ValueError("wall_hours must be >= 0")
    if node_count < 1:
        raise ValueError("node_count must be >= 1")
    return instance.price_per_hour * wall_hours * node_count
