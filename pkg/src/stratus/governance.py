"""Workspaces, group permissions, and shared budgets with reservations.

Permissions follow an action ordering admin > write > run > read: holding a
higher action implies every lower one. Budgets enforce
spent + reserved <= allocation under arbitrary concurrency; each budget is
its own serialization point. The reserve-at-submit / settle-at-terminal
protocol keeps concurrent submissions from overspending a shared allocation.
"""

from __future__ import annotations

import enum
import threading
import uuid
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Optional

from .errors import BudgetExhausted, DoubleSettle, UnknownReservation, UnknownResource


class Action(str, enum.Enum):
    READ = "read"
    RUN = "run"
    WRITE = "write"
    ADMIN = "admin"


_ACTION_RANK = {Action.READ: 0, Action.RUN: 1, Action.WRITE: 2, Action.ADMIN: 3}


def action_implies(granted: Action, requested: Action) -> bool:
    return _ACTION_RANK[Action(granted)] >= _ACTION_RANK[Action(requested)]


@dataclass
class Group:
    id: str
    name: str = ""
    members: set[str] = field(default_factory=set)

    def contains(self, principal: str) -> bool:
        return "*" in self.members or principal in self.members


class AclEntry(NamedTuple):
    resource: str  # "kind:id", e.g. "template:ice-flow" or "workspace:default"
    group_id: str
    actions: frozenset[Action]


@dataclass
class Workspace:
    id: str
    name: str = ""
    member_groups: list[str] = field(default_factory=list)
    budgets: list[str] = field(default_factory=list)
    resource_acl: list[AclEntry] = field(default_factory=list)


class PermissionDecision(NamedTuple):
    allowed: bool
    reason: str


class OverageFlag(NamedTuple):
    reservation_id: str
    uncharged: float


class BudgetSnapshot(NamedTuple):
    allocation: float
    reserved: float
    spent: float
    headroom: float


class Reservation(NamedTuple):
    id: str
    budget_id: str
    estimate: float


class Budget:
    """Mutable budget state behind a single lock."""

    def __init__(self, id: str, allocation: float):
        if allocation < 0:
            raise ValueError("allocation must be >= 0")
        self.id = id
        self.allocation = float(allocation)
        self.reserved = 0.0
        self.spent = 0.0
        self.overage_flags: list[OverageFlag] = []
        self._open: dict[str, float] = {}
        self._settled: set[str] = set()
        self._lock = threading.Lock()

    def snapshot(self) -> BudgetSnapshot:
        with self._lock:
            return BudgetSnapshot(
                allocation=self.allocation,
                reserved=self.reserved,
                spent=self.spent,
                headroom=self.allocation - self.spent - self.reserved,
            )

    def reserve(self, estimate: float) -> Reservation:
        """Admit a reservation or reject it; atomic against this budget."""
        if estimate < 0:
            raise ValueError("estimate must be >= 0")
        with self._lock:
            headroom = self.allocation - self.spent - self.reserved
            if self.spent + self.reserved + estimate > self.allocation:
                raise BudgetExhausted(
                    f"budget {self.id}: estimate {estimate:g} exceeds headroom {headroom:g}",
                    headroom=headroom)
            self.reserved += estimate
            res_id = f"{self.id}-{uuid.uuid4().hex[:12]}"
            self._open[res_id] = estimate
            return Reservation(id=res_id, budget_id=self.id, estimate=estimate)

    def settle(self, reservation_id: str, actual: float) -> BudgetSnapshot:
        """Release the reservation and charge the actual cost.

        Undershoot returns headroom; overshoot is charged only as far as
        headroom allows, capping spent at the allocation and recording an
        OverageFlag for the uncharged remainder.
        """
        if actual < 0:
            raise ValueError("actual must be >= 0")
        with self._lock:
            if reservation_id in self._settled:
                raise DoubleSettle(f"reservation {reservation_id} already settled")
            estimate = self._open.pop(reservation_id, None)
            if estimate is None:
                raise UnknownReservation(f"no open reservation {reservation_id}")
            self.reserved -= estimate
            charge = min(actual, estimate)
            if actual > estimate:
                available = self.allocation - self.spent - charge - self.reserved
                extra = min(actual - estimate, max(0.0, available))
                charge += extra
                uncharged = actual - estimate - extra
                if uncharged > 0:
                    self.overage_flags.append(
                        OverageFlag(reservation_id=reservation_id, uncharged=uncharged))
            self.spent += charge
            self._settled.add(reservation_id)
            return BudgetSnapshot(
                allocation=self.allocation, reserved=self.reserved,
                spent=self.spent,
                headroom=self.allocation - self.spent - self.reserved)


class Governance:
    """Directory of groups, workspaces and budgets for one deployment."""

    def __init__(self):
        self.groups: dict[str, Group] = {}
        self.workspaces: dict[str, Workspace] = {}
        self.budgets: dict[str, Budget] = {}

    def add_group(self, group: Group) -> Group:
        self.groups[group.id] = group
        return group

    def add_workspace(self, workspace: Workspace) -> Workspace:
        for entry in workspace.resource_acl:
            if entry.group_id not in self.groups:
                raise ValueError(
                    f"acl references unknown group {entry.group_id!r}")
        self.workspaces[workspace.id] = workspace
        return workspace

    def add_budget(self, budget: Budget) -> Budget:
        self.budgets[budget.id] = budget
        return budget

    def budget(self, budget_id: str) -> Budget:
        try:
            return self.budgets[budget_id]
        except KeyError:
            raise UnknownResource(f"no budget {budget_id!r}") from None

    def check_permission(self, principal: str, resource: str, action: Action,
                         workspace: str = "default") -> PermissionDecision:
        """Allow iff some group containing the principal holds the action
        (or a superset of it) on the resource."""
        ws = self.workspaces.get(workspace)
        if ws is None:
            raise UnknownResource(f"no workspace {workspace!r}")
        entries = [e for e in ws.resource_acl if e.resource == resource]
        if not entries:
            raise UnknownResource(
                f"resource {resource!r} is not governed in workspace {workspace!r}")
        requested = Action(action)
        for entry in entries:
            group = self.groups.get(entry.group_id)
            if group is None or not group.contains(principal):
                continue
            for granted in entry.actions:
                if action_implies(granted, requested):
                    return PermissionDecision(
                        True,
                        f"group {group.id} holds {granted.value} on {resource}")
        return PermissionDecision(
            False,
            f"no group containing {principal!r} holds {requested.value} on {resource}")


def load_governance(doc: Mapping) -> Governance:
    """Build a Governance directory from a declarative mapping."""
    gov = Governance()
    for raw in doc.get("groups", []) or []:
        gov.add_group(Group(id=str(raw["id"]), name=str(raw.get("name", "")),
                            members=set(raw.get("members", []) or [])))
    for raw in doc.get("budgets", []) or []:
        gov.add_budget(Budget(id=str(raw["id"]),
                              allocation=float(raw["allocation"])))
    for raw in doc.get("workspaces", []) or []:
        acl = []
        for entry in raw.get("resource_acl", []) or []:
            acl.append(AclEntry(
                resource=str(entry["resource"]),
                group_id=str(entry["group"]),
                actions=frozenset(Action(a) for a in entry["actions"]),
            ))
        gov.add_workspace(Workspace(
            id=str(raw["id"]), name=str(raw.get("name", "")),
            member_groups=[str(g) for g in raw.get("member_groups", []) or []],
            budgets=[str(b) for b in raw.get("budgets", []) or []],
            resource_acl=acl,
        ))
    return gov
