"""Versioned workflow templates: commands, parameters, environments.

A template bundles a setup command, a run command with ``{{param}}``
placeholders, declared parameters with typed defaults, and a declarative
environment spec. The registry stores templates append-only with integer
versions assigned per name. Rendering substitutes the canonical textual form
of each resolved parameter; no placeholder may survive rendering.
"""

from __future__ import annotations

import hashlib
import io
import re
import threading
from dataclasses import dataclass, field
from typing import BinaryIO, Mapping, NamedTuple, Optional, Union

import yaml

from .catalog import ResourceRequirements
from .errors import (
    MissingParameter,
    TypeMismatch,
    UnknownParameter,
    UnknownTemplate,
    ValidationFailed,
)

PLACEHOLDER_RE = re.compile(r"\{\{([A-Za-z_][A-Za-z0-9_]*)\}\}")

_KINDS = ("number", "string", "boolean")


@dataclass(frozen=True)
class ParameterDecl:
    name: str
    kind: str  # one of number | string | boolean
    default: object
    description: str = ""


@dataclass(frozen=True)
class EnvironmentSpec:
    image_ref: Optional[str] = None
    env_vars: Mapping[str, str] = field(default_factory=dict)
    required_tools: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "env_vars", dict(self.env_vars))
        object.__setattr__(self, "required_tools", tuple(self.required_tools))


@dataclass(frozen=True)
class WorkflowTemplate:
    name: str
    version: int
    run_command: str
    setup_command: Optional[str] = None
    parameters: Mapping[str, ParameterDecl] = field(default_factory=dict)
    environment: EnvironmentSpec = field(default_factory=EnvironmentSpec)
    description: str = ""
    default_requirements: Optional[ResourceRequirements] = None

    def __post_init__(self):
        object.__setattr__(self, "parameters", dict(self.parameters))


@dataclass(frozen=True)
class ParameterSet:
    values: Mapping[str, object]

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))


class TemplateVersion(NamedTuple):
    name: str
    version: int


class ExecutablePlan(NamedTuple):
    setup: Optional[str]
    run: str


def _kind_ok(kind: str, value: object) -> bool:
    if kind == "number":
        # bool is an int subclass; a boolean is not a number here
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "string":
        return isinstance(value, str)
    if kind == "boolean":
        return isinstance(value, bool)
    return False


def validate_template(t: WorkflowTemplate) -> list[str]:
    """Return all invariant violations; empty list means the template is valid."""
    violations = []
    if not t.name:
        violations.append("name must be non-empty")
    if t.version < 1:
        violations.append("version must be >= 1")
    if not t.run_command or not t.run_command.strip():
        violations.append("run_command must be non-empty")
    if t.setup_command is not None and not t.setup_command.strip():
        violations.append("setup_command must be non-empty when present")

    for key, decl in t.parameters.items():
        if key != decl.name:
            violations.append(f"parameter key {key!r} does not match decl name {decl.name!r}")
        if decl.kind not in _KINDS:
            violations.append(f"parameter {decl.name}: unknown kind {decl.kind!r}")
        elif not _kind_ok(decl.kind, decl.default):
            violations.append(
                f"parameter {decl.name}: default {decl.default!r} does not conform to kind {decl.kind}")

    declared = set(t.parameters)
    for label, command in (("setup_command", t.setup_command), ("run_command", t.run_command)):
        if not command:
            continue
        for m in PLACEHOLDER_RE.finditer(command):
            if m.group(1) not in declared:
                violations.append(f"{label}: undeclared placeholder {m.group(1)}")

    for name in t.environment.env_vars:
        if not name:
            violations.append("environment: env_var names must be non-empty")
    return violations


def resolve_parameters(t: WorkflowTemplate, overrides: Mapping[str, object]) -> ParameterSet:
    """Merge declared defaults with overrides; overrides win."""
    values = {name: decl.default for name, decl in t.parameters.items()}
    for key, value in overrides.items():
        decl = t.parameters.get(key)
        if decl is None:
            raise UnknownParameter(
                f"template {t.name} v{t.version} declares no parameter {key!r}")
        if not _kind_ok(decl.kind, value):
            raise TypeMismatch(
                f"parameter {key}: {value!r} does not conform to kind {decl.kind}")
        values[key] = value
    return ParameterSet(values=values)


def canonical_text(value: object) -> str:
    """Shortest round-trippable text for a parameter value."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if value == int(value) and abs(value) < 1e16:
            return str(int(value))
        return repr(value)
    return str(value)


def render_commands(t: WorkflowTemplate, p: ParameterSet) -> ExecutablePlan:
    """Substitute every placeholder; a complete ParameterSet leaves none behind."""
    missing = set(t.parameters) - set(p.values)
    if missing:
        raise MissingParameter(
            f"parameter set missing {', '.join(sorted(missing))} for template {t.name}")

    def _sub(command: str) -> str:
        def repl(m):
            name = m.group(1)
            if name not in p.values:
                raise MissingParameter(f"no value for placeholder {name}")
            return canonical_text(p.values[name])
        return PLACEHOLDER_RE.sub(repl, command)

    setup = _sub(t.setup_command) if t.setup_command is not None else None
    return ExecutablePlan(setup=setup, run=_sub(t.run_command))


class TemplateRegistry:
    """Append-only template store with per-name version assignment."""

    def __init__(self):
        self._templates: dict[TemplateVersion, WorkflowTemplate] = {}
        self._lock = threading.Lock()

    def register_template(self, t: WorkflowTemplate) -> TemplateVersion:
        violations = validate_template(t)
        if violations:
            raise ValidationFailed(violations)
        # registration is serialized so version assignment is race-free
        with self._lock:
            current = max((v.version for v in self._templates if v.name == t.name), default=0)
            assigned = TemplateVersion(t.name, current + 1)
            stored = WorkflowTemplate(
                name=t.name,
                version=assigned.version,
                run_command=t.run_command,
                setup_command=t.setup_command,
                parameters=t.parameters,
                environment=t.environment,
                description=t.description,
                default_requirements=t.default_requirements,
            )
            self._templates[assigned] = stored
        return assigned

    def get(self, name: str, version: Optional[int] = None) -> WorkflowTemplate:
        with self._lock:
            if version is None:
                version = max((v.version for v in self._templates if v.name == name), default=0)
            t = self._templates.get(TemplateVersion(name, version))
        if t is None:
            raise UnknownTemplate(f"no template {name!r} version {version}")
        return t

    def exists(self, name: str, version: Optional[int] = None) -> bool:
        with self._lock:
            if version is None:
                return any(v.name == name for v in self._templates)
            return TemplateVersion(name, version) in self._templates

    def list_versions(self) -> list[TemplateVersion]:
        with self._lock:
            return sorted(self._templates)

    def get_or_register_adhoc(self, run_command: str,
                              setup_command: Optional[str] = None) -> WorkflowTemplate:
        """Wrap a raw command pair into a single-use template.

        The name derives from a digest of the commands, so byte-identical
        invocations map to the same (name, version) forever.
        """
        h = hashlib.sha256()
        h.update((setup_command or "").encode())
        h.update(b"\x00")
        h.update(run_command.encode())
        name = f"adhoc-{h.hexdigest()[:12]}"
        with self._lock:
            existing = self._templates.get(TemplateVersion(name, 1))
        if existing is not None:
            return existing
        t = WorkflowTemplate(name=name, version=1, run_command=run_command,
                             setup_command=setup_command,
                             description="ad-hoc command pair")
        tv = self.register_template(t)
        return self.get(*tv)


def load_template(source: Union[bytes, str, BinaryIO]) -> WorkflowTemplate:
    """Parse a template document (YAML) into a WorkflowTemplate."""
    if isinstance(source, bytes):
        stream: Union[io.BytesIO, BinaryIO, str] = io.BytesIO(source)
    else:
        stream = source
    doc = yaml.safe_load(stream)
    if not isinstance(doc, dict):
        raise ValidationFailed(["template document must be a mapping"])
    params = {}
    for raw in doc.get("parameters", []) or []:
        decl = ParameterDecl(
            name=str(raw["name"]),
            kind=str(raw["kind"]),
            default=raw["default"],
            description=str(raw.get("description", "")),
        )
        params[decl.name] = decl
    env_raw = doc.get("environment", {}) or {}
    environment = EnvironmentSpec(
        image_ref=env_raw.get("image_ref"),
        env_vars={str(k): str(v) for k, v in (env_raw.get("env_vars", {}) or {}).items()},
        required_tools=tuple(env_raw.get("required_tools", []) or []),
    )
    req_raw = doc.get("default_requirements")
    default_req = ResourceRequirements(**req_raw) if req_raw else None
    t = WorkflowTemplate(
        name=str(doc.get("name", "")),
        version=int(doc.get("version", 1)),
        run_command=str(doc.get("run_command", "")),
        setup_command=doc.get("setup_command"),
        parameters=params,
        environment=environment,
        description=str(doc.get("description", "")),
        default_requirements=default_req,
    )
    violations = validate_template(t)
    if violations:
        raise ValidationFailed(violations)
    return t
