"""The run-command token grammar.

    run [--setup "<cmd>"] "<run cmd>" [--gpu N] [--ram G] [--cloud P]
        [--num-nodes K] [--instance-type T] [--template NAME[@V]]
        [--param K=V]... [--backend local|simulated] [--workspace W]
        [--dry-run] [--wait] [--user U]

Exactly one command source: either a positional run command (optionally with
--setup) or a registered template reference. Unknown flags are rejected;
every failure raises a structured error, never a bare exception.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional, Sequence

import yaml

from ..catalog import ResourceRequirements
from ..errors import (
    ConflictingCommandSources,
    GatewayError,
    InvalidFlagValue,
    MissingFlagValue,
    UnknownFlag,
)
from ..execution import Backend
from ..workflow import canonical_text


class TemplateRef(NamedTuple):
    name: str
    version: Optional[int]


@dataclass(frozen=True)
class RunRequest:
    run_command: Optional[str] = None
    setup_command: Optional[str] = None
    requirements: ResourceRequirements = field(default_factory=ResourceRequirements)
    template_ref: Optional[TemplateRef] = None
    overrides: Mapping[str, object] = field(default_factory=dict)
    backend: Backend = Backend.SIMULATED
    workspace: str = "default"
    dry_run: bool = False

    def __post_init__(self):
        object.__setattr__(self, "overrides", dict(self.overrides))


class ParsedRun(NamedTuple):
    request: RunRequest
    wait: bool
    user: Optional[str]


_VALUE_FLAGS = {
    "--setup", "--gpu", "--ram", "--cloud", "--num-nodes", "--instance-type",
    "--template", "--param", "--backend", "--workspace", "--user",
}
_BARE_FLAGS = {"--dry-run", "--wait"}


def _int_value(flag: str, text: str, minimum: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise InvalidFlagValue(f"{flag} expects an integer, got {text!r}") from None
    if value < minimum:
        raise InvalidFlagValue(f"{flag} must be >= {minimum}, got {value}")
    return value


def _float_value(flag: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise InvalidFlagValue(f"{flag} expects a number, got {text!r}") from None
    if value <= 0:
        raise InvalidFlagValue(f"{flag} must be positive, got {value:g}")
    return value


def _parse_param(text: str) -> tuple[str, object]:
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise InvalidFlagValue(f"--param expects KEY=VALUE, got {text!r}")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    if value is None and raw.strip() not in ("null", "~", ""):
        value = raw
    return key, raw if isinstance(value, (dict, list)) else value


def parse_run_tokens(argv: Sequence[str]) -> ParsedRun:
    """Full parse, including the gateway-local --wait / --user extras."""
    tokens = list(argv)
    if not tokens or tokens[0] != "run":
        raise GatewayError("first token must be the run verb")
    i = 1
    setup_command = None
    run_command = None
    template_ref = None
    overrides: dict[str, object] = {}
    backend = Backend.SIMULATED
    workspace = "default"
    dry_run = False
    wait = False
    user = None
    req_fields: dict[str, object] = {}

    while i < len(tokens):
        tok = tokens[i]
        if tok in _BARE_FLAGS:
            if tok == "--dry-run":
                dry_run = True
            else:
                wait = True
            i += 1
            continue
        if tok in _VALUE_FLAGS:
            if i + 1 >= len(tokens):
                raise MissingFlagValue(f"{tok} requires a value")
            value = tokens[i + 1]
            i += 2
            if tok == "--setup":
                setup_command = value
            elif tok == "--gpu":
                req_fields["min_gpus"] = _int_value(tok, value, 0)
            elif tok == "--ram":
                req_fields["min_memory_gib"] = _float_value(tok, value)
            elif tok == "--cloud":
                req_fields["provider"] = value
            elif tok == "--num-nodes":
                req_fields["num_nodes"] = _int_value(tok, value, 1)
            elif tok == "--instance-type":
                req_fields["instance_type"] = value
            elif tok == "--template":
                name, sep, ver = value.partition("@")
                if not name:
                    raise InvalidFlagValue("--template expects NAME or NAME@VERSION")
                version = _int_value("--template version", ver, 1) if sep else None
                template_ref = TemplateRef(name, version)
            elif tok == "--param":
                key, parsed = _parse_param(value)
                overrides[key] = parsed
            elif tok == "--backend":
                try:
                    backend = Backend(value)
                except ValueError:
                    raise InvalidFlagValue(
                        f"--backend must be local or simulated, got {value!r}") from None
            elif tok == "--workspace":
                workspace = value
            elif tok == "--user":
                user = value
            continue
        if tok.startswith("--"):
            raise UnknownFlag(f"unknown flag {tok}")
        if run_command is not None:
            raise ConflictingCommandSources(
                f"second positional command {tok!r}; only one run command allowed")
        run_command = tok
        i += 1

    if run_command is not None and template_ref is not None:
        raise ConflictingCommandSources(
            "both a positional run command and --template were given")
    if run_command is None and template_ref is None:
        raise ConflictingCommandSources(
            "no command source: give a run command or --template")
    if template_ref is not None and setup_command is not None:
        raise ConflictingCommandSources(
            "--setup applies to positional commands, not templates")

    request = RunRequest(
        run_command=run_command,
        setup_command=setup_command,
        requirements=ResourceRequirements(**req_fields),
        template_ref=template_ref,
        overrides=overrides,
        backend=backend,
        workspace=workspace,
        dry_run=dry_run,
    )
    return ParsedRun(request=request, wait=wait, user=user)


def parse_run_command(argv: Sequence[str]) -> RunRequest:
    """Map run-verb tokens to a RunRequest; rejects anything off-grammar."""
    return parse_run_tokens(argv).request


def _render_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        text = canonical_text(value)
        # YAML only re-types exponent forms with a dotted mantissa
        # ("1e+300" stays a string, "1.0e+300" becomes a float)
        mantissa, e, exp = text.partition("e")
        if e and "." not in mantissa:
            return f"{mantissa}.0e{exp}"
        return text
    text = str(value)
    # quote strings YAML would re-type (e.g. "96", "true")
    needs_quoting = text == ""
    if not needs_quoting:
        try:
            needs_quoting = yaml.safe_load(text) != text
        except yaml.YAMLError:
            needs_quoting = True
    return json.dumps(text) if needs_quoting else text


def render_argv(req: RunRequest) -> list[str]:
    """Inverse of parse_run_command up to request equivalence."""
    argv = ["run"]
    if req.setup_command is not None:
        argv += ["--setup", req.setup_command]
    if req.run_command is not None:
        argv.append(req.run_command)
    if req.template_ref is not None:
        name, version = req.template_ref
        argv += ["--template", name if version is None else f"{name}@{version}"]
    r = req.requirements
    if r.min_gpus is not None:
        argv += ["--gpu", str(r.min_gpus)]
    if r.min_memory_gib is not None:
        argv += ["--ram", canonical_text(r.min_memory_gib)]
    if r.provider is not None:
        argv += ["--cloud", r.provider]
    if r.num_nodes != 1:
        argv += ["--num-nodes", str(r.num_nodes)]
    if r.instance_type is not None:
        argv += ["--instance-type", r.instance_type]
    for key, value in req.overrides.items():
        argv += ["--param", f"{key}={_render_value(value)}"]
    argv += ["--backend", req.backend.value]
    if req.workspace != "default":
        argv += ["--workspace", req.workspace]
    if req.dry_run:
        argv.append("--dry-run")
    return argv
