"""Template validation, parameter resolution, rendering, and the registry."""

import pytest
from hypothesis import given, strategies as st

from stratus.errors import (
    MissingParameter,
    TypeMismatch,
    UnknownParameter,
    UnknownTemplate,
    ValidationFailed,
)
from stratus.workflow import (
    EnvironmentSpec,
    ParameterDecl,
    ParameterSet,
    TemplateRegistry,
    WorkflowTemplate,
    canonical_text,
    load_template,
    render_commands,
    resolve_parameters,
    validate_template,
)


def decl(name, kind="number", default=1):
    return ParameterDecl(name=name, kind=kind, default=default)


def template(run="./run.sh --np {{np}}", setup=None, params=None, **kw):
    if params is None:
        params = {"np": decl("np", default=8)}
    return WorkflowTemplate(name="ice-flow", version=1, run_command=run,
                            setup_command=setup, parameters=params, **kw)


class TestValidation:
    def test_valid_template_has_no_violations(self):
        assert validate_template(template()) == []

    def test_empty_run_command(self):
        t = template(run="  ", params={})
        assert any("run_command" in v for v in validate_template(t))

    def test_undeclared_placeholder(self):
        t = template(run="./run.sh {{resolution}}", params={})
        violations = validate_template(t)
        assert any("resolution" in v for v in violations)

    def test_setup_placeholders_checked_too(self):
        t = template(setup="./prep.sh {{mode}}", params={})
        assert any("setup_command" in v and "mode" in v
                   for v in validate_template(t))

    def test_default_must_match_kind(self):
        t = template(params={"np": decl("np", kind="number", default="eight")})
        assert any("conform" in v for v in validate_template(t))

    def test_bool_default_is_not_a_number(self):
        t = template(params={"np": decl("np", kind="number", default=True)})
        assert validate_template(t) != []

    def test_key_name_mismatch(self):
        t = template(params={"np": decl("ranks", default=8)},
                     run="./run.sh {{ranks}}")
        assert any("does not match" in v for v in validate_template(t))

    def test_unknown_kind(self):
        t = template(params={"np": decl("np", kind="vector", default=8)},
                     run="./run.sh")
        assert any("unknown kind" in v for v in validate_template(t))


class TestResolution:
    def test_defaults_apply(self):
        p = resolve_parameters(template(), {})
        assert p.values == {"np": 8}

    def test_override_wins(self):
        p = resolve_parameters(template(), {"np": 96})
        assert p.values == {"np": 96}

    def test_unknown_override(self):
        with pytest.raises(UnknownParameter):
            resolve_parameters(template(), {"resolution": 900})

    def test_type_mismatch(self):
        with pytest.raises(TypeMismatch):
            resolve_parameters(template(), {"np": "many"})

    def test_bool_rejected_for_number(self):
        with pytest.raises(TypeMismatch):
            resolve_parameters(template(), {"np": True})

    def test_float_accepted_for_number(self):
        t = template(params={"q": decl("q", default=1.0)}, run="./r {{q}}")
        assert resolve_parameters(t, {"q": 0.5}).values == {"q": 0.5}


class TestCanonicalText:
    def test_ints_verbatim(self):
        assert canonical_text(96) == "96"

    def test_whole_floats_collapse(self):
        assert canonical_text(96.0) == "96"

    def test_fractions_keep_shortest_repr(self):
        assert canonical_text(0.5) == "0.5"

    def test_bools_lowercase(self):
        assert canonical_text(True) == "true"
        assert canonical_text(False) == "false"

    def test_strings_pass_through(self):
        assert canonical_text("greenland-900m") == "greenland-900m"

    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_float_text_round_trips(self, x):
        assert float(canonical_text(x)) == x


class TestRendering:
    def test_substitutes_value(self):
        t = template()
        plan = render_commands(t, resolve_parameters(t, {"np": 96}))
        assert plan.run == "./run.sh --np 96"

    def test_setup_rendered_when_present(self):
        t = template(setup="./prep.sh {{np}}")
        plan = render_commands(t, resolve_parameters(t, {}))
        assert plan.setup == "./prep.sh 8"
        assert plan.run == "./run.sh --np 8"

    def test_no_setup_stays_none(self):
        plan = render_commands(template(), resolve_parameters(template(), {}))
        assert plan.setup is None

    def test_repeated_placeholder(self):
        t = template(run="echo {{np}} {{np}}")
        plan = render_commands(t, resolve_parameters(t, {"np": 4}))
        assert plan.run == "echo 4 4"

    def test_missing_parameter_rejected(self):
        with pytest.raises(MissingParameter):
            render_commands(template(), ParameterSet(values={}))

    def test_rendered_number_uses_canonical_text(self):
        t = template(params={"q": decl("q", default=0.5)}, run="./r -q {{q}}")
        plan = render_commands(t, resolve_parameters(t, {"q": 1.0}))
        assert plan.run == "./r -q 1"


class TestRegistry:
    def test_versions_assigned_sequentially(self):
        reg = TemplateRegistry()
        assert reg.register_template(template()).version == 1
        assert reg.register_template(template()).version == 2

    def test_caller_supplied_version_ignored(self):
        reg = TemplateRegistry()
        t = WorkflowTemplate(name="x", version=7, run_command="echo hi")
        assert reg.register_template(t) == ("x", 1)

    def test_old_versions_stay_retrievable(self):
        reg = TemplateRegistry()
        reg.register_template(template(run="echo v1"))
        reg.register_template(template(run="echo v2"))
        assert reg.get("ice-flow", 1).run_command == "echo v1"
        assert reg.get("ice-flow", 2).run_command == "echo v2"

    def test_get_without_version_returns_latest(self):
        reg = TemplateRegistry()
        reg.register_template(template(run="echo v1"))
        reg.register_template(template(run="echo v2"))
        assert reg.get("ice-flow").run_command == "echo v2"

    def test_unknown_template(self):
        with pytest.raises(UnknownTemplate):
            TemplateRegistry().get("missing")

    def test_invalid_template_rejected_with_violations(self):
        reg = TemplateRegistry()
        bad = template(run="./r {{undeclared}}", params={})
        with pytest.raises(ValidationFailed) as exc:
            reg.register_template(bad)
        assert exc.value.violations

    def test_concurrent_registration_yields_distinct_versions(self):
        import threading
        reg = TemplateRegistry()
        got = []
        def worker():
            got.append(reg.register_template(template()).version)
        threads = [threading.Thread(target=worker) for _ in range(16)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        assert sorted(got) == list(range(1, 17))

    def test_adhoc_idempotent(self):
        reg = TemplateRegistry()
        a = reg.get_or_register_adhoc("echo run", "echo setup")
        b = reg.get_or_register_adhoc("echo run", "echo setup")
        assert a is b
        assert a.name.startswith("adhoc-")
        assert a.version == 1

    def test_adhoc_distinguishes_setup_from_run(self):
        # the digest must keep ("a", "b") apart from ("ab", "")
        reg = TemplateRegistry()
        a = reg.get_or_register_adhoc("b", "a")
        b = reg.get_or_register_adhoc("ab", None)
        assert a.name != b.name


TEMPLATE_YAML = """\
name: pism-greenland
version: 1
description: glacier spin-up
setup_command: "./setup_pism.sh"
run_command: "./run_pism.sh --np {{np}} -q {{q}}"
parameters:
  - name: np
    kind: number
    default: 8
  - name: q
    kind: number
    default: 0.6
environment:
  env_vars:
    OMP_NUM_THREADS: "1"
  required_tools: [mpirun]
default_requirements:
  min_vcpus: 8
"""


class TestLoadTemplate:
    def test_round_trip(self):
        t = load_template(TEMPLATE_YAML.encode())
        assert t.name == "pism-greenland"
        assert t.parameters["q"].default == 0.6
        assert t.environment.env_vars == {"OMP_NUM_THREADS": "1"}
        assert t.default_requirements.min_vcpus == 8

    def test_loaded_template_renders(self):
        t = load_template(TEMPLATE_YAML.encode())
        plan = render_commands(t, resolve_parameters(t, {"np": 96, "q": 0.5}))
        assert plan.run == "./run_pism.sh --np 96 -q 0.5"

    def test_invalid_document_reports_all_violations(self):
        bad = TEMPLATE_YAML.replace('run_command: "./run_pism.sh --np {{np}} -q {{q}}"',
                                    'run_command: "{{labels}} {{more}}"')
        with pytest.raises(ValidationFailed) as exc:
            load_template(bad.encode())
        assert len(exc.value.violations) == 2
