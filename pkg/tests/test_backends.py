"""Local subprocess runner and the deterministic simulator."""

import math
import os
import threading
import time

import numpy
import pytest
from hypothesis import given, settings, strategies as st

import scaling_reference as ref
from stratus.backends.base import ExecutionOutcome, ExitStatus
from stratus.backends.local import LocalRunner, local_execute
from stratus.backends.simulator import (
    BASE_RANKS,
    SimParams,
    calibrate_model,
    load_sim_params,
    model_wall_hours,
    sim_execute,
    sim_provision,
    simulate_repetitions,
    with_jitter,
)
from stratus.catalog import FamilyClass, InstanceType
from stratus.errors import (
    CommandTimeout,
    RunFailed,
    SetupFailed,
    SimulatedStockout,
    Underdetermined,
)
from stratus.execution import Backend, ProvisioningPlan
from stratus.workflow import ExecutablePlan


class TestLocalRunner:
    def test_happy_pair_with_outputs(self, tmp_path):
        out = local_execute(
            ExecutablePlan(setup="echo prep > state.txt",
                           run="cat state.txt && cp state.txt $STRATUS_OUTPUT_DIR/"),
            tmp_path / "job")
        assert out.exit_status == ExitStatus.SUCCESS
        assert out.output_refs == ("state.txt",)
        assert "prep" in out.log_text
        assert out.wall_time_hours > 0

    def test_no_setup_is_fine(self, tmp_path):
        out = local_execute(ExecutablePlan(setup=None, run="true"), tmp_path / "j")
        assert out.exit_status == ExitStatus.SUCCESS
        assert out.output_refs == ()

    def test_setup_failure_is_distinguished(self, tmp_path):
        with pytest.raises(SetupFailed) as exc:
            local_execute(ExecutablePlan(setup="echo oops >&2; exit 3", run="true"),
                          tmp_path / "j")
        assert exc.value.status == 3
        assert "oops" in exc.value.log_text

    def test_run_failure_carries_status_and_log(self, tmp_path):
        with pytest.raises(RunFailed) as exc:
            local_execute(ExecutablePlan(setup=None, run="echo bad; exit 7"),
                          tmp_path / "j")
        assert exc.value.status == 7
        assert "bad" in exc.value.log_text

    def test_timeout(self, tmp_path):
        with pytest.raises(CommandTimeout):
            local_execute(ExecutablePlan(setup=None, run="sleep 5"),
                          tmp_path / "j", timeout_seconds=0.2)

    def test_stderr_folded_into_log(self, tmp_path):
        out = local_execute(ExecutablePlan(setup=None, run="echo warn >&2"),
                            tmp_path / "j")
        assert "warn" in out.log_text

    def test_template_env_reaches_the_process(self, tmp_path):
        out = local_execute(
            ExecutablePlan(setup=None, run='echo "omp=$OMP_NUM_THREADS"'),
            tmp_path / "j", env={"OMP_NUM_THREADS": "1"})
        assert "omp=1" in out.log_text

    def test_outputs_sorted_and_relative(self, tmp_path):
        out = local_execute(
            ExecutablePlan(setup=None,
                           run="mkdir -p $STRATUS_OUTPUT_DIR/sub && "
                               "touch $STRATUS_OUTPUT_DIR/b.nc "
                               "$STRATUS_OUTPUT_DIR/a.nc "
                               "$STRATUS_OUTPUT_DIR/sub/c.nc"),
            tmp_path / "j")
        assert out.output_refs == ("a.nc", "b.nc", "sub/c.nc")

    def test_cancel_terminates_running_command(self, tmp_path):
        runner = LocalRunner(tmp_path / "j")
        result = {}

        def target():
            try:
                result["out"] = runner.run_stage("sleep 30", "run")
            except Exception as exc:  # RunFailed after SIGTERM is acceptable
                result["exc"] = exc

        th = threading.Thread(target=target)
        started = time.perf_counter()
        th.start()
        time.sleep(0.3)
        runner.cancel()
        th.join(timeout=10)
        assert not th.is_alive()
        assert time.perf_counter() - started < 10

    def test_commands_run_inside_workdir(self, tmp_path):
        wd = tmp_path / "j"
        local_execute(ExecutablePlan(setup=None, run="pwd > where.txt"), wd)
        assert (wd / "where.txt").read_text().strip() == str(wd.resolve())


PARAMS = SimParams(t_serial_hours=8.0, serial_fraction=0.05,
                   internode_penalty_per_node_hours=0.01,
                   rank_overhead_hours=0.002)


class TestSimulatorModel:
    def test_formula_by_hand(self):
        # 8.0*(0.05 + 0.95/16) + 0.002*15 + 0.01*3*16/8
        want = 8.0 * (0.05 + 0.95 / 16) + 0.03 + 0.06
        assert model_wall_hours(16, 4, PARAMS) == pytest.approx(want, rel=1e-12)

    def test_single_rank_collapses_to_serial_time(self):
        p = SimParams(t_serial_hours=5.0, serial_fraction=0.2)
        assert model_wall_hours(1, 1, p) == pytest.approx(5.0)

    def test_single_node_has_no_internode_term(self):
        p = SimParams(t_serial_hours=8.0, serial_fraction=0.05,
                      internode_penalty_per_node_hours=10.0)
        q = SimParams(t_serial_hours=8.0, serial_fraction=0.05)
        assert model_wall_hours(32, 1, p) == model_wall_hours(32, 1, q)

    @given(np_=st.integers(1, 512))
    def test_monotone_decreasing_without_overheads(self, np_):
        p = SimParams(t_serial_hours=4.0, serial_fraction=0.1)
        assert model_wall_hours(np_, 1, p) >= model_wall_hours(np_ + 1, 1, p)

    def test_amdahl_floor(self):
        p = SimParams(t_serial_hours=4.0, serial_fraction=0.1)
        # parallel part vanishes; the serial floor remains
        assert model_wall_hours(10 ** 9, 1, p) == pytest.approx(0.4, rel=1e-6)

    def test_outcome_is_success_with_log(self):
        out = sim_execute(16, 4, PARAMS)
        assert isinstance(out, ExecutionOutcome)
        assert out.exit_status == ExitStatus.SUCCESS
        assert "np=16" in out.log_text


class TestJitter:
    def test_zero_jitter_is_exact(self):
        assert sim_execute(16, 2, PARAMS).wall_time_hours == \
            model_wall_hours(16, 2, PARAMS)

    def test_same_key_same_draw(self):
        p = with_jitter(PARAMS, 0.05, seed=42)
        a = sim_execute(16, 2, p, repetition=3).wall_time_hours
        b = sim_execute(16, 2, p, repetition=3).wall_time_hours
        assert a == b

    def test_repetition_changes_draw(self):
        p = with_jitter(PARAMS, 0.05, seed=42)
        draws = {sim_execute(16, 2, p, repetition=i).wall_time_hours
                 for i in range(8)}
        assert len(draws) == 8

    def test_seed_changes_draw(self):
        a = sim_execute(16, 2, with_jitter(PARAMS, 0.05, 1)).wall_time_hours
        b = sim_execute(16, 2, with_jitter(PARAMS, 0.05, 2)).wall_time_hours
        assert a != b

    @given(rep=st.integers(0, 1000), seed=st.integers(0, 2 ** 32))
    @settings(max_examples=50)
    def test_jitter_bounded(self, rep, seed):
        p = with_jitter(PARAMS, 0.1, seed)
        wall = sim_execute(24, 2, p, repetition=rep).wall_time_hours
        center = model_wall_hours(24, 2, p)
        assert abs(wall - center) <= 0.1 * center

    def test_repetitions_reproducible_as_a_batch(self):
        p = with_jitter(PARAMS, 0.05, seed=7)
        assert simulate_repetitions(16, 2, p, 21) == \
            simulate_repetitions(16, 2, p, 21)


class TestProvisioning:
    def _plan(self, nodes=4, backend=Backend.SIMULATED):
        inst = InstanceType(provider="aws", region="us-east-2",
                            name="hpc7a.12xlarge", vcpus=24, memory_gib=768.0,
                            gpus=0, gpu_model=None, family_class=FamilyClass.HPC,
                            network_gbps=300.0, price_per_hour=7.2005)
        return ProvisioningPlan(instance=inst, num_nodes=nodes,
                                total_slots=nodes * 24, backend=backend)

    def test_nodes_and_delay(self):
        p = SimParams(t_serial_hours=1.0, serial_fraction=0.1,
                      provision_delay_seconds_per_node=30.0)
        got = sim_provision(self._plan(4), p)
        assert got.nodes == ("node-0", "node-1", "node-2", "node-3")
        assert got.delay_seconds == pytest.approx(120.0)

    def test_local_plan_rejected(self):
        with pytest.raises(ValueError):
            sim_provision(self._plan(backend=Backend.LOCAL), PARAMS)

    def test_stockout_deterministic_per_seed(self):
        # sweep seeds until both outcomes appear; each seed must be stable
        seen = set()
        for seed in range(40):
            p = SimParams(t_serial_hours=1.0, serial_fraction=0.1, seed=seed)
            try:
                sim_provision(self._plan(), p, fault_injection=True)
                first = "ok"
            except SimulatedStockout:
                first = "stockout"
            try:
                sim_provision(self._plan(), p, fault_injection=True)
                second = "ok"
            except SimulatedStockout:
                second = "stockout"
            assert first == second
            seen.add(first)
        assert seen == {"ok", "stockout"}

    def test_forced_stockout(self):
        with pytest.raises(SimulatedStockout):
            sim_provision(self._plan(), PARAMS, fault_injection=True,
                          stockout_probability=1.0)

    def test_fault_injection_off_never_stocks_out(self):
        sim_provision(self._plan(), PARAMS, stockout_probability=1.0)


class TestCalibration:
    def test_recovers_exact_synthetic_params(self):
        truth = SimParams(t_serial_hours=6.0, serial_fraction=0.08,
                          internode_penalty_per_node_hours=0.02)
        obs = [(np_, nodes, model_wall_hours(np_, nodes, truth))
               for np_ in (8, 16, 32, 64) for nodes in (1, 2, 4)]
        fit = calibrate_model(obs)
        assert fit.t_serial_hours == pytest.approx(6.0, rel=1e-6)
        assert fit.serial_fraction == pytest.approx(0.08, rel=1e-6)
        assert fit.internode_penalty_per_node_hours == pytest.approx(0.02, rel=1e-6)

    def test_single_node_data_drops_penalty(self):
        truth = SimParams(t_serial_hours=6.0, serial_fraction=0.08)
        obs = [(np_, 1, model_wall_hours(np_, 1, truth)) for np_ in (8, 16, 32)]
        fit = calibrate_model(obs)
        assert fit.internode_penalty_per_node_hours == 0.0
        assert fit.t_serial_hours == pytest.approx(6.0, rel=1e-6)

    def test_fit_never_estimates_noise_or_overhead(self):
        obs = [(np_, 1, 1.0 + 8.0 / np_) for np_ in (8, 16, 32, 64)]
        fit = calibrate_model(obs)
        assert fit.rank_overhead_hours == 0.0
        assert fit.jitter_fraction == 0.0
        assert fit.seed == 0
        assert fit.provision_delay_seconds_per_node == 0.0

    def test_too_few_observations(self):
        with pytest.raises(Underdetermined):
            calibrate_model([(8, 1, 1.0), (16, 1, 0.6)])

    def test_needs_two_distinct_rank_counts(self):
        with pytest.raises(Underdetermined):
            calibrate_model([(8, 1, 1.0), (8, 1, 1.01), (8, 1, 0.99)])

    def test_parameters_stay_nonnegative(self):
        # data with an increasing tail would push an unconstrained fit negative
        obs = [(8, 1, 0.2), (16, 1, 0.5), (32, 1, 1.1), (64, 1, 2.3)]
        fit = calibrate_model(obs)
        assert fit.t_serial_hours > 0
        assert 0.0 <= fit.serial_fraction <= 1.0
        assert fit.internode_penalty_per_node_hours >= 0.0

    def test_residuals_weighted_relative(self):
        # equal relative error on short and long runs: the fit must not favor
        # the long run the way absolute least squares would
        truth = SimParams(t_serial_hours=10.0, serial_fraction=0.02)
        obs = [(np_, 1, model_wall_hours(np_, 1, truth)) for np_ in (8, 96)]
        obs.append((16, 1, model_wall_hours(16, 1, truth)))
        fit = calibrate_model(obs)
        for np_, nodes, wall in obs:
            rel = abs(model_wall_hours(np_, nodes, fit) - wall) / wall
            assert rel < 1e-9

    def test_reference_scale_up_fit_within_tolerance(self):
        obs = list(zip(ref.RANKS, [1] * len(ref.RANKS), ref.SCALE_UP_HOURS))
        fit = calibrate_model(obs)
        worst = max(abs(model_wall_hours(np_, 1, fit) - t) / t
                    for np_, _, t in obs)
        assert worst < 0.15


class TestBundledParams:
    def test_loads_and_validates(self, sim_params):
        assert sim_params.t_serial_hours > 0
        assert 0 < sim_params.serial_fraction < 1
        assert sim_params.jitter_fraction == 0.0

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            load_sim_params(b"t_serial_hours: 1\nserial_fraction: 0.1\nfoo: 2\n")

    def test_required_keys(self):
        with pytest.raises(ValueError):
            load_sim_params(b"t_serial_hours: 1\n")

    def test_scale_up_minimum_sits_at_64_ranks(self, sim_params):
        times = {np_: model_wall_hours(np_, 1, sim_params) for np_ in ref.RANKS}
        assert min(times, key=times.get) == 64

    def test_scale_out_never_beats_scale_up_at_shared_points(self, sim_params):
        for np_, nodes in zip(ref.RANKS, ref.SCALE_OUT_NODES):
            if nodes > 1:
                up = model_wall_hours(np_, 1, sim_params)
                out = model_wall_hours(np_, nodes, sim_params)
                assert out > up

    def test_bundled_predictions_track_reference_series(self, sim_params):
        worst = max(
            abs(model_wall_hours(np_, 1, sim_params) - t) / t
            for np_, t in zip(ref.RANKS, ref.SCALE_UP_HOURS))
        assert worst < 0.15
