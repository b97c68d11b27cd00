"""Deterministic cloud simulator with a calibrated performance model.

Wall time for an MPI run of ``np`` ranks over ``num_nodes`` nodes:

    T = t_serial * (s + (1 - s) / np)          strong-scaling core
      + rank_overhead * (np - 1)               per-rank coordination cost
      + penalty * (num_nodes - 1) * np / 8     inter-node communication

The np/8 factor normalizes penalty growth to the 8-rank base configuration
used throughout the bundled scaling references. The optional multiplicative
jitter is drawn from a counter-based generator keyed on
(seed, np, num_nodes, repetition), so any sample can be regenerated in
isolation and repetition studies are reproducible.

``calibrate_model`` fits (t_serial, serial fraction, inter-node penalty) by
least squares on relative error; the per-rank overhead is a structural knob
set by calibration fixtures, not estimated.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from pathlib import Path
from typing import BinaryIO, Sequence, Union

import numpy as _np
import yaml
from scipy.optimize import lsq_linear

from ..errors import SimulatedStockout, Underdetermined
from ..execution import ProvisioningPlan, Backend
from .base import ExecutionOutcome, ExitStatus

BASE_RANKS = 8  # penalty normalization; see module docstring


@dataclass(frozen=True)
class SimParams:
    t_serial_hours: float
    serial_fraction: float
    internode_penalty_per_node_hours: float = 0.0
    rank_overhead_hours: float = 0.0
    provision_delay_seconds_per_node: float = 0.0
    jitter_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.t_serial_hours <= 0:
            raise ValueError("t_serial_hours must be positive")
        if not 0.0 <= self.serial_fraction <= 1.0:
            raise ValueError("serial_fraction must be in [0, 1]")
        if self.internode_penalty_per_node_hours < 0:
            raise ValueError("internode_penalty_per_node_hours must be >= 0")
        if self.rank_overhead_hours < 0:
            raise ValueError("rank_overhead_hours must be >= 0")
        if self.provision_delay_seconds_per_node < 0:
            raise ValueError("provision_delay_seconds_per_node must be >= 0")
        if not 0.0 <= self.jitter_fraction < 0.5:
            raise ValueError("jitter_fraction must be in [0, 0.5)")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def model_wall_hours(np: int, num_nodes: int, params: SimParams) -> float:
    """Noise-free model evaluation."""
    s = params.serial_fraction
    core = params.t_serial_hours * (s + (1.0 - s) / np)
    overhead = params.rank_overhead_hours * (np - 1)
    internode = (params.internode_penalty_per_node_hours
                 * (num_nodes - 1) * np / BASE_RANKS)
    return core + overhead + internode


def _jitter(np: int, num_nodes: int, repetition: int, params: SimParams) -> float:
    if params.jitter_fraction == 0.0:
        return 0.0
    bitgen = _np.random.Philox(key=params.seed,
                               counter=[np, num_nodes, repetition, 0])
    rng = _np.random.Generator(bitgen)
    return float(rng.uniform(-params.jitter_fraction, params.jitter_fraction))


def sim_execute(np: int, num_nodes: int, params: SimParams,
                repetition: int = 0) -> ExecutionOutcome:
    """Simulate one run; pure function of its arguments."""
    if np < 1:
        raise ValueError("np must be >= 1")
    if num_nodes < 1:
        raise ValueError("num_nodes must be >= 1")
    wall = model_wall_hours(np, num_nodes, params)
    wall *= 1.0 + _jitter(np, num_nodes, repetition, params)
    log = (f"simulated run: np={np} num_nodes={num_nodes} "
           f"repetition={repetition} wall_hours={wall:.6f}\n")
    return ExecutionOutcome(wall_time_hours=wall,
                            exit_status=ExitStatus.SUCCESS,
                            log_text=log)


def simulate_repetitions(np: int, num_nodes: int, params: SimParams,
                         count: int) -> list[float]:
    """Wall seconds for repetitions 0..count-1 (index 0 is the warm-up slot)."""
    return [sim_execute(np, num_nodes, params, repetition=i).wall_time_hours * 3600.0
            for i in range(count)]


@dataclass(frozen=True)
class ProvisionResult:
    nodes: tuple[str, ...]
    delay_seconds: float


def sim_provision(plan: ProvisioningPlan, params: SimParams,
                  fault_injection: bool = False,
                  stockout_probability: float = 0.1) -> ProvisionResult:
    """Produce synthetic nodes with a virtual provisioning delay."""
    if plan.backend != Backend.SIMULATED:
        raise ValueError("sim_provision requires a simulated-backend plan")
    if fault_injection:
        bitgen = _np.random.Philox(key=params.seed,
                                   counter=[plan.num_nodes, 0, 0, 1])
        rng = _np.random.Generator(bitgen)
        if rng.uniform() < stockout_probability:
            raise SimulatedStockout(
                f"simulated capacity shortage provisioning {plan.num_nodes} nodes")
    nodes = tuple(f"node-{i}" for i in range(plan.num_nodes))
    delay = params.provision_delay_seconds_per_node * plan.num_nodes
    return ProvisionResult(nodes=nodes, delay_seconds=delay)


def calibrate_model(
        observations: Sequence[tuple[int, int, float]]) -> SimParams:
    """Fit (t_serial, serial_fraction, internode_penalty) to observed runs.

    Least squares on relative error: each residual is (model - T) / T, so
    short runs count as much as long ones. Requires >= 3 observations with
    >= 2 distinct np values. When every observation is single-node the
    penalty column is identically zero; it is dropped and the penalty
    reported as 0. Jitter, seed and the per-rank overhead are not estimated.
    """
    obs = list(observations)
    if len(obs) < 3:
        raise Underdetermined(f"need >= 3 observations, got {len(obs)}")
    for np_, nodes, wall in obs:
        if np_ < 1 or nodes < 1:
            raise ValueError("np and num_nodes must be >= 1")
        if wall <= 0:
            raise ValueError("wall_hours must be positive")
    nps = _np.array([o[0] for o in obs], dtype=float)
    nodes = _np.array([o[1] for o in obs], dtype=float)
    walls = _np.array([o[2] for o in obs], dtype=float)
    if len(set(nps.tolist())) < 2:
        raise Underdetermined("need >= 2 distinct np values")

    # columns: a = t*s (constant), b = t*(1-s) (1/np), optional penalty
    columns = [_np.ones_like(nps), 1.0 / nps]
    fit_penalty = bool((nodes > 1).any())
    if fit_penalty:
        columns.append((nodes - 1.0) * nps / BASE_RANKS)
    design = _np.column_stack(columns)

    weights = 1.0 / walls
    weighted = design * weights[:, None]
    if _np.linalg.matrix_rank(weighted) < design.shape[1]:
        raise Underdetermined("design matrix is rank-deficient")

    result = lsq_linear(weighted, walls * weights, bounds=(0.0, _np.inf))
    a, b = result.x[0], result.x[1]
    penalty = float(result.x[2]) if fit_penalty else 0.0
    t_serial = a + b
    if t_serial <= 0:
        raise Underdetermined("fit collapsed to zero work")
    return SimParams(
        t_serial_hours=float(t_serial),
        serial_fraction=float(a / t_serial),
        internode_penalty_per_node_hours=penalty,
        rank_overhead_hours=0.0,
        provision_delay_seconds_per_node=0.0,
        jitter_fraction=0.0,
        seed=0,
    )


_PARAM_FIELDS = {
    "t_serial_hours", "serial_fraction", "internode_penalty_per_node_hours",
    "rank_overhead_hours", "provision_delay_seconds_per_node",
    "jitter_fraction", "seed",
}


def load_sim_params(source: Union[bytes, str, Path, BinaryIO]) -> SimParams:
    """Load simulator parameters from a YAML document or file path."""
    if isinstance(source, (str, Path)) and Path(source).exists():
        with open(source, "rb") as fh:
            doc = yaml.safe_load(fh)
    else:
        stream = io.BytesIO(source) if isinstance(source, bytes) else source
        doc = yaml.safe_load(stream)
    if not isinstance(doc, dict):
        raise ValueError("simulator parameter document must be a mapping")
    unknown = set(doc) - _PARAM_FIELDS
    if unknown:
        raise ValueError(f"unknown simulator parameters: {', '.join(sorted(unknown))}")
    if "t_serial_hours" not in doc or "serial_fraction" not in doc:
        raise ValueError("t_serial_hours and serial_fraction are required")
    kwargs = {k: (int(v) if k == "seed" else float(v)) for k, v in doc.items()}
    return SimParams(**kwargs)


def with_jitter(params: SimParams, jitter_fraction: float, seed: int) -> SimParams:
    """Convenience for repetition studies over a deterministic fixture."""
    return replace(params, jitter_fraction=jitter_fraction, seed=seed)
