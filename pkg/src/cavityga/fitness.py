"""Chromosome scoring: peak fidelity, cavity-truncation penalty and hold bonus.

    total = F(t_max) + phi1 + phi2

phi1 = -(nu / tau T) * integral of the top Fock-level population over the run,
phi2 = (mu / m tau) * integral of F over [t_max, t_max + m tau] (clipped at the
horizon, normaliser unchanged). Integrals are trapezoid sums on the
integration grid; t_max is the earliest grid time attaining the maximum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import PopulationPropagationError, PropagationError, Trajectory, propagate_traces
from .hilbert import SystemConfig, TargetState, fidelity, partial_trace_cavity, partial_trace_qubits
from .pulses import PulseShape, decode_chromosome


@dataclass(frozen=True)
class FitnessConfig:
    target: TargetState
    initial_state: np.ndarray
    nu: float = 0.1
    mu: float = 0.5
    m_hold: int = 2

    def __post_init__(self):
        if self.nu < 0 or self.mu < 0:
            raise ValueError("nu and mu must be >= 0")
        if int(self.m_hold) < 1:
            raise ValueError("m_hold must be >= 1")


@dataclass(frozen=True)
class Problem:
    system: SystemConfig
    fitness: FitnessConfig
    shape: PulseShape = field(default_factory=PulseShape)

    def __post_init__(self):
        if self.fitness.target.state.shape[0] != self.system.qubit_dim:
            raise ValueError("target dimension does not match the qubit register")
        if np.shape(self.fitness.initial_state) != (self.system.dim,):
            raise ValueError("initial state dimension does not match the system")


@dataclass(frozen=True)
class FitnessReport:
    total: float
    fidelity_at_tmax: float
    t_max: float
    phi1: float
    phi2: float
    times: np.ndarray = field(repr=False)
    fidelity_trace: np.ndarray = field(repr=False)
    top_level_trace: np.ndarray = field(repr=False)

    def same_as(self, other: "FitnessReport") -> bool:
        scalars = ("total", "fidelity_at_tmax", "t_max", "phi1", "phi2")
        return all(getattr(self, k) == getattr(other, k) for k in scalars) and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("times", "fidelity_trace", "top_level_trace")
        )


class ChromosomeEvaluationError(PropagationError):
    def __init__(self, message: str, time: float | None, member: int | None):
        super().__init__(message, time)
        self.member = member


def fidelity_trace(traj: Trajectory, target: TargetState, cfg: SystemConfig) -> np.ndarray:
    psi = target.state
    if traj.kind == "pure":
        kets = traj.states.reshape(len(traj), cfg.qubit_dim, cfg.cavity_dim)
        overlaps = np.einsum("q,tqn->tn", psi.conj(), kets)
        return np.sum(np.abs(overlaps) ** 2, axis=1)
    if traj.kind == "density":
        return np.array([fidelity(partial_trace_cavity(r, cfg), target) for r in traj.states])
    # reduced: already on the qubit register
    return np.array([fidelity(r, target) for r in traj.states])


def top_level_trace(traj: Trajectory, cfg: SystemConfig) -> np.ndarray:
    top = cfg.cavity_dim - 1
    if traj.kind == "pure":
        kets = traj.states.reshape(len(traj), cfg.qubit_dim, cfg.cavity_dim)
        return np.sum(np.abs(kets[:, :, top]) ** 2, axis=1)
    if traj.kind == "density":
        return np.array([partial_trace_qubits(r, cfg)[top, top].real for r in traj.states])
    raise ValueError("reduced trajectories carry no cavity information")


def phi1_from_trace(top: np.ndarray, times: np.ndarray, nu: float) -> float:
    return -nu / (times[-1] - times[0]) * float(np.trapezoid(top, times))


def phi1_penalty(traj: Trajectory, fcfg: FitnessConfig, cfg: SystemConfig) -> float:
    return phi1_from_trace(top_level_trace(traj, cfg), traj.times, fcfg.nu)


def _hold_window(t_max: float, fcfg: FitnessConfig, cfg: SystemConfig) -> tuple[int, int]:
    i_max = int(round(t_max / cfg.step))
    if not np.isclose(i_max * cfg.step, t_max, rtol=0, atol=1e-9 * cfg.step):
        raise ValueError(f"t_max = {t_max} is not on the integration grid")
    return i_max, min(i_max + fcfg.m_hold * cfg.substeps_per_interval, cfg.n_steps)


def phi2_bonus(fid_trace: np.ndarray, t_max: float, fcfg: FitnessConfig, cfg: SystemConfig) -> float:
    lo, hi = _hold_window(t_max, fcfg, cfg)
    if hi <= lo:
        return 0.0
    times = cfg.time_grid()
    area = float(np.trapezoid(fid_trace[lo:hi + 1], times[lo:hi + 1]))
    return fcfg.mu / (fcfg.m_hold * cfg.tau) * area


def report_from_traces(fid: np.ndarray, top: np.ndarray, fcfg: FitnessConfig, cfg: SystemConfig) -> FitnessReport:
    times = cfg.time_grid()
    i_max = int(np.argmax(fid))  # first occurrence, i.e. earliest time
    t_max = float(times[i_max])
    f_max = float(fid[i_max])
    p1 = phi1_from_trace(top, times, fcfg.nu)
    p2 = phi2_bonus(fid, t_max, fcfg, cfg)
    return FitnessReport(
        total=f_max + p1 + p2, fidelity_at_tmax=f_max, t_max=t_max, phi1=p1, phi2=p2,
        times=times, fidelity_trace=fid, top_level_trace=top,
    )


def evaluate_population(chromosomes, problem: Problem, member_offset: int = 0) -> list[FitnessReport]:
    """Score a batch of chromosomes in one propagation.

    Each member's numbers do not depend on which other members share the batch.
    """
    cfg = problem.system
    schedules = [decode_chromosome(c, cfg, problem.shape) for c in chromosomes]
    if not schedules:
        return []
    try:
        fid, top = propagate_traces(problem.fitness.initial_state, schedules, cfg,
                                    problem.fitness.target.state)
    except PopulationPropagationError as err:
        member = member_offset + err.member
        raise ChromosomeEvaluationError(f"chromosome {member}: {err}", err.time, member) from err
    return [report_from_traces(fid[:, k].copy(), top[:, k].copy(), problem.fitness, cfg)
            for k in range(len(schedules))]


def evaluate_fitness(chromosome, problem: Problem) -> FitnessReport:
    return evaluate_population([chromosome], problem)[0]
