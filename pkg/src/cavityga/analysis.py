"""Re-evaluation of optimized schedules: witnesses, waveforms and noise."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import NoiseConfig, evolve_closed, evolve_lindblad
from .fitness import FitnessReport, Problem, fidelity_trace, report_from_traces, top_level_trace
from .hilbert import SystemConfig, partial_trace_cavity, pure_density
from .pulses import ControlSchedule, sample_controls
from .witnesses import collective_spin_witness_value, gme_regions, negative_regions


def reduced_qubit_states(kets: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """rho_Q(t) for every ket in a closed trajectory, shape (T, 2^N, 2^N)."""
    psi = kets.reshape(len(kets), cfg.qubit_dim, cfg.cavity_dim)
    return np.einsum("tqn,tpn->tqp", psi, psi.conj())


@dataclass
class Evaluation:
    report: FitnessReport
    times: np.ndarray
    fidelity: np.ndarray
    waveform_times: np.ndarray
    waveforms: np.ndarray
    fidelity_witness: dict[str, tuple[float, np.ndarray]] = field(default_factory=dict)
    spin_witness: Optional[tuple[float, np.ndarray]] = None
    regions: list[tuple[str, float, float, float]] = field(default_factory=list)


def evaluate_schedule(schedule: ControlSchedule, problem: Problem, thresholds: dict[str, float],
                      spin_bound: Optional[float] = None, waveform_samples: int = 0) -> Evaluation:
    """Closed re-propagation with witness series and detection regions.

    ``thresholds`` maps a region name to a fidelity-witness c_n. Waveforms
    are sampled on the integration grid unless ``waveform_samples`` per
    interval is given.
    """
    cfg = problem.system
    traj = evolve_closed(problem.fitness.initial_state, schedule, cfg)
    fid = fidelity_trace(traj, problem.fitness.target, cfg)
    report = report_from_traces(fid, top_level_trace(traj, cfg), problem.fitness, cfg)

    if waveform_samples > 0:
        wt = np.arange(cfg.n_intervals * waveform_samples + 1) * (cfg.tau / waveform_samples)
    else:
        wt = traj.times
    ev = Evaluation(report, traj.times, fid, wt, sample_controls(schedule, wt))

    for name, c_n in thresholds.items():
        ev.fidelity_witness[name] = (c_n, c_n - fid)
        ev.regions.extend((name, c_n, a, b) for a, b in gme_regions(traj.times, fid, c_n))
    if spin_bound is not None:
        rhos = reduced_qubit_states(traj.states, cfg)
        values = np.array([collective_spin_witness_value(r, spin_bound, cfg.n_qubits) for r in rhos])
        ev.spin_witness = (spin_bound, values)
        ev.regions.extend(("spin", spin_bound, a, b) for a, b in negative_regions(traj.times, values))
    return ev


SCENARIOS = ("cavity_dephasing", "decay", "all")


def noise_scenarios(noise: NoiseConfig, n_qubits: int) -> dict[str, NoiseConfig]:
    gamma, gamma_phi = noise.per_qubit(n_qubits)
    zeros = (0.0,) * n_qubits
    return {
        "cavity_dephasing": NoiseConfig(noise.kappa, zeros, gamma_phi),
        "decay": NoiseConfig(0.0, gamma, zeros),
        "all": NoiseConfig(noise.kappa, gamma, gamma_phi),
    }


@dataclass
class NoiseReport:
    times: np.ndarray
    noiseless: np.ndarray
    traces: dict[str, np.ndarray]
    noise: NoiseConfig

    @property
    def noiseless_max(self) -> float:
        return float(self.noiseless.max())

    def maximum(self, scenario: str) -> float:
        return float(self.traces[scenario].max())

    def time_of_max(self, scenario: str) -> float:
        return float(self.times[int(np.argmax(self.traces[scenario]))])

    def drop(self, scenario: str) -> float:
        """Noiseless peak fidelity minus the noisy peak."""
        return self.noiseless_max - self.maximum(scenario)


def noisy_fidelity(schedule: ControlSchedule, problem: Problem, noise: NoiseConfig) -> np.ndarray:
    cfg = problem.system
    rho0 = pure_density(problem.fitness.initial_state)
    traj = evolve_lindblad(rho0, schedule, noise, cfg, reduce=lambda r: partial_trace_cavity(r, cfg))
    return fidelity_trace(traj, problem.fitness.target, cfg)


def noise_study(schedule: ControlSchedule, problem: Problem, noise: NoiseConfig,
                scenarios=SCENARIOS) -> NoiseReport:
    cfg = problem.system
    closed = evolve_closed(problem.fitness.initial_state, schedule, cfg)
    base = fidelity_trace(closed, problem.fitness.target, cfg)
    configs = noise_scenarios(noise, cfg.n_qubits)
    traces = {name: noisy_fidelity(schedule, problem, configs[name]) for name in scenarios}
    return NoiseReport(closed.times, base, traces, noise)
