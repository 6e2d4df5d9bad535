"""Chromosome decoding and clipped-tanh control waveforms.

Each control is defined by its values at the T+1 node times 0, tau, ..., T*tau.
Within an interval the waveform rises from one node value to the next along a
tanh step centred at the interval midpoint. The tanh is evaluated on
[-w, w] and rescaled by 1/tanh(w), so it meets the node values exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import SystemConfig


@dataclass(frozen=True)
class PulseShape:
    """Shape of the interpolating step; ``window`` is the tanh half-width w."""

    window: float = 2.5

    def __post_init__(self):
        if not self.window > 0:
            raise ValueError("pulse window must be > 0")

    @property
    def scale(self) -> float:
        return 1.0 / np.tanh(self.window)

    def steepness(self, tau: float) -> float:
        """Step severity W = 2w/tau, in 1/ns."""
        return 2.0 * self.window / tau


@dataclass(frozen=True)
class ControlSchedule:
    """Node values in rad/ns, one row per control.

    Rows 0..N-1 are the qubit couplings g_j, row N the cavity drive xi.
    """

    node_values: np.ndarray
    shape: PulseShape
    tau: float

    @property
    def n_controls(self) -> int:
        return self.node_values.shape[0]

    @property
    def n_intervals(self) -> int:
        return self.node_values.shape[1] - 1

    @property
    def duration(self) -> float:
        return self.tau * self.n_intervals

    def node_times(self) -> np.ndarray:
        return np.arange(self.n_intervals + 1) * self.tau


def control_bounds(cfg: SystemConfig) -> np.ndarray:
    return np.array([cfg.g_max] * cfg.n_qubits + [cfg.xi_max])


def check_chromosome(genes, cfg: SystemConfig) -> np.ndarray:
    genes = np.asarray(genes, dtype=float)
    if genes.ndim != 1 or genes.shape[0] != cfg.n_var:
        raise ValueError(f"chromosome length {genes.size} does not match (N+1)(T+1) = {cfg.n_var}")
    if not np.all(np.isfinite(genes)):
        raise ValueError("chromosome contains non-finite genes")
    if np.any(np.abs(genes) > 1.0):
        bad = int(np.argmax(np.abs(genes) > 1.0))
        raise ValueError(f"gene {bad} = {genes[bad]!r} outside [-1, 1]")
    return genes


def decode_chromosome(genes, cfg: SystemConfig, shape: PulseShape) -> ControlSchedule:
    genes = check_chromosome(genes, cfg)
    nodes = genes.reshape(cfg.n_controls, cfg.n_intervals + 1) * control_bounds(cfg)[:, None]
    return ControlSchedule(node_values=nodes, shape=shape, tau=cfg.tau)


def encode_schedule(schedule: ControlSchedule, cfg: SystemConfig) -> np.ndarray:
    return (schedule.node_values / control_bounds(cfg)[:, None]).ravel()


def segment_value(u_lo: float, u_hi: float, t: float, t_lo: float, shape: PulseShape, tau: float) -> float:
    if not t_lo <= t < t_lo + tau:
        raise ValueError(f"t={t} outside interval [{t_lo}, {t_lo + tau})")
    # argument is W * (t - centre), written as w * (2 (t - centre) / tau)
    x = shape.window * (2.0 * (t - t_lo) / tau - 1.0)
    return (u_hi - u_lo) * (shape.scale * np.tanh(x) + 1.0) / 2.0 + u_lo


def sample_controls(schedule: ControlSchedule, times) -> np.ndarray:
    """Evaluate every control at ``times``; returns (n_controls, len(times))."""
    t = np.asarray(times, dtype=float)
    T = schedule.n_intervals
    if np.any(t < 0) or np.any(t > schedule.duration * (1 + 1e-12)):
        raise ValueError(f"times must lie within [0, {schedule.duration}]")
    idx = np.clip(np.floor(t / schedule.tau).astype(int), 0, T - 1)
    x = schedule.shape.window * (2.0 * (t - idx * schedule.tau) / schedule.tau - 1.0)
    frac = (schedule.shape.scale * np.tanh(x) + 1.0) / 2.0
    lo = schedule.node_values[:, idx]
    hi = schedule.node_values[:, idx + 1]
    return lo + (hi - lo) * frac


def control_value(schedule: ControlSchedule, control_idx: int, t: float) -> float:
    if not 0 <= control_idx < schedule.n_controls:
        raise ValueError(f"control index {control_idx} outside [0, {schedule.n_controls})")
    return float(sample_controls(schedule, [t])[control_idx, 0])
