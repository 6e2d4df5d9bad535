"""Hamiltonian assembly and fixed-step RK4 propagation.

Closed dynamics integrate i d|psi>/dt = H(t)|psi> and open dynamics the
Lindblad equation with decay and dephasing channels. Both use classical RK4
on the grid t_k = k * tau / substeps, with the controls sampled at the step
start, midpoint and end.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._kernels import rk4_batch
from .hilbert import OperatorSet, SystemConfig, build_operators
from .pulses import ControlSchedule, sample_controls


class PropagationError(RuntimeError):
    """Integration produced non-finite values or lost trace."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


@dataclass(frozen=True)
class NoiseConfig:
    """Lindblad rates in rad/ns. ``gamma``/``gamma_phi`` are per qubit."""

    kappa: float = 0.0
    gamma: tuple[float, ...] = ()
    gamma_phi: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        object.__setattr__(self, "gamma_phi", tuple(float(g) for g in self.gamma_phi))
        if self.kappa < 0 or any(g < 0 for g in self.gamma + self.gamma_phi):
            raise ValueError("noise rates must be >= 0")

    @classmethod
    def uniform(cls, n_qubits: int, kappa=0.0, gamma=0.0, gamma_phi=0.0) -> "NoiseConfig":
        return cls(kappa, (gamma,) * n_qubits, (gamma_phi,) * n_qubits)

    def per_qubit(self, n_qubits: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
        def expand(rates):
            if len(rates) == 0:
                return (0.0,) * n_qubits
            if len(rates) == 1:
                return rates * n_qubits
            if len(rates) != n_qubits:
                raise ValueError(f"expected {n_qubits} per-qubit rates, got {len(rates)}")
            return rates

        return expand(self.gamma), expand(self.gamma_phi)


@dataclass(frozen=True)
class DetuningConfig:
    delta: tuple[float, ...] = ()
    delta_d: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "delta", tuple(float(x) for x in self.delta))
        if not all(np.isfinite(self.delta + (self.delta_d,))):
            raise ValueError("detunings must be finite")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    kind: str = field(default="pure")  # "pure" rows are kets, "density" entries are matrices

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def control_operators(ops: OperatorSet) -> np.ndarray:
    """Stack of the N+1 operators multiplying g_1..g_N and xi."""
    terms = [ops.adag @ sm + ops.a @ sp for sm, sp in zip(ops.sigma_minus, ops.sigma_plus)]
    terms.append(ops.a + ops.adag)
    return np.stack(terms)


def assemble_hamiltonian(g, xi: float, ops: OperatorSet, cfg: SystemConfig | None = None) -> np.ndarray:
    g = np.atleast_1d(np.asarray(g, dtype=float))
    if g.shape != (ops.n_qubits,):
        raise ValueError(f"expected {ops.n_qubits} couplings, got shape {g.shape}")
    if cfg is not None and (np.any(np.abs(g) > cfg.g_max * (1 + 1e-12)) or abs(xi) > cfg.xi_max * (1 + 1e-12)):
        warnings.warn("control amplitude exceeds configured bound", RuntimeWarning, stacklevel=2)
    coeffs = np.append(g, xi)
    return np.tensordot(coeffs, control_operators(ops), axes=1).astype(complex)


def assemble_hamiltonian_detuned(g, xi: float, det: DetuningConfig, t: float, ops: OperatorSet) -> np.ndarray:
    g = np.atleast_1d(np.asarray(g, dtype=float))
    delta = det.delta if det.delta else (0.0,) * ops.n_qubits
    if len(delta) != ops.n_qubits:
        raise ValueError(f"expected {ops.n_qubits} qubit detunings, got {len(delta)}")
    h = np.zeros((ops.dim, ops.dim), dtype=complex)
    for j in range(ops.n_qubits):
        h += delta[j] * ops.number_qubit(j)
        h += g[j] * (ops.adag @ ops.sigma_minus[j] + ops.a @ ops.sigma_plus[j])
    phase = np.exp(1j * det.delta_d * t)
    h += xi * (ops.a * phase + ops.adag * np.conj(phase))
    return h


def _stage_times(cfg: SystemConfig) -> np.ndarray:
    """Step starts, midpoints and ends: 2 * n_steps + 1 points."""
    return np.arange(2 * cfg.n_steps + 1) * (cfg.step / 2.0)


def _check_schedule(schedule: ControlSchedule, cfg: SystemConfig):
    if schedule.n_controls != cfg.n_controls or schedule.n_intervals != cfg.n_intervals:
        raise ValueError(
            f"schedule has {schedule.n_controls} controls x {schedule.n_intervals} intervals, "
            f"config expects {cfg.n_controls} x {cfg.n_intervals}"
        )
    if not np.isclose(schedule.tau, cfg.tau, rtol=0, atol=1e-15):
        raise ValueError(f"schedule tau {schedule.tau} does not match config tau {cfg.tau}")


class PopulationPropagationError(PropagationError):
    def __init__(self, message: str, time: float, member: int):
        super().__init__(message, time)
        self.member = member


def _stage_coefficients(schedules, cfg: SystemConfig) -> np.ndarray:
    stage_t = _stage_times(cfg)
    c = np.stack([sample_controls(sch, stage_t) for sch in schedules], axis=-1)
    # (controls, stages, P) -> (stages, controls, 2P), duplicated for the imaginary lanes
    return np.ascontiguousarray(np.concatenate([c, c], axis=2).transpose(1, 0, 2))


def _pack(psi0: np.ndarray, n_members: int, cfg: SystemConfig) -> np.ndarray:
    ket = psi0.reshape(cfg.qubit_dim, cfg.cavity_dim)
    re = np.repeat(ket.real[:, :, None], n_members, axis=2)
    im = np.repeat(ket.imag[:, :, None], n_members, axis=2)
    return np.ascontiguousarray(np.concatenate([re, im], axis=2))


def _check_initial(psi0, cfg: SystemConfig) -> np.ndarray:
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if psi0.shape != (cfg.dim,):
        raise ValueError(f"initial state has shape {psi0.shape}, expected ({cfg.dim},)")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-9:
        raise ValueError("initial state is not normalized")
    return psi0


def _raise_if_nonfinite(fid: np.ndarray, cfg: SystemConfig):
    bad = ~np.isfinite(fid)
    if bad.any():
        steps, members = np.nonzero(bad)
        first = int(np.argmin(steps))
        t = float(steps[first] * cfg.step)
        raise PopulationPropagationError(
            f"non-finite state at t = {t:.6g} ns", time=t, member=int(members[first]))


def propagate_traces(psi0, schedules, cfg: SystemConfig, target_state: np.ndarray):
    """Closed evolution of several schedules at once, keeping only observables.

    Returns ``(fidelity, top_level)``, each of shape (n_steps + 1, len(schedules)):
    the fidelity of the reduced qubit state with ``target_state`` and the
    population of cavity level d-1, on the integration grid.
    """
    psi0 = _check_initial(psi0, cfg)
    for sch in schedules:
        _check_schedule(sch, cfg)
    target_state = np.asarray(target_state, dtype=complex)
    if target_state.shape != (cfg.qubit_dim,):
        raise ValueError(f"target has shape {target_state.shape}, expected ({cfg.qubit_dim},)")
    n = len(schedules)
    fid = np.empty((cfg.n_steps + 1, n))
    top = np.empty((cfg.n_steps + 1, n))
    no_states = np.empty((0, cfg.qubit_dim, cfg.cavity_dim, 2 * n))
    rk4_batch(_pack(psi0, n, cfg), cfg.n_qubits, _stage_coefficients(schedules, cfg), cfg.step,
              np.ascontiguousarray(target_state.real), np.ascontiguousarray(target_state.imag),
              fid, top, no_states)
    _raise_if_nonfinite(fid, cfg)
    return fid, top


def evolve_closed(psi0, schedule: ControlSchedule, cfg: SystemConfig) -> Trajectory:
    psi0 = _check_initial(psi0, cfg)
    _check_schedule(schedule, cfg)
    fid = np.empty((cfg.n_steps + 1, 1))
    top = np.empty((cfg.n_steps + 1, 1))
    states = np.empty((cfg.n_steps + 1, cfg.qubit_dim, cfg.cavity_dim, 2))
    ones = np.ones(cfg.qubit_dim)
    rk4_batch(_pack(psi0, 1, cfg), cfg.n_qubits, _stage_coefficients([schedule], cfg), cfg.step,
              ones, np.zeros(cfg.qubit_dim), fid, top, states)
    try:
        _raise_if_nonfinite(fid, cfg)
    except PopulationPropagationError as err:
        raise PropagationError(str(err), err.time) from None
    kets = (states[..., 0] + 1j * states[..., 1]).reshape(cfg.n_steps + 1, cfg.dim)
    return Trajectory(cfg.time_grid(), kets, "pure")


def _jump_operators(noise: NoiseConfig, ops: OperatorSet) -> list[tuple[float, np.ndarray]]:
    gamma, gamma_phi = noise.per_qubit(ops.n_qubits)
    jumps = [(noise.kappa, ops.a)]
    for j in range(ops.n_qubits):
        jumps.append((gamma[j], ops.sigma_minus[j]))
        jumps.append((2.0 * gamma_phi[j], ops.number_qubit(j)))
    return [(rate, q.astype(complex)) for rate, q in jumps if rate > 0]


def lindblad_rhs(rho: np.ndarray, hamiltonian: np.ndarray, jumps) -> np.ndarray:
    """-i[H, rho] + sum_k r_k D[Q_k] rho, with D[Q]rho = Q rho Q^+ - {Q^+Q, rho}/2."""
    out = -1j * (hamiltonian @ rho - rho @ hamiltonian)
    for rate, q in jumps:
        qd = q.conj().T
        qdq = qd @ q
        out += rate * (q @ rho @ qd - 0.5 * (qdq @ rho + rho @ qdq))
    return out


class LindbladGenerator:
    """Lindblad right-hand side with the anticommutator folded into H_eff = H - (i/2) sum r Q^+Q.

    Jump operators with at most one non-zero per row (a, sigma-, n) make
    Q rho Q^+ a gather: (Q rho Q^+)_ik = w_i conj(w_k) rho[c_i, c_k].
    """

    def __init__(self, jumps):
        self.dense, self.gathers = [], []
        dim = jumps[0][1].shape[0] if jumps else 0
        self.k_sum = np.zeros((dim, dim), complex)
        for rate, q in jumps:
            self.k_sum += rate * (q.conj().T @ q)
            if np.all(np.count_nonzero(q, axis=1) <= 1):
                cols = np.argmax(q != 0, axis=1)
                w = q[np.arange(dim), cols]
                self.gathers.append((np.ix_(cols, cols), rate * np.outer(w, w.conj())))
            else:
                self.dense.append((rate, q, q.conj().T))
        self.has_jumps = bool(jumps)

    def __call__(self, rho: np.ndarray, hamiltonian: np.ndarray) -> np.ndarray:
        heff = hamiltonian - 0.5j * self.k_sum if self.has_jumps else hamiltonian
        out = -1j * (heff @ rho - rho @ heff.conj().T)
        for idx, weight in self.gathers:
            out += weight * rho[idx]
        for rate, q, qd in self.dense:
            out += rate * (q @ rho @ qd)
        return out


def evolve_lindblad(rho0, schedule: ControlSchedule, noise: NoiseConfig, cfg: SystemConfig,
                    reduce=None) -> Trajectory:
    """Integrate the master equation, recording rho (or ``reduce(rho)``) at every step.

    Full 96-dimensional trajectories run to hundreds of MB, so callers that
    only need e.g. the qubit state should pass ``reduce``.
    """
    rho = np.array(rho0, dtype=complex)
    if rho.shape != (cfg.dim, cfg.dim):
        raise ValueError(f"initial density matrix has shape {rho.shape}, expected ({cfg.dim}, {cfg.dim})")
    if abs(np.trace(rho) - 1.0) > 1e-9 or not np.allclose(rho, rho.conj().T, atol=1e-10):
        raise ValueError("initial density matrix must be Hermitian with unit trace")
    _check_schedule(schedule, cfg)
    ops = build_operators(cfg)
    stack = control_operators(ops).astype(complex)
    jumps = _jump_operators(noise, ops)

    rhs = LindbladGenerator(jumps)
    keep = reduce if reduce is not None else (lambda r: r)

    coeffs = sample_controls(schedule, _stage_times(cfg)).T
    step = cfg.step
    first = keep(rho)
    states = np.empty((cfg.n_steps + 1,) + first.shape, dtype=complex)
    states[0] = first
    h1 = np.tensordot(coeffs[0], stack, axes=1)
    for s in range(cfg.n_steps):
        h0 = h1
        hm = np.tensordot(coeffs[2 * s + 1], stack, axes=1)
        h1 = np.tensordot(coeffs[2 * s + 2], stack, axes=1)
        k1 = rhs(rho, h0)
        k2 = rhs(rho + 0.5 * step * k1, hm)
        k3 = rhs(rho + 0.5 * step * k2, hm)
        k4 = rhs(rho + step * k3, h1)
        rho = rho + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = (s + 1) * step
        if not np.all(np.isfinite(rho)):
            raise PropagationError(f"non-finite density matrix at t = {t:.6g} ns", time=t)
        drift = abs(np.trace(rho) - 1.0)
        if drift > 1e-5:
            raise PropagationError(f"trace drift {drift:.3e} at t = {t:.6g} ns", time=t)
        states[s + 1] = keep(rho)
    return Trajectory(cfg.time_grid(), states, "density" if reduce is None else "reduced")
