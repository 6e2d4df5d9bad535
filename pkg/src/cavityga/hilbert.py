"""Composite space of N qubits and a truncated cavity mode.

Basis ordering is qubit 1 (slowest index) ... qubit N, then the cavity Fock
level (fastest index). Qubit basis is {|0>, |1>}, with |1> the excited state.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import reduce

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SystemConfig:
    """Physical problem definition.

    Frequencies are angular, in rad/ns; times are in ns.
    """

    n_qubits: int = 3
    cavity_dim: int = 6
    g_max: float = TWO_PI * 0.2
    xi_max: float = TWO_PI * 0.2
    tau: float = 1.0
    n_intervals: int = 10
    substeps_per_interval: int = 100

    def __post_init__(self):
        if int(self.n_qubits) < 1:
            raise ValueError("n_qubits must be >= 1")
        if int(self.cavity_dim) < 2:
            raise ValueError("cavity_dim must be >= 2")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if int(self.n_intervals) < 1:
            raise ValueError("n_intervals must be >= 1")
        if int(self.substeps_per_interval) < 1:
            raise ValueError("substeps_per_interval must be >= 1")
        if not (self.g_max > 0 and self.xi_max > 0):
            raise ValueError("g_max and xi_max must be > 0")

    @property
    def qubit_dim(self) -> int:
        return 2**self.n_qubits

    @property
    def dim(self) -> int:
        return self.qubit_dim * self.cavity_dim

    @property
    def n_controls(self) -> int:
        return self.n_qubits + 1

    @property
    def n_var(self) -> int:
        return (self.n_qubits + 1) * (self.n_intervals + 1)

    @property
    def duration(self) -> float:
        return self.tau * self.n_intervals

    @property
    def n_steps(self) -> int:
        return self.n_intervals * self.substeps_per_interval

    @property
    def step(self) -> float:
        return self.tau / self.substeps_per_interval

    def time_grid(self) -> np.ndarray:
        # i * h rather than linspace so grid points land exactly on node times
        return np.arange(self.n_steps + 1) * self.step


@dataclass(frozen=True)
class OperatorSet:
    """Ladder operators embedded in the full space (dense, real)."""

    a: np.ndarray
    adag: np.ndarray
    sigma_minus: tuple[np.ndarray, ...]
    sigma_plus: tuple[np.ndarray, ...]
    cavity_dim: int
    n_qubits: int

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def number_qubit(self, j: int) -> np.ndarray:
        return self.sigma_plus[j] @ self.sigma_minus[j]


class TargetLabel(str, Enum):
    GHZ3 = "GHZ3"
    DICKE3_2 = "Dicke3_2"
    BOX_CLUSTER4 = "BoxCluster4"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class TargetState:
    label: TargetLabel
    state: np.ndarray

    @property
    def n_qubits(self) -> int:
        return int(np.log2(self.state.shape[0]))


def _check_cfg_dim(dim: int, expected: int, what: str):
    if dim != expected:
        raise ValueError(f"{what} has dimension {dim}, expected {expected}")


def basis_state(bits, fock: int, cfg: SystemConfig) -> np.ndarray:
    bits = list(bits)
    if len(bits) != cfg.n_qubits:
        raise ValueError(f"expected {cfg.n_qubits} qubit bits, got {len(bits)}")
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"qubit bits must be 0 or 1, got {bits}")
    if not 0 <= fock < cfg.cavity_dim:
        raise ValueError(f"fock level {fock} outside [0, {cfg.cavity_dim})")
    q = reduce(lambda acc, b: 2 * acc + int(b), bits, 0)
    psi = np.zeros(cfg.dim, dtype=complex)
    psi[q * cfg.cavity_dim + fock] = 1.0
    return psi


def product_state(qubit_state: np.ndarray, cavity_state: np.ndarray) -> np.ndarray:
    psi = np.kron(np.asarray(qubit_state, dtype=complex), np.asarray(cavity_state, dtype=complex))
    return psi / np.linalg.norm(psi)


def _embed(single: np.ndarray, slot: int, dims: list[int]) -> np.ndarray:
    factors = [single if i == slot else np.eye(n) for i, n in enumerate(dims)]
    return reduce(np.kron, factors)


def build_operators(cfg: SystemConfig) -> OperatorSet:
    d = cfg.cavity_dim
    dims = [2] * cfg.n_qubits + [d]
    a_cav = np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1)
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])  # |0><1|
    a = _embed(a_cav, cfg.n_qubits, dims)
    sm = tuple(_embed(lower, j, dims) for j in range(cfg.n_qubits))
    sp = tuple(m.T.copy() for m in sm)
    return OperatorSet(a=a, adag=a.T.copy(), sigma_minus=sm, sigma_plus=sp,
                       cavity_dim=d, n_qubits=cfg.n_qubits)


def pure_density(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def partial_trace_cavity(rho: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Reduced qubit-register state, summing over cavity Fock levels."""
    rho = np.asarray(rho)
    _check_cfg_dim(rho.shape[0], cfg.dim, "density matrix")
    q, d = cfg.qubit_dim, cfg.cavity_dim
    return np.trace(rho.reshape(q, d, q, d), axis1=1, axis2=3)


def partial_trace_qubits(rho: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    rho = np.asarray(rho)
    _check_cfg_dim(rho.shape[0], cfg.dim, "density matrix")
    q, d = cfg.qubit_dim, cfg.cavity_dim
    return np.trace(rho.reshape(q, d, q, d), axis1=0, axis2=2)


def fidelity(rho: np.ndarray, target: TargetState | np.ndarray) -> float:
    """Overlap <psi|rho|psi> with a pure target."""
    psi = target.state if isinstance(target, TargetState) else np.asarray(target)
    rho = np.asarray(rho)
    _check_cfg_dim(rho.shape[0], psi.shape[0], "density matrix")
    val = np.vdot(psi, rho @ psi)
    if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
        raise ValueError(f"fidelity has imaginary residue {val.imag:.3e}; is rho Hermitian?")
    return float(val.real)


def _hadamard_all(n: int) -> np.ndarray:
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    return reduce(np.kron, [h] * n)


def _cz(i: int, j: int, n: int) -> np.ndarray:
    """Controlled-Z between qubits i and j (0-based) on an n-qubit register."""
    idx = np.arange(2**n)
    bit_i = (idx >> (n - 1 - i)) & 1
    bit_j = (idx >> (n - 1 - j)) & 1
    return np.diag(np.where(bit_i & bit_j, -1.0, 1.0))


def make_target(label, n_qubits: int, amplitudes=None) -> TargetState:
    label = TargetLabel(label)
    if label is TargetLabel.CUSTOM:
        if amplitudes is None:
            raise ValueError("Custom target needs amplitudes")
        state = np.asarray(amplitudes, dtype=complex)
        if state.shape != (2**n_qubits,):
            raise ValueError(f"Custom target needs {2**n_qubits} amplitudes, got {state.shape}")
        norm = np.linalg.norm(state)
        if norm == 0:
            raise ValueError("Custom target amplitudes are all zero")
        return TargetState(label, state / norm)

    required = {TargetLabel.GHZ3: 3, TargetLabel.DICKE3_2: 3, TargetLabel.BOX_CLUSTER4: 4}[label]
    if n_qubits != required:
        raise ValueError(f"target {label.value} requires {required} qubits, got {n_qubits}")

    state = np.zeros(2**n_qubits, dtype=complex)
    if label is TargetLabel.GHZ3:
        state[[0b000, 0b111]] = 1.0 / np.sqrt(2.0)
    elif label is TargetLabel.DICKE3_2:
        state[[0b011, 0b101, 0b110]] = 1.0 / np.sqrt(3.0)
    else:
        # H on every qubit, then CZ along the square's edges 1-2, 2-3, 3-4, 4-1
        zero = np.zeros(16)
        zero[0] = 1.0
        circuit = _cz(3, 0, 4) @ _cz(2, 3, 4) @ _cz(1, 2, 4) @ _cz(0, 1, 4) @ _hadamard_all(4)
        state = (circuit @ zero).astype(complex)
    return TargetState(label, state)
