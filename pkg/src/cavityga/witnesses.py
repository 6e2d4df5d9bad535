"""Entanglement witnesses on the qubit register.

Fidelity witness  W = c 1 - |psi><psi|,  Tr(rho W) = c - F(rho, psi).
Collective spin   W = b 1 - (Jx^2 + Jy^2),  Jk = (1/2) sum_j sigma_k^(j).
A negative expectation value certifies genuine multipartite entanglement.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache, reduce
from typing import Optional

import numpy as np

from .hilbert import TargetLabel, TargetState, fidelity

GHZ_GME = 0.5
GHZ_CLASS = 0.75
DICKE_GME = 2.0 / 3.0
CLUSTER_GME = 0.5
DICKE_SPIN_BOUND = 3.12

# thresholds reported alongside each bundled target
DEFAULT_THRESHOLDS = {
    TargetLabel.GHZ3: {"gme": GHZ_GME, "ghz_class": GHZ_CLASS},
    TargetLabel.DICKE3_2: {"gme": DICKE_GME},
    TargetLabel.BOX_CLUSTER4: {"gme": CLUSTER_GME},
    TargetLabel.CUSTOM: {},
}


class WitnessKind(str, Enum):
    FIDELITY = "FidelityWitness"
    COLLECTIVE_SPIN = "CollectiveSpin"


@dataclass(frozen=True)
class WitnessSpec:
    kind: WitnessKind
    threshold: float
    target: Optional[TargetState] = None
    label: str = ""

    def __post_init__(self):
        if self.kind is WitnessKind.FIDELITY:
            if not 0 < self.threshold < 1:
                raise ValueError("fidelity witness needs 0 < c_n < 1")
            if self.target is None:
                raise ValueError("fidelity witness needs a target state")
        elif not self.threshold > 0:
            raise ValueError("collective-spin witness needs b_s > 0")


def fidelity_witness_value(rho: np.ndarray, spec: WitnessSpec) -> float:
    return spec.threshold - fidelity(rho, spec.target)


@lru_cache(maxsize=None)
def collective_spin(n_qubits: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Jx, Jy, Jz) with qubit 1 as the most significant tensor factor."""
    paulis = {
        "x": np.array([[0, 1], [1, 0]], dtype=complex),
        "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "z": np.array([[1, 0], [0, -1]], dtype=complex),
    }
    eye = np.eye(2, dtype=complex)

    def total(p):
        return sum(
            reduce(np.kron, [p if i == j else eye for i in range(n_qubits)]) for j in range(n_qubits)
        ) / 2.0

    out = tuple(total(paulis[k]) for k in "xyz")
    for m in out:
        m.setflags(write=False)
    return out


def collective_spin_witness_value(rho: np.ndarray, b_s: float, n_qubits: int) -> float:
    rho = np.asarray(rho)
    if rho.shape != (2**n_qubits, 2**n_qubits):
        raise ValueError(f"expected a {2**n_qubits}-dimensional register state, got {rho.shape}")
    jx, jy, _ = collective_spin(n_qubits)
    val = np.trace(rho @ (jx @ jx + jy @ jy))
    if abs(val.imag) > 1e-10:
        raise ValueError(f"witness expectation has imaginary part {val.imag:.3e}")
    return float(b_s - val.real)


def gme_regions(times, trace, threshold: float) -> list[tuple[float, float]]:
    """Maximal runs of grid points with trace > threshold, as (first, last) times."""
    times = np.asarray(times, dtype=float)
    above = np.asarray(trace) > threshold
    if times.shape != above.shape:
        raise ValueError("times and trace must have equal length")
    edges = np.diff(np.concatenate([[0], above.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1) - 1
    return [(float(times[a]), float(times[b])) for a, b in zip(starts, stops)]


def negative_regions(times, witness_values) -> list[tuple[float, float]]:
    """Runs where a witness expectation is negative (entanglement detected)."""
    return gme_regions(times, -np.asarray(witness_values, dtype=float), 0.0)
