"""Genetic-algorithm pulse optimization for qubits coupled through a driven cavity."""

__version__ = "0.1.0"
