"""Dissipative error correction of finite GKP qubits in a truncated Fock space."""

__version__ = "0.1.0"
