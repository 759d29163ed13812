"""Shortcut-to-adiabaticity pulse engineering for rare-earth ensemble qubits."""

__version__ = "0.1.0"
