"""ptchaos: exact multitime quantum-process simulation and chaos diagnostics."""

__version__ = "0.1.0"
