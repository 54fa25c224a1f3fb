"""Non-Hermitian loop models of state-vector collapse for two-level systems."""

__version__ = "0.1.0"
