"""Discrete-time PRB slicing simulator with Lyapunov-guided learning schedulers."""

__version__ = "0.1.0"
