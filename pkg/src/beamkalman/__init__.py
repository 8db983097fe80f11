"""Beamspace-aware reduced-rank Kalman channel estimation for massive MIMO."""

__version__ = "0.1.0"
