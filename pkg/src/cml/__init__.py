"""Stochastic-metric toy models: metric algebra, noisy geodesics, photon gates and slits."""

__version__ = "0.1.0"
