"""Certified invariant densities and Lyapunov exponents of noisy interval maps."""

__version__ = "0.1.0"
