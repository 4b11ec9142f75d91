"""Monte Carlo and analysis tools for a heralded quantum memory in an optical dipole trap."""

__version__ = "0.1.0"
