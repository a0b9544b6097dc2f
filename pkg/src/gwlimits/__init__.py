"""Local limits of supercritical Galton-Watson trees conditioned on Z_n = a_n."""

from .offspring import OffspringDistribution, fixtures

__all__ = ["OffspringDistribution", "fixtures"]
__version__ = "0.1.0"
