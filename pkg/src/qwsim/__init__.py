"""Open-boundary quantum transport simulations in 1D and 2D waveguides."""

__version__ = "0.1.0"

from .units import HBAR, MSTAR, FLUX_QUANTUM  # noqa: F401
