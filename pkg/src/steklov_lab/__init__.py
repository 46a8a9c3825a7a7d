"""Steklov spectra of warped-product hollow spheres and the stability of the
inverse problem that recovers the conformal factor from them."""

__version__ = "0.1.0"

from .errors import SteklovLabError  # noqa: E402
from .geometry import ConformalFactor, Potential, potential_from_factor  # noqa: E402
from .dnmap import steklov_spectrum  # noqa: E402

__all__ = ["ConformalFactor", "Potential", "SteklovLabError", "potential_from_factor",
           "steklov_spectrum", "__version__"]
