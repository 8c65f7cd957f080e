"""Amoebas of plane curves and of punctured Riemann surfaces, generalized Ronkin
functions, residue polygons, and theta-function difference operators."""

from .config import DEFAULT, Tolerances

__version__ = "0.1.0"

__all__ = ["DEFAULT", "Tolerances", "__version__"]
