"""Focusing NLS on the line with a repulsive point interaction: ground states,
threshold data, a conservative solver, virial and modulation diagnostics."""
from .params import Params
from .errors import DeltaNLSError

__version__ = "0.1.0"
__all__ = ["Params", "DeltaNLSError", "__version__"]
