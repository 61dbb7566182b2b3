"""Optimal dendrite tapers for a passive cable with a lumped soma.

Modules: ``model`` (parameters, profiles, admissible classes), ``eigen`` (the
first eigenvalue criterion), ``transient`` (modal time-domain solution),
``transfer`` (reduced steady problem, T1 and its gradient), ``optimize``
(constrained searches) and ``cli``.
"""

from .errors import ConfigError, EigenSolverError, NumericalError, TruncationError
from .model import PhysicalParams, RhoProfile, TaperProfile

__all__ = [
    "ConfigError",
    "EigenSolverError",
    "NumericalError",
    "TruncationError",
    "PhysicalParams",
    "RhoProfile",
    "TaperProfile",
]
__version__ = "0.1.0"
