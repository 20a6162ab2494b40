"""Connecting orbits, pearling spectra, and bifurcation energetics for
multicomponent bilayer models.

The package is organized as a pipeline:

    model      parametrized vector fields and their analytic derivatives
    singular   fast/slow decomposition, existence function rho, seeds
    bvp        collocation solves of freeway (zero-residual) and
               toll-road (positive-residual) connections, continuation
    spectral   pearling pencil verdicts, coercivity margins
    energy     reduced and dressed energy audits
    normalform saddle-node quantities and the quadratic energy law
    cli        one executable tying it together with reproducible runs
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DegeneratePairingError, DomainError,
                     ExistenceError, FreewaylabError, NoConvergenceError,
                     NumericalError, PreconditionError)
from .model import PcbModel, PcbParams, VectorFieldModel, make_pcb

__all__ = [
    "__version__",
    "ConfigError", "DegeneratePairingError", "DomainError",
    "ExistenceError", "FreewaylabError", "NoConvergenceError",
    "NumericalError", "PreconditionError",
    "PcbModel", "PcbParams", "VectorFieldModel", "make_pcb",
]
