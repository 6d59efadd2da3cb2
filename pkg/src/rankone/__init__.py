"""Low-rank Hermitian matrix recovery from rank-one measurements.

Submodules
----------
linalg      Hermitian eigensolvers, Schatten norms, proximal maps.
tensors     Tensor powers, the symmetric-subspace projector, symmetric moments.
designs     Weighted complex projective designs.
ensembles   Gaussian and design-based measurement ensembles.
solver      ADMM for nuclear-norm and PSD trace minimization.
analysis    Monte Carlo checks of moment, small-ball and width bounds.
experiments Seeded experiment drivers behind the ``r1`` command.
"""

from . import analysis, designs, ensembles, linalg, solver, tensors
from .errors import (
    ConfigError,
    ConvergenceError,
    DesignConstructionError,
    DimensionError,
    DomainError,
    FormatError,
    RankOneError,
    ResourceGuardError,
)

__version__ = "0.1.0"

__all__ = [
    "analysis",
    "designs",
    "ensembles",
    "linalg",
    "solver",
    "tensors",
    "ConfigError",
    "ConvergenceError",
    "DesignConstructionError",
    "DimensionError",
    "DomainError",
    "FormatError",
    "RankOneError",
    "ResourceGuardError",
]
