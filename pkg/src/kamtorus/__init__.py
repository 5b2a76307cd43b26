"""kamtorus: spectral KAM linearization of perturbed affine torus actions.

Solves twisted cohomological equations over partially hyperbolic toral
automorphisms, removes obstructions via commutation, iterates the conjugacy
step with parameter exclusion, and certifies linearization at finite
precision.
"""

from ._kernels import IMPL as kernel_impl
from .lattice import (
    EigenPair,
    SpectralSplitting,
    TorusAutomorphism,
    check_commuting,
    check_hr,
    dual_orbit,
    find_pivot,
    is_ergodic,
    katznelson_bound,
    simultaneous_eigenbasis,
)
from .fields import (
    FourierField,
    FrequencyFamily,
    ParamFamily,
    VectorFourierField,
    average,
    compose_affine,
    from_grid,
    lip_norm,
    residue,
    to_grid,
    truncate,
)
from .cohomology import (
    ApproximateSolveResult,
    ObstructionTable,
    TwistedEquation,
    approximate_solve,
    obstruction,
    remove_obstructions,
    solve_twisted,
)

__version__ = "0.1.0"

__all__ = [
    "EigenPair",
    "SpectralSplitting",
    "TorusAutomorphism",
    "check_commuting",
    "check_hr",
    "dual_orbit",
    "find_pivot",
    "is_ergodic",
    "katznelson_bound",
    "simultaneous_eigenbasis",
    "FourierField",
    "FrequencyFamily",
    "ParamFamily",
    "VectorFourierField",
    "average",
    "compose_affine",
    "from_grid",
    "lip_norm",
    "residue",
    "to_grid",
    "truncate",
    "ApproximateSolveResult",
    "ObstructionTable",
    "TwistedEquation",
    "approximate_solve",
    "obstruction",
    "remove_obstructions",
    "solve_twisted",
    "kernel_impl",
]
