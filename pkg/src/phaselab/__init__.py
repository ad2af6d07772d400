"""phaselab: a verification laboratory for Gaussian solitons of a
phase-coupled nonlinear Schrodinger family.

The wave function is written as R*exp(i*S) with the phase S treated as an
angle. A single coupling constant C = -c_abs multiplies the squared sum of
per-particle phase Laplacians in the Lagrangian (the "cross-coupled"
variant); a weakly separable variant couples each particle to its own
(Delta_i S)^2 term instead.

The package constructs the analytic multi-soliton solutions of this family
from their consistency conditions (ansatz), decides which particle rosters
admit such solutions (feasibility), verifies everything independently by
residual evaluation and energy quadrature on grids (fieldlab), and
time-evolves the equations of motion at desk scale (dynamics).
"""

from phaselab.model import (
    CROSS_COUPLED,
    WEAKLY_SEPARABLE,
    EnergyBreakdown,
    EntangledPairSolution,
    ParticleSpec,
    SolitonSolution,
    UniverseConfig,
    ValidatedUniverse,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "CROSS_COUPLED",
    "WEAKLY_SEPARABLE",
    "EnergyBreakdown",
    "EntangledPairSolution",
    "ParticleSpec",
    "SolitonSolution",
    "UniverseConfig",
    "ValidatedUniverse",
    "validate",
    "__version__",
]
