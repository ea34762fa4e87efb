"""Time-incremental minimization for gel swelling.

A quasistatic Cahn-Hilliard evolution coupled to finite-strain
viscoelasticity of second-grade type: each time step minimizes the
free energy plus an H^-1 proximal penalty and a viscous dissipation
term, under a time-dependent boundary distortion handled by
substitution.  The package bundles the discrete operators, the
incremental solver, post-hoc certificates for the scheme's laws, and a
CLI that renders figures next to the delimited output.
"""

from .boundary import (
    AffineFamily,
    DirichletFamily,
    GentleBendFamily,
    IdentityFamily,
    compose_deformation,
    smallness_check,
)
from .config import RunConfig, load_config, parse_config
from .energy import (
    IncrementProblem,
    dt_free_energy,
    external_power_integral,
    free_energy,
    incremental_functional,
    incremental_gradient,
    viscous_dissipation,
)
from .errors import (
    FormatError,
    GelstepError,
    InfiniteEnergy,
    IterationBudgetExceeded,
    LineSearchFailure,
    MassMismatch,
    NonpositiveDeterminant,
    NotMeanFree,
    ParseError,
    SingularMatrix,
    SolverStagnation,
    ValidationError,
)
from .grid import Grid
from .hminus import (
    NeumannLaplacian,
    hminus_inner,
    hminus_norm_sq,
    solve_poisson_meanfree,
    stiffness_form,
)
from .potentials import (
    PotentialParams,
    check_assumptions,
    dpsi_total,
    g_eval,
    viscous_eval,
    wel_eval,
    why_eval,
    wpf_eval,
)
from .solver import (
    NodalState,
    SolverConfig,
    StepRecord,
    Trajectory,
    chemical_potential,
    initial_concentration,
    minimize_increment,
    relax_deformation,
    run_simulation,
)
from .verification import (
    RefinementResult,
    Verdict,
    VerificationReport,
    check_apriori,
    check_edi,
    check_el_residuals,
    refinement_study,
)

__version__ = "0.1.0"

__all__ = [
    "AffineFamily",
    "DirichletFamily",
    "FormatError",
    "GelstepError",
    "GentleBendFamily",
    "Grid",
    "IdentityFamily",
    "IncrementProblem",
    "InfiniteEnergy",
    "IterationBudgetExceeded",
    "LineSearchFailure",
    "MassMismatch",
    "NeumannLaplacian",
    "NodalState",
    "NonpositiveDeterminant",
    "NotMeanFree",
    "ParseError",
    "PotentialParams",
    "RefinementResult",
    "RunConfig",
    "SingularMatrix",
    "SolverConfig",
    "SolverStagnation",
    "StepRecord",
    "Trajectory",
    "ValidationError",
    "Verdict",
    "VerificationReport",
    "check_apriori",
    "check_assumptions",
    "check_edi",
    "check_el_residuals",
    "chemical_potential",
    "compose_deformation",
    "dpsi_total",
    "dt_free_energy",
    "external_power_integral",
    "free_energy",
    "g_eval",
    "hminus_inner",
    "hminus_norm_sq",
    "incremental_functional",
    "incremental_gradient",
    "initial_concentration",
    "load_config",
    "minimize_increment",
    "parse_config",
    "refinement_study",
    "relax_deformation",
    "run_simulation",
    "smallness_check",
    "solve_poisson_meanfree",
    "stiffness_form",
    "viscous_dissipation",
    "viscous_eval",
    "wel_eval",
    "why_eval",
    "wpf_eval",
]
