"""Forward and inverse solvers for heat-equation diffusion coefficients.

The package discretizes u_t - div(a grad u) = 0 on the unit square with
homogeneous Dirichlet data, evolves initial states through the spectral
decomposition of the elliptic pencil, and reconstructs the coefficient
a(x) from a single final-time snapshot via a regularized stationary
transport solve wrapped in a fixed-point loop.

All numerical objects are plain immutable dataclasses over numpy arrays;
nothing mutates shared state, so independent scenario runs can be executed
concurrently from separate processes.
"""

from .mesh import (
    Mesh,
    BoundaryBand,
    build_structured_mesh,
    distance_to_boundary,
    boundary_band,
    write_grid,
    read_grid,
)
from .fem import (
    CoefficientField,
    OperatorPair,
    AdmissibilityError,
    assemble_stiffness,
    assemble_mass,
    assemble_pair,
    apply_dirichlet,
    compute_norms,
    Norms,
    l2_norm,
    make_field,
    validate_coefficient,
    gradient_bound,
    element_gradients,
    nodal_gradients,
)
from .spectral import (
    SpectralDecomposition,
    GapReport,
    EigensolverError,
    solve_generalized_eig,
    strictify_spectrum,
    check_gap_property,
    gap_report,
    spectral_projection_apply,
    projection_difference_norm,
    verify_minmax_sandwich,
    eigen_perturbation_experiment,
    projection_perturbation_experiment,
)
from .heat import (
    HeatSnapshot,
    CorrectionF,
    evolve,
    compute_F,
    fit_log_slope,
    f_lipschitz_experiment,
    lower_bound_check,
    check_u0_condition,
    certify_decay_threshold,
)
from .inversion import (
    TransportSystem,
    InversionOptions,
    InversionReport,
    TransportSolveError,
    assemble_transport_operator,
    build_transport_system,
    solve_transport_ls,
    admissible_projection,
    fixed_point_invert,
    stability_ratio_experiment,
)
from .scenario import Scenario, FieldSpec, U0Spec, ConfigError, parse_config, serialize_scenario, scenario_hash
from .runner import RunArtifact, RunnerError, run_scenario, write_reports, stability_sweep

__version__ = "0.1.0"
