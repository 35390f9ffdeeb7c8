"""Structure-preserving model reduction for Hamiltonian systems.

Symplectic bases (cotangent lift, complex SVD, NLP refinement), symplectic
Galerkin projection, DEIM/SDEIM for nonlinear terms, symplectic integrators
and the diagnostics used to compare them with POD.
"""

__version__ = "0.1.0"

from .basis import (
    NLPResult,
    RankError,
    RefinementError,
    SingularSpectrum,
    SnapshotEnsemble,
    assemble_weighted,
    complex_svd_basis,
    complex_svd_basis_real,
    complexify,
    cotangent_lift,
    nlp_refine,
    pod_basis,
    projection_error,
    symplectic_gram_schmidt,
)
from .deim import (
    ConstructionError,
    DeimOperator,
    SelectionError,
    build_deim_model,
    build_sdeim_model,
    deim_interpolate,
    deim_nonlinear_basis,
    greedy_indices,
    online_speedup_report,
    time_online,
)
from .diagnostics import (
    AlignmentError,
    DiagnosticsSeries,
    SpectralStability,
    analytic_wave_spectrum,
    energy_series,
    error_series,
    pod_spectral_stability,
    relative_energy_drift,
    spectral_stability,
    total_error,
)
from .integrators import (
    IntegratorSpec,
    StepError,
    Trajectory,
    integrate,
    make_stepper,
    midpoint_step_linear,
    midpoint_step_nonlinear,
    symplectic_euler_step,
)
from .models import (
    BoundaryCondition,
    GridSpec,
    HamiltonianSystem,
    PointwiseNonlinearity,
    UnsupportedError,
    build_dxx,
    build_linear_wave,
    build_sine_gordon,
    energy,
    kink_solution,
    kink_state,
    spline_bump_initial,
)
from .reduction import (
    ReducedModel,
    energy_discrepancy,
    is_hamiltonian_matrix,
    lift_state,
    pod_galerkin,
    restrict_state,
    symplectic_galerkin_linear,
    symplectic_galerkin_nonlinear,
)
from .symplectic import (
    DimensionError,
    OrthonormalBasis,
    PoissonStructure,
    SymplecticBasis,
    SymplecticityFailure,
    as_symplectic_basis,
    check_symplectic,
    extend_basis_with_state,
    load_matrix_csv,
    poisson_apply,
    poisson_matrix,
    save_matrix_csv,
    symplectic_inverse,
    symplecticity_residual,
)
