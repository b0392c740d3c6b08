"""Second-order Hamiltonian corrections and master equations for open quantum
systems weakly coupled to a thermal bath.

The package computes the dynamical (Lamb-Stark), mean-force and steady-state
corrections to a bare Hamiltonian, builds Bloch-Redfield, Davies and cumulant
dynamics from them, and verifies the relations between the three corrections
against exact few-mode reservoirs.
"""

from ._quad import DEFAULT_QUAD, QuadratureConfig
from .bath import (
    DiscreteBath,
    OhmicBath,
    SpectralMeasure,
    S_finite_time,
    correlation_time_domain,
    finite_time_Gamma,
    gamma_finite_time,
    gamma_spectral,
    integrated_S_matrix,
    integrated_gamma_matrix,
    lamb_shift_S,
    measure_value,
)
from .corrections import (
    KossakowskiSpec,
    build_upsilon_table,
    guarnieri_sigma_x,
    kernel_D,
    kossakowski_custom,
    kossakowski_redfield,
    kossakowski_secular,
    tls_diagonal_steady,
    upsilon_dynamical,
    upsilon_mean_force,
    upsilon_steady_offdiag,
)
from .errors import (
    ConsistencyError,
    DegenerateSteadyStateError,
    DetailedBalanceError,
    DomainError,
    MeanforceError,
    NearDegenerateError,
    NumericsError,
    PoleError,
    ResourceError,
    ValidationError,
)
from .generators import (
    Superoperator,
    build_cumulant_exponent,
    build_davies_generator,
    build_redfield_generator,
    choi_matrix,
    cumulant_map,
    interaction_redfield_generator,
    propagate,
    steady_state_of_generator,
    thermal_state,
)
from .operators import (
    JumpDecomposition,
    SpectralDecomposition,
    UpsilonTable,
    assemble_correction,
    bohr_decompose,
    pauli_coupling,
    spectral_decompose,
    tls_hamiltonian,
)
from .oracle import (
    TruncatedBath,
    effective_hamiltonian,
    exact_reduced_gibbs,
    matching_bath,
    scaling_exponent,
)
from .perturbative import (
    FourTupleSet,
    alpha_weight,
    four_tuples,
    fourth_order_solve_tls,
    g22_coefficient,
    g40_tls,
    g40_tls_direct,
    second_order_residual,
)

__version__ = "0.1.0"
