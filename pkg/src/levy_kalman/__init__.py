"""Kalman-Bucy filtering with Lévy noise, including infinite-variance observations."""

from .bench import (
    BenchReport,
    ExperimentConfig,
    emit_table,
    register_competitor,
    run_benchmark,
    unregister_competitor,
)
from .filtering import FilterRun, filter_convergence_study, innovations, prepare_filter, run_filter
from .levy_core import (
    CompoundPoisson,
    LevyModel,
    PathGrid,
    SymmetricStable,
    TabulatedJumps,
    TimeGrid,
    TruncatedLevyModel,
    covariance_matrix,
    jump_second_moment,
    jump_tail_first_moment,
    sample_increments,
    upsilon_infinity,
)
from .linear_sde import LinearModel, TimeMatrixFunction, simulate_observation, simulate_system
from .riccati import (
    NoiseNormalization,
    RiccatiSolution,
    phi_limit,
    riccati_convergence_study,
    sigma2,
    solve_riccati,
    standard_normalization,
)
