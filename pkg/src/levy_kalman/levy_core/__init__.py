"""Lévy-process characteristics, measure calculus and path sampling."""

from .measures import (
    JUMP_LAWS,
    CompoundPoisson,
    JumpComponent,
    NoJumps,
    Normal,
    SymmetricPareto,
    SymmetricStable,
    TabulatedJumps,
    TwoPoint,
    Uniform,
    jump_second_moment,
    jump_tail_first_moment,
    sample_standard_stable,
    stable_density_constant,
)
from .model import (
    LevyModel,
    TruncatedLevyModel,
    UpsilonReport,
    covariance_matrix,
    structural_upsilon,
    upsilon_infinity,
)
from .sampling import (
    STREAM_INITIAL,
    STREAM_OBSERVATION,
    STREAM_SYSTEM,
    ConvergenceTable,
    JumpStream,
    PathGrid,
    TimeGrid,
    empirical_l1_convergence,
    read_csv,
    replicate_rng,
    sample_increments,
    sample_jump_stream,
    write_csv,
)
