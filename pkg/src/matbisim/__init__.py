"""Bisimulation for transition systems and Markov reward chains via
matrix algebra: checks, quotients, coarsest-partition search, ergodic
projections, and commutation verifiers."""

from .algebra import (
    DEFAULT_ATOL,
    TAU_LABEL,
    ActionAlphabet,
    ActionMatrix,
    ActionSet,
    MatrixShapeError,
    SingularMatrixError,
    rt_closure,
    solve_linear,
)
from .partition import (
    CheckFailed,
    CheckReport,
    ModelFormatError,
    Partition,
    Witness,
    brute_force_coarsest,
    canonical_distributor_bool,
    canonical_distributor_real,
    coarsest_partition,
    collector_to_partition,
    enumerate_partitions,
    format_partition,
    parse_partition,
    standard_checker,
)
from .lts import (
    Lts,
    check_branching_lts,
    check_strong_lts,
    check_strong_relational,
    check_weak_lts,
    format_lts,
    lump_branching_lts,
    lump_strong_lts,
    lump_weak_lts,
    parse_lts,
    tau_closure,
    verify_branching_commutation,
    verify_closure_identities,
    verify_weak_commutation,
)
from .mrc import (
    DistributorError,
    ErgodicProjection,
    GeneratorError,
    LimitChain,
    Mrc,
    MrcFast,
    adapt_diagonal,
    check_branching_mrc,
    check_strong_discontinuous,
    check_strong_mrc,
    check_weak_mrc,
    default_tau_distributor,
    ergodic_projection,
    format_mrc,
    limit_chain,
    lump_strong_mrc,
    lump_weak_mrc,
    parse_distributor,
    parse_mrc,
    tau_distributor_residuals,
    total_reward,
    transition_matrix,
    validate_generator,
    verify_limit_commutation,
)

__version__ = "0.1.0"
