"""Shift-and-invert Krylov approximation of ``exp(-tA) v`` with adaptive shifts."""
from .dense import BreakdownError, expm, hessenberg_inverse
from .derivative import DerivativeParams, richardson_solve, sai_expmv_with_derivative
from .krylov import KrylovOutcome, KrylovState, SaiParams, residual_samples, sai_expmv
from .problems import (
    AnisoSpec,
    ConvDiffSpec,
    InitialStateSpec,
    build_aniso,
    build_convdiff,
    gaussian_states,
    normal_states,
)
from .shift import (
    IncrementalDriver,
    IncrementalState,
    OptimizeConfig,
    ShiftInterval,
    brent_minimize,
    incremental_driver,
    incremental_update,
    mean_residual_objective,
    optimize_and_run,
)
from .sparse import (
    FactorizationError,
    LuFactorization,
    SparseMatrix,
    csr_from_triplets,
    lu_solve,
    read_matrix_market,
    shifted_lu,
    spmv,
    write_matrix_market,
)

__version__ = "0.1.0"
