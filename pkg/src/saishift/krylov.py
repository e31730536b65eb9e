"""Shift-and-invert Arnoldi approximation of ``exp(-t*A) v``.

The basis is built for ``(I + gamma*A)^{-1}`` and the projected matrix is
mapped back through ``H = (inv(H_hat) - I) / gamma``. Convergence is decided
by the residual of the ODE ``y' = -A y`` sampled at ``t/3, 2t/3, t``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dense import BreakdownError, expm, hessenberg_inverse
from .sparse import LuFactorization, lu_solve, shifted_lu, spmv

log = logging.getLogger(__name__)

SAMPLE_FRACTIONS = (1.0 / 3.0, 2.0 / 3.0, 1.0)

# ||w|| after orthogonalization relative to ||w|| before it
BREAKDOWN_RATIO = 1e-14


@dataclass(frozen=True)
class SaiParams:
    """Parameters of one SAI Krylov run.

    ``tol`` bounds the sup-norm of the residual samples for the normalized
    starting vector, i.e. it is relative to ``||v||_2``.
    """

    gamma: float
    t: float
    tol: float
    max_iters: int
    reorthogonalize: bool = False

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.t > 0:
            raise ValueError(f"t must be positive, got {self.t}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class KrylovState:
    """Arnoldi data after ``iter`` steps.

    ``V`` is n x (k+1) with the basis in its columns (a transposed view of
    row-contiguous storage); ``H_hat`` is (k+1) x k.
    """

    V: np.ndarray
    H_hat: np.ndarray
    beta: float
    iter: int = 0


@dataclass
class KrylovOutcome:
    y: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    derivative: float | None = None
    gamma: float | None = None
    lu_built: int = 0
    breakdown: bool = False
    derivative_warning: bool = False


def residual_samples(state, p, A, w):
    """Residual values at ``s = t/3, 2t/3, t`` for the current Krylov dimension.

    ``w`` is the orthogonalized, not yet normalized, remainder of the last
    step. The sign is kept; callers take the largest magnitude.
    """
    r, _ = _residuals(state.H_hat[: state.iter, : state.iter], A, w, p.gamma, p.t)
    return r


def _residuals(H_block, A, w, gamma, t):
    m = H_block.shape[0]
    Ht = hessenberg_inverse(H_block)
    H = (Ht - np.eye(m)) / gamma
    if not np.all(np.isfinite(H)):
        raise BreakdownError(f"projected matrix overflowed at dimension {m}")
    c = np.linalg.norm(w + gamma * spmv(A, w))
    r = np.empty(3)
    u = None
    with np.errstate(over="ignore", invalid="ignore"):
        for j, frac in enumerate(SAMPLE_FRACTIONS):
            u = expm(-(frac * t) * H)[:, 0]
            r[j] = c / gamma * (Ht[m - 1, :] @ u)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(u))):
        # a spurious Ritz value put an eigenvalue of H far into the left half-plane
        raise BreakdownError(f"projected exponential is not finite at dimension {m}")
    return r, u


class _Arnoldi:
    """Step-by-step SAI Arnoldi process.

    ``apply`` maps a basis vector to (an approximation of)
    ``(I + gamma*A)^{-1} x``.
    """

    def __init__(self, apply, A, v1, gamma, t, max_iters, reorthogonalize=False, c_vector=None):
        n = v1.shape[0]
        self.apply = apply
        self.A = A
        self.gamma = gamma
        self.t = t
        self.reorthogonalize = reorthogonalize
        # basis vectors are rows so MGS touches contiguous memory
        self.W = np.zeros((max_iters + 1, n))
        self.H_hat = np.zeros((max_iters + 1, max_iters))
        self.W[0] = v1
        self.i = 0
        self.w = None
        self.u = None
        self.residual = np.inf
        # overrides the vector entering c = ||(I + gamma A) w||
        self.c_vector = c_vector

    def step(self):
        """Run one Arnoldi step; return ``(max |r|, lucky_breakdown)``.

        On BreakdownError the process is left as it was before the call.
        """
        j = self.i
        W, H_hat = self.W, self.H_hat
        w = self.apply(W[j])
        w_norm0 = np.linalg.norm(w)
        for l in range(j + 1):
            h = w @ W[l]
            H_hat[l, j] = h
            w = w - h * W[l]
        if self.reorthogonalize:
            for l in range(j + 1):
                h = w @ W[l]
                H_hat[l, j] += h
                w = w - h * W[l]
        h_next = np.linalg.norm(w)
        H_hat[j + 1, j] = h_next
        broke = h_next <= BREAKDOWN_RATIO * w_norm0
        if broke:
            # invariant subspace: the remainder is rounding noise
            cw = np.zeros_like(w)
        else:
            cw = w if self.c_vector is None else self.c_vector()
        r, u = _residuals(H_hat[: j + 1, : j + 1], self.A, cw, self.gamma, self.t)
        self.i = j + 1
        self.w = w
        self.u = u
        self.residual = float(np.max(np.abs(r)))
        return self.residual, broke

    def advance(self):
        self.W[self.i] = self.w / self.H_hat[self.i, self.i - 1]

    def solution(self, beta):
        return beta * (self.u @ self.W[: self.i])

    def state(self, beta):
        h = self.H_hat[self.i, self.i - 1]
        if h > 0:
            self.advance()
        k = self.i
        return KrylovState(self.W[: k + 1].T, self.H_hat[: k + 1, :k], beta, k)


def guarded_step(proc):
    """``proc.step()``, but a breakdown after the first step ends the run.

    When the new projected matrix is numerically singular or its exponential
    overflows, the subspace from the previous step is kept and reported as a
    breakdown, i.e. ``(previous residual, True)``.
    """
    try:
        return proc.step()
    except BreakdownError as exc:
        if proc.i == 0:
            raise
        log.info("breakdown at step %d, keeping %d-dimensional subspace: %s", proc.i + 1, proc.i, exc)
        return proc.residual, True


def _check_start(A, v):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != A.n_rows:
        raise ValueError(f"starting vector of shape {v.shape} does not match n={A.n_rows}")
    beta = float(np.linalg.norm(v))
    if beta == 0.0:
        raise ValueError("starting vector must be nonzero")
    return v, beta


def _factorization(A, gamma, lu):
    if lu is None:
        return shifted_lu(A, gamma), 1
    if not isinstance(lu, LuFactorization) or lu.gamma != gamma or lu.n != A.n_rows:
        raise ValueError("supplied factorization does not match A and gamma")
    return lu, 0


def sai_expmv(A, v, p, lu=None, return_state=False):
    """Approximate ``exp(-p.t * A) @ v`` with the SAI Krylov method.

    Parameters
    ----------
    A : SparseMatrix
    v : array_like
        Nonzero starting vector.
    p : SaiParams
    lu : LuFactorization, optional
        Factorization of ``I + p.gamma*A`` to reuse; built when omitted.
    return_state : bool
        Also return the :class:`KrylovState`.

    Returns
    -------
    KrylovOutcome
        ``y = beta V_m exp(-t H) e_1``. ``converged`` is false when
        ``max_iters`` steps did not bring the residual below ``tol``; ``y`` is
        then the last iterate. ``breakdown`` marks a run that stopped because
        the subspace became (numerically) invariant; see :func:`guarded_step`.

    Raises
    ------
    BreakdownError
        If already the first projected problem is singular.
    """
    v, beta = _check_start(A, v)
    f, built = _factorization(A, p.gamma, lu)
    proc = _Arnoldi(lambda x: lu_solve(f, x), A, v / beta, p.gamma, p.t, p.max_iters, p.reorthogonalize)
    while True:
        res, broke = guarded_step(proc)
        if res < p.tol or broke or proc.i == p.max_iters:
            break
        proc.advance()
    out = KrylovOutcome(
        y=proc.solution(beta),
        residual_norm=res,
        iterations=proc.i,
        converged=res < p.tol,
        gamma=p.gamma,
        lu_built=built,
        breakdown=broke,
    )
    if return_state:
        return out, proc.state(beta)
    return out
