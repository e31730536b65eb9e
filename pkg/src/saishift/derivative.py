"""SAI Krylov run that also estimates d||r||/d(gamma).

A second Arnoldi process is driven for ``gamma' = gamma + delta_gamma``
without a second factorization: each of its shifted solves is one
Richardson correction preconditioned by the ``I + gamma*A`` factors. The
unprimed process is exactly the one :func:`sai_expmv` runs.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dense import BreakdownError
from .krylov import KrylovOutcome, SaiParams, _Arnoldi, _check_start, _factorization, guarded_step
from .sparse import lu_solve, spmv

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DerivativeParams:
    """``base`` run parameters plus the absolute finite-difference step.

    ``as_printed`` evaluates ``c' = ||(I + gamma' A) w||`` with the unprimed
    remainder ``w``, for comparison with the literal published listing.
    """

    base: SaiParams
    delta_gamma: float = 1e-7
    as_printed: bool = False

    def __post_init__(self):
        if not self.delta_gamma > 0:
            raise ValueError("delta_gamma must be positive")


def richardson_solve(f, A, gamma_prime, x):
    """Approximate ``(I + gamma' A)^{-1} x`` with one correction step.

    The initial guess and the correction both use the factorization ``f`` of
    ``I + f.gamma*A``.
    """
    w = lu_solve(f, x)
    defect = x - (w + gamma_prime * spmv(A, w))
    return w + lu_solve(f, defect)


def sai_expmv_with_derivative(A, v, p, lu=None):
    """Run :func:`sai_expmv` and estimate the residual-norm derivative.

    Returns
    -------
    KrylovOutcome
        ``y``, ``residual_norm`` and ``iterations`` are bitwise identical to
        ``sai_expmv(A, v, p.base)``. ``derivative`` is
        ``(||r'||_inf - ||r||_inf) / (gamma' - gamma)`` at the step where the
        unprimed process converges, and ``None`` if it never does or if the
        primed process broke down first (then ``derivative_warning`` is set).
    """
    base = p.base
    v, beta = _check_start(A, v)
    f, built = _factorization(A, base.gamma, lu)
    gamma_p = base.gamma + p.delta_gamma
    v1 = v / beta
    prim = _Arnoldi(lambda x: lu_solve(f, x), A, v1, base.gamma, base.t, base.max_iters, base.reorthogonalize)
    sec = _Arnoldi(
        lambda x: richardson_solve(f, A, gamma_p, x),
        A, v1.copy(), gamma_p, base.t, base.max_iters, base.reorthogonalize,
        c_vector=(lambda: prim.w) if p.as_printed else None,
    )
    primed_alive = True
    derivative = None
    warning = False
    while True:
        res, broke = guarded_step(prim)
        if primed_alive:
            try:
                _, sec_broke = sec.step()
            except BreakdownError as exc:
                log.warning("primed recursion broke down at step %d: %s", sec.i, exc)
                primed_alive, warning = False, True
            else:
                if sec_broke and not (res < base.tol or broke or prim.i == base.max_iters):
                    log.warning("primed recursion reached an invariant subspace at step %d", sec.i)
                    primed_alive, warning = False, True
        if res < base.tol and primed_alive:
            derivative = (sec.residual - res) / (gamma_p - base.gamma)
        if res < base.tol or broke or prim.i == base.max_iters:
            break
        prim.advance()
        if primed_alive:
            sec.advance()
    return KrylovOutcome(
        y=prim.solution(beta),
        residual_norm=res,
        iterations=prim.i,
        converged=res < base.tol,
        derivative=derivative,
        gamma=base.gamma,
        lu_built=built,
        breakdown=broke,
        derivative_warning=warning,
    )
