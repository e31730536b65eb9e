"""Choosing the shift ``gamma = delta * t`` for a family of starting vectors.

Two strategies are provided. ``optimize_and_run`` minimizes the mean
residual after ``K`` Arnoldi steps over a few trial vectors with bounded
Brent search, then freezes the shift. The incremental method bisects the
``delta`` interval one vector at a time, steered by the sign of the
residual-norm derivative, and freezes the shift once the interval is
narrower than ``stop_width``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .dense import BreakdownError
from .derivative import DerivativeParams, sai_expmv_with_derivative
from .krylov import SaiParams, sai_expmv
from .sparse import FactorizationError, shifted_lu

log = logging.getLogger(__name__)

_GOLDEN = 0.5 * (3.0 - math.sqrt(5.0))
_SQRT_EPS = math.sqrt(np.finfo(float).eps)


@dataclass(frozen=True)
class ShiftInterval:
    lo: float = 0.01
    hi: float = 0.1

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ValueError(f"need 0 < lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def midpoint(self):
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class OptimizeConfig:
    trial_vectors: Sequence[np.ndarray]
    fixed_iters: int
    tol: float
    t: float
    brent_tol: float = 1e-5
    max_brent_iters: int = 50

    def __post_init__(self):
        if len(self.trial_vectors) < 1:
            raise ValueError("need at least one trial vector")
        if self.fixed_iters < 1:
            raise ValueError("fixed_iters (K) must be at least 1")


class BrentResult(NamedTuple):
    x_min: float
    f_min: float
    evals: int
    converged: bool


@dataclass
class OptimizeResult:
    delta_star: float
    evals: int
    f_min: float
    arnoldi_iters: int
    converged: bool


def brent_minimize(f, lo, hi, tol=1e-5, max_iters=500):
    """Bounded scalar minimization by Brent's method.

    Golden-section steps are mixed with successive parabolic interpolation,
    as in the classical ``fmin`` routine. ``tol`` is an absolute
    tolerance on ``x``; the search stops once the bracket around the best
    point is narrower than about ``2 * (sqrt(eps)|x| + tol/3)``.

    Every evaluation point lies strictly inside ``[lo, hi]``. Non-finite
    values of ``f`` are allowed and simply never win.

    Returns
    -------
    BrentResult
        ``converged`` is False when ``max_iters`` was exhausted; the best
        point found so far is returned in that case.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    a, b = float(lo), float(hi)
    evals = 0

    def call(x):
        nonlocal evals
        evals += 1
        fx = float(f(min(max(x, lo), hi)))
        return fx if not math.isnan(fx) else math.inf

    x = w = v = a + _GOLDEN * (b - a)
    fx = fw = fv = call(x)
    d = e = 0.0
    xm = 0.5 * (a + b)
    tol1 = _SQRT_EPS * abs(x) + tol / 3.0
    tol2 = 2.0 * tol1
    it = 0
    converged = True
    while abs(x - xm) > tol2 - 0.5 * (b - a):
        if it >= max_iters:
            converged = False
            log.warning("Brent search stopped after %d iterations", it)
            break
        golden = True
        if abs(e) > tol1:
            golden = False
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            r, e = e, d
            if abs(p) < abs(0.5 * q * r) and q * (a - x) < p < q * (b - x):
                d = p / q
                u = x + d
                if (u - a) < tol2 or (b - u) < tol2:
                    d = tol1 if xm >= x else -tol1
            else:
                golden = True
        if golden:
            e = (a - x) if x >= xm else (b - x)
            d = _GOLDEN * e
        step = max(abs(d), tol1)
        u = x + (step if d >= 0 else -step)
        fu = call(u)
        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
        xm = 0.5 * (a + b)
        tol1 = _SQRT_EPS * abs(x) + tol / 3.0
        tol2 = 2.0 * tol1
        it += 1
    return BrentResult(x, fx, evals, converged)


def mean_residual_objective(A, cfg, delta, stats=None):
    """Mean over the trial vectors of the residual norm after ``K`` steps.

    One factorization of ``I + delta*t*A`` serves all trial vectors. A run
    that converges before ``K`` steps contributes its converged residual.
    Breakdown of the factorization or of the Krylov process gives ``inf``.
    ``stats``, if given, is a dict whose ``"arnoldi_iters"`` and
    ``"factorizations"`` entries are incremented.
    """
    gamma = delta * cfg.t
    p = SaiParams(gamma=gamma, t=cfg.t, tol=cfg.tol, max_iters=cfg.fixed_iters)
    try:
        lu = shifted_lu(A, gamma)
        if stats is not None:
            stats["factorizations"] = stats.get("factorizations", 0) + 1
        total = 0.0
        for x in cfg.trial_vectors:
            out = sai_expmv(A, x, p, lu=lu)
            if out.breakdown and not out.converged:
                raise BreakdownError("Krylov process broke down before convergence")
            total += out.residual_norm
            if stats is not None:
                stats["arnoldi_iters"] = stats.get("arnoldi_iters", 0) + out.iterations
    except (FactorizationError, BreakdownError) as exc:
        log.info("objective at delta=%g is infinite: %s", delta, exc)
        return math.inf
    return total / len(cfg.trial_vectors)


def optimize_and_run(A, cfg, interval):
    """Find ``delta*`` on ``interval``; use ``gamma* = delta* t`` afterwards.

    ``evals`` equals the number of factorizations spent on the search.
    """
    stats = {}
    res = brent_minimize(
        lambda d: mean_residual_objective(A, cfg, d, stats),
        interval.lo, interval.hi, cfg.brent_tol, cfg.max_brent_iters,
    )
    return OptimizeResult(
        delta_star=res.x_min,
        evals=res.evals,
        f_min=res.f_min,
        arnoldi_iters=stats.get("arnoldi_iters", 0),
        converged=res.converged,
    )


@dataclass(frozen=True)
class IncrementalState:
    interval: ShiftInterval = field(default_factory=ShiftInterval)
    converged_delta: float | None = None
    stop_width: float = 1e-5
    vectors_processed: int = 0
    updates: int = 0

    @property
    def converged(self):
        return self.converged_delta is not None


def incremental_update(state, A, v, p, t, estimator=None):
    """Process one vector at the interval midpoint and bisect the interval.

    Parameters
    ----------
    state : IncrementalState
        Must not have converged yet.
    A : SparseMatrix
    v : ndarray
    p : DerivativeParams
        Run parameters; ``p.base.gamma`` is ignored and replaced by
        ``midpoint * t``.
    t : float
    estimator : callable, optional
        ``estimator(A, v, p)`` returning a KrylovOutcome with ``derivative``
        set (or None). Defaults to :func:`sai_expmv_with_derivative`; useful
        for driving the bisection with a synthetic slope.

    Returns
    -------
    outcome, new_state
        A positive slope moves the upper bound down, anything else (zero
        included) moves the lower bound up. When the width drops to
        ``stop_width`` or below, the midpoint just used becomes
        ``converged_delta``. A missing slope leaves the interval unchanged.
    """
    if state.converged:
        raise ValueError("incremental state has already converged")
    delta = state.interval.midpoint
    run = replace(p, base=replace(p.base, gamma=delta * t, t=t))
    out = (estimator or sai_expmv_with_derivative)(A, v, run)
    new = replace(state, vectors_processed=state.vectors_processed + 1)
    if out.derivative is None:
        log.info("no derivative for vector %d; interval kept", state.vectors_processed)
        return out, new
    lo, hi = state.interval.lo, state.interval.hi
    if out.derivative > 0:
        hi = delta
    else:
        lo = delta
    new = replace(new, interval=ShiftInterval(lo, hi), updates=state.updates + 1)
    if hi - lo <= state.stop_width:
        new = replace(new, converged_delta=delta)
    return out, new


class IncrementalDriver:
    """Online shift tuning over a stream of vectors.

    While the interval is still being bisected every vector costs one
    factorization plus the derivative recursion. After convergence a single
    factorization at ``converged_delta * t`` is shared by all remaining
    vectors, which run plain :func:`sai_expmv`.
    """

    def __init__(self, A, interval, t, tol, max_iters, delta_gamma=1e-7,
                 stop_width=1e-5, estimator: Callable | None = None):
        self.A = A
        self.t = t
        self.tol = tol
        self.max_iters = max_iters
        self.state = IncrementalState(interval=interval, stop_width=stop_width)
        self.params = DerivativeParams(SaiParams(interval.midpoint * t, t, tol, max_iters), delta_gamma)
        self.estimator = estimator
        self.lu = None
        self.phase1_length = 0

    def process(self, v):
        if not self.state.converged:
            out, self.state = incremental_update(
                self.state, self.A, v, self.params, self.t, self.estimator
            )
            self.phase1_length += 1
            return out
        gamma = self.state.converged_delta * self.t
        built = 0
        if self.lu is None:
            self.lu = shifted_lu(self.A, gamma)
            built = 1
        out = sai_expmv(self.A, v, SaiParams(gamma, self.t, self.tol, self.max_iters), lu=self.lu)
        out.lu_built = built
        return out

    def run(self, vectors):
        for v in vectors:
            yield self.process(v)


def incremental_driver(A, vectors, interval, t, tol, max_iters, **kwargs):
    """Generator form of :class:`IncrementalDriver`."""
    return IncrementalDriver(A, interval, t, tol, max_iters, **kwargs).run(vectors)
