"""Finite-difference test operators and random initial states.

Both operators are stored with the sign convention ``du/dt = -A u``, on a
uniform grid of ``n`` interior points per direction with homogeneous
Dirichlet values eliminated. Unknown ``(ix, iy)`` lives at ``iy * n + ix``,
so ``u.reshape(n, n)[iy, ix]`` recovers the grid function.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sps

from .sparse import from_scipy


def discontinuous_d1(x, y):
    inside = (x >= 0.25) & (x <= 0.75) & (y >= 0.25) & (y <= 0.75)
    return np.where(inside, 1000.0, 0.1)


def discontinuous_d2(x, y):
    return 0.5 * discontinuous_d1(x, y)


def velocity_x(x, y):
    return x + y


def velocity_y(x, y):
    return x - y


@dataclass(frozen=True)
class ConvDiffSpec:
    """Convection-diffusion on the unit square.

    The defaults reproduce the piecewise-constant diffusion benchmark; the
    coefficient functions may be replaced for testing.
    """

    n: int
    peclet: float = 1000.0
    d1: Callable = discontinuous_d1
    d2: Callable = discontinuous_d2
    v1: Callable = velocity_x
    v2: Callable = velocity_y

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("need at least 3 interior points per dimension")

    @property
    def h(self):
        return 1.0 / (self.n + 1)

    def nodes(self):
        return _nodes(self.n, 0.0, 1.0)

    bounds = (0.0, 1.0)


@dataclass(frozen=True)
class AnisoSpec:
    """Rotated anisotropic diffusion ``-div(Q^T diag(1, lam) Q grad u)`` on [-1, 1]^2.

    By default the stencil is left unscaled, as in the PyAMG gallery
    (``diffusion_stencil_2d(..., type='FD')``); this is the normalization the
    reference times ``t = 0.1, 0.5`` are meant for. ``divide_by_h2`` gives
    the consistent discretization of the PDE instead.
    """

    n: int
    lam: float = 5000.0
    theta: float = np.pi / 4
    divide_by_h2: bool = False

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("need at least 3 interior points per dimension")
        if not self.lam > 0:
            raise ValueError("anisotropy ratio must be positive")

    @property
    def h(self):
        return 2.0 / (self.n + 1)

    def nodes(self):
        return _nodes(self.n, -1.0, 1.0)

    bounds = (-1.0, 1.0)

    def tensor(self):
        c, s = np.cos(self.theta), np.sin(self.theta)
        c11 = c * c + self.lam * s * s
        c22 = s * s + self.lam * c * c
        c12 = (self.lam - 1.0) * s * c
        return c11, c12, c22


@dataclass(frozen=True)
class InitialStateSpec:
    seed: int = 0
    covariance_scale: float = 0.05
    count: int = 20

    def __post_init__(self):
        if not self.covariance_scale > 0:
            raise ValueError("covariance_scale must be positive")


def _nodes(n, a, b):
    h = (b - a) / (n + 1)
    return a + h * np.arange(1, n + 1)


def build_convdiff(spec):
    """Assemble ``A = -L_h`` for the convection-diffusion operator.

    Diffusion is in flux form with coefficients sampled at face midpoints and
    yields the symmetric part. Convection uses the split form
    ``(Pe/2)(v . grad u + div(v u))`` with central differences; the
    coefficient of ``u_{i+1}`` in row ``i`` is minus that of ``u_i`` in row
    ``i+1``, so this part is exactly skew-symmetric.
    """
    n, h = spec.n, spec.h
    x = spec.nodes()
    X, Y = np.meshgrid(x, x)  # X[iy, ix]
    idx = np.arange(n * n).reshape(n, n)
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(np.broadcast_to(v, r.shape).ravel())

    inv_h2 = 1.0 / (h * h)
    de = spec.d1(X + 0.5 * h, Y)
    dw = spec.d1(X - 0.5 * h, Y)
    dn = spec.d2(X, Y + 0.5 * h)
    ds = spec.d2(X, Y - 0.5 * h)
    add(idx, idx, (de + dw + dn + ds) * inv_h2)
    add(idx[:, :-1], idx[:, 1:], -de[:, :-1] * inv_h2)
    add(idx[:, 1:], idx[:, :-1], -dw[:, 1:] * inv_h2)
    add(idx[:-1, :], idx[1:, :], -dn[:-1, :] * inv_h2)
    add(idx[1:, :], idx[:-1, :], -ds[1:, :] * inv_h2)

    if spec.peclet != 0.0:
        scale = 0.5 * spec.peclet / (2.0 * h)
        V1 = spec.v1(X, Y)
        V2 = spec.v2(X, Y)
        cx = scale * (V1[:, :-1] + V1[:, 1:])
        cy = scale * (V2[:-1, :] + V2[1:, :])
        # A = -L, so the east neighbour gets -cx and the west one +cx
        add(idx[:, :-1], idx[:, 1:], -cx)
        add(idx[:, 1:], idx[:, :-1], cx)
        add(idx[:-1, :], idx[1:, :], -cy)
        add(idx[1:, :], idx[:-1, :], cy)

    coo = sps.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n * n, n * n)
    )
    return from_scipy(coo)


def build_aniso(spec):
    """Assemble the 9-point discretization of ``-div(C grad u)``, ``C = Q^T Lambda Q``.

    Second derivatives use the standard central stencils and the mixed term
    ``2 c12 u_xy`` the four-corner cross difference. The ``1/h^2`` factor is
    applied only when ``spec.divide_by_h2`` is set.
    """
    n, h = spec.n, spec.h
    c11, c12, c22 = spec.tensor()
    inv_h2 = 1.0 / (h * h) if spec.divide_by_h2 else 1.0
    stencil = {
        (0, 0): 2.0 * (c11 + c22) * inv_h2,
        (1, 0): -c11 * inv_h2,
        (-1, 0): -c11 * inv_h2,
        (0, 1): -c22 * inv_h2,
        (0, -1): -c22 * inv_h2,
    }
    if c12 != 0.0:
        corner = 0.5 * c12 * inv_h2
        stencil.update({(1, 1): -corner, (-1, -1): -corner, (1, -1): corner, (-1, 1): corner})
    return _stencil_matrix(n, stencil)


def _stencil_matrix(n, stencil):
    idx = np.arange(n * n).reshape(n, n)
    rows, cols, vals = [], [], []
    for (dx, dy), coef in stencil.items():
        if coef == 0.0:
            continue
        ys = slice(max(0, -dy), n - max(0, dy))
        xs = slice(max(0, -dx), n - max(0, dx))
        r = idx[ys, xs]
        c = idx[ys.start + dy: ys.stop + dy, xs.start + dx: xs.stop + dx]
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(np.full(r.size, coef))
    coo = sps.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n * n, n * n)
    )
    return from_scipy(coo)


def _rng(seed, stream, i):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, i))))


def gaussian_bump(problem, mean, covariance_scale=0.05):
    """Bivariate normal density with covariance ``covariance_scale * I`` sampled on the grid."""
    x = problem.nodes()
    X, Y = np.meshgrid(x, x)
    var = covariance_scale
    r2 = (X - mean[0]) ** 2 + (Y - mean[1]) ** 2
    return (np.exp(-r2 / (2.0 * var)) / (2.0 * np.pi * var)).ravel()


def gaussian_states(spec, problem, stream=0, start=0):
    """Gaussian bumps with means drawn uniformly from the problem domain.

    Vector ``i`` is drawn from its own PCG64 stream keyed by
    ``(seed, stream, i)``, so it does not depend on ``count``.
    """
    lo, hi = problem.bounds
    out = []
    for i in range(start, start + spec.count):
        mean = _rng(spec.seed, stream, i).uniform(lo, hi, size=2)
        out.append(gaussian_bump(problem, mean, spec.covariance_scale))
    return out


def normal_states(spec, problem, stream=0, start=0):
    """Vectors with i.i.d. standard normal entries, same seeding scheme."""
    size = problem.n * problem.n
    return [_rng(spec.seed, stream, i).standard_normal(size) for i in range(start, start + spec.count)]
