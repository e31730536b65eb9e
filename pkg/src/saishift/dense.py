"""Dense kernels for the projected Krylov problem."""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve, solve_triangular

# Largest 1-norm for which the degree-m diagonal Pade approximant is
# accurate to unit roundoff in double precision.
PADE_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


class BreakdownError(ArithmeticError):
    """The projected Hessenberg matrix is numerically singular."""


def _pade_coefficients(m):
    return [
        math.factorial(2 * m - j) * math.factorial(m)
        / (math.factorial(2 * m) * math.factorial(j) * math.factorial(m - j))
        for j in range(m + 1)
    ]


_PADE_COEFFS = {m: _pade_coefficients(m) for m in PADE_THETA}


def _check_square(M, name="matrix"):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def _pade(M, m):
    c = _PADE_COEFFS[m]
    n = M.shape[0]
    ident = np.eye(n)
    M2 = M @ M
    if m == 13:
        M4 = M2 @ M2
        M6 = M4 @ M2
        U = M @ (M6 @ (c[13] * M6 + c[11] * M4 + c[9] * M2)
                 + c[7] * M6 + c[5] * M4 + c[3] * M2 + c[1] * ident)
        V = M6 @ (c[12] * M6 + c[10] * M4 + c[8] * M2) + c[6] * M6 + c[4] * M4 + c[2] * M2 + c[0] * ident
    else:
        powers = [ident, M2]
        for _ in range(2, m // 2 + 1):
            powers.append(powers[-1] @ M2)
        U = M @ sum(c[j] * powers[j // 2] for j in range(1, m + 1, 2))
        V = sum(c[j] * powers[j // 2] for j in range(0, m + 1, 2))
    return solve(V - U, V + U)


def expm(M):
    """Matrix exponential by scaling and squaring with diagonal Pade approximants.

    The lowest degree in {3, 5, 7, 9, 13} whose threshold covers ``||M||_1`` is
    used; larger matrices are scaled by a power of two so that the degree-13
    approximant applies, and the result is squared back.

    Parameters
    ----------
    M : array_like, shape (m, m)

    Returns
    -------
    numpy.ndarray
        ``exp(M)``.
    """
    M = _check_square(M)
    n = M.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    norm = np.abs(M).sum(axis=0).max()
    for m in (3, 5, 7, 9):
        if norm <= PADE_THETA[m]:
            return _pade(M, m)
    s = 0
    if norm > PADE_THETA[13]:
        s = max(0, math.ceil(math.log2(norm / PADE_THETA[13])))
    E = _pade(M / 2.0**s, 13)
    for _ in range(s):
        E = E @ E
    return E


def hessenberg_inverse(H):
    """Invert an upper-Hessenberg matrix.

    Gaussian elimination with partial pivoting only has to look at one
    subdiagonal entry per column, so the factorization costs ``O(m^2)`` and
    the inverse is finished with a triangular solve.

    Raises
    ------
    BreakdownError
        If a pivot falls below ``1e-14 * ||H||_1``.
    """
    H = _check_square(H, "Hessenberg matrix")
    n = H.shape[0]
    if np.any(np.tril(H, -2)):
        raise ValueError("matrix is not upper Hessenberg")
    U = H.copy()
    R = np.eye(n)
    threshold = 1e-14 * np.abs(H).sum(axis=0).max()
    for k in range(n - 1):
        if abs(U[k + 1, k]) > abs(U[k, k]):
            U[[k, k + 1], k:] = U[[k + 1, k], k:]
            R[[k, k + 1], :] = R[[k + 1, k], :]
        if abs(U[k, k]) <= threshold:
            raise BreakdownError(f"Hessenberg pivot {k} is {U[k, k]:.3e}")
        l = U[k + 1, k] / U[k, k]
        U[k + 1, k:] -= l * U[k, k:]
        U[k + 1, k] = 0.0
        R[k + 1, :] -= l * R[k, :]
    if abs(U[n - 1, n - 1]) <= threshold:
        raise BreakdownError(f"Hessenberg pivot {n - 1} is {U[n - 1, n - 1]:.3e}")
    return solve_triangular(U, R, lower=False)
