"""Dense float64 kernels for Laplacian pseudoinverses and Lyapunov equations.

Matrices are plain C-ordered ``numpy.ndarray`` (float64). Every public
function rejects non-finite input and checks its output.
"""
from __future__ import annotations

import logging

import numpy as np

from . import kernels
from .kernels import SingularMatrixError

log = logging.getLogger(__name__)

SOLVE_RTOL = 1e-8
SIGN_STEP_TOL = 1e-12
SIGN_MAX_ITER = 100
LYAP_RESIDUAL_TOL = 1e-8

__all__ = [
    "SingularMatrixError",
    "LyapunovError",
    "solve_linear_system",
    "inverse",
    "laplacian_pseudoinverse",
    "orthonormal_complement_basis",
    "lyapunov_solve",
    "lyapunov_residual",
]


class LyapunovError(ArithmeticError):
    pass


def _finite(name, a):
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN or Inf")
    return a


def solve_linear_system(a, b):
    """Solve ``a @ x = b`` by Gaussian elimination with partial pivoting.

    Raises SingularMatrixError for a pivot below ``1e-12 * max|a|`` and
    ArithmeticError if the residual exceeds ``1e-8 * (1 + max|b|)``.
    """
    a = _finite("a", a)
    b = _finite("b", b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"a must be square, got {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"row mismatch: a is {a.shape}, b is {b.shape}")
    lu, piv = kernels.lu_factor(a)
    x = kernels.lu_solve(lu, piv, b)
    resid = np.max(np.abs(a @ x - b)) if x.size else 0.0
    bound = SOLVE_RTOL * (1.0 + (np.max(np.abs(b)) if b.size else 0.0))
    if not np.isfinite(resid) or resid > bound:
        raise ArithmeticError(f"solve residual {resid:.3e} exceeds {bound:.3e}")
    return x


def inverse(a):
    a = _finite("a", a)
    return solve_linear_system(a, np.eye(a.shape[0]))


def laplacian_pseudoinverse(lap):
    """Moore-Penrose pseudoinverse of a connected graph Laplacian.

    Uses the rank-one shift ``(L + J/n)^{-1} - J/n`` with J the all-ones
    matrix, which is exact when the null space of L is spanned by the ones
    vector. Disconnected input fails the ``L L^+ L = L`` check.
    """
    lap = _finite("laplacian", lap)
    n = lap.shape[0]
    if n == 1:
        return np.zeros((1, 1))
    shift = np.full((n, n), 1.0 / n)
    try:
        pinv = inverse(lap + shift) - shift
    except ArithmeticError as exc:
        raise ArithmeticError("Laplacian pseudoinverse failed; graph disconnected?") from exc
    pinv = 0.5 * (pinv + pinv.T)
    scale = max(1.0, float(np.max(np.abs(lap))))
    err = np.max(np.abs(lap @ pinv @ lap - lap))
    if err > 1e-8 * scale:
        raise ArithmeticError(
            f"L L^+ L != L (error {err:.3e}); the graph is probably disconnected"
        )
    return pinv


def orthonormal_complement_basis(n: int):
    """Helmert basis: (n-1, n) matrix with orthonormal rows spanning the complement of ones.

    Row k (1-based) is ``(1, ..., 1, -k, 0, ..., 0) / sqrt(k (k + 1))`` with k ones.
    """
    if n < 2:
        raise ValueError("orthonormal complement basis needs n >= 2")
    q = np.zeros((n - 1, n))
    for k in range(1, n):
        q[k - 1, :k] = 1.0
        q[k - 1, k] = -float(k)
        q[k - 1] /= np.sqrt(k * (k + 1.0))
    return q


def lyapunov_residual(a, sigma):
    """``max |a sigma + sigma a^T - I|``."""
    return float(np.max(np.abs(a @ sigma + sigma @ a.T - np.eye(a.shape[0]))))


def _sign_solve(a, rhs):
    # sign([[A, -C], [0, -A^T]]) = [[I, -2X], [0, -I]] for A X + X A^T = C when
    # A has its spectrum in the open right half-plane. The block-triangular
    # structure is preserved by Z <- (Z + Z^{-1})/2, so only the (1,1) and
    # (1,2) blocks are iterated; the (2,2) block stays -(1,1)^T.
    m = a.shape[0]
    z11 = a.copy()
    z12 = -rhs.copy()
    for it in range(1, SIGN_MAX_ITER + 1):
        try:
            inv11 = inverse(z11)
        except ArithmeticError as exc:
            raise LyapunovError(
                "sign iteration hit a singular iterate; the matrix has eigenvalues "
                "on or near the imaginary axis"
            ) from exc
        # Z^{-1} of [[P, E], [0, -P^T]] is [[P^-1, P^-1 E P^-T], [0, -P^-T]]
        new11 = 0.5 * (z11 + inv11)
        new12 = 0.5 * (z12 + inv11 @ z12 @ inv11.T)
        step = max(np.max(np.abs(new11 - z11)), np.max(np.abs(new12 - z12)))
        scale = max(1.0, np.max(np.abs(new11)), np.max(np.abs(new12)))
        z11, z12 = new11, new12
        if not (np.all(np.isfinite(z11)) and np.all(np.isfinite(z12))):
            raise LyapunovError(f"sign iteration diverged at step {it}")
        if step <= SIGN_STEP_TOL * scale:
            if np.max(np.abs(z11 - np.eye(m))) > 1e-6:
                raise LyapunovError(
                    "sign iteration converged to a non-identity block; the matrix "
                    "is not positive stable"
                )
            log.debug("sign iteration converged in %d steps", it)
            return -0.5 * z12
    raise LyapunovError(f"sign iteration did not converge in {SIGN_MAX_ITER} steps")


def lyapunov_solve(a, max_refinements: int = 2):
    """Solve ``a S + S a^T = I`` for positive-stable ``a`` (all eigenvalues Re > 0).

    Uses the Newton iteration for the matrix sign function of the 2m x 2m
    block matrix ``[[a, -I], [0, -a^T]]``. A failed residual check triggers
    up to ``max_refinements`` correction solves on the residual.
    """
    a = _finite("a", a)
    m = a.shape[0]
    if a.ndim != 2 or a.shape[1] != m:
        raise ValueError(f"a must be square, got {a.shape}")
    eye = np.eye(m)
    sigma = _sign_solve(a, eye)
    sigma = 0.5 * (sigma + sigma.T)
    for _ in range(max_refinements):
        resid = lyapunov_residual(a, sigma)
        if resid <= LYAP_RESIDUAL_TOL:
            break
        log.debug("Lyapunov residual %.3e, refining", resid)
        corr = _sign_solve(a, eye - (a @ sigma + sigma @ a.T))
        sigma = sigma + 0.5 * (corr + corr.T)
    resid = lyapunov_residual(a, sigma)
    if resid > LYAP_RESIDUAL_TOL:
        raise LyapunovError(f"Lyapunov residual {resid:.3e} exceeds {LYAP_RESIDUAL_TOL}")
    return sigma
