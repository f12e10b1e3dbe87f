"""Per-Fourier-mode implicit machinery shared by the time integrators.

The stiff linear part of every system here (acoustic coupling, diffusion,
matter-radiation exchange) is block-diagonal over Fourier modes, so the
implicit solve is a batched dense solve with one small complex matrix per
mode, factored once per (matrix, dt) pair.
"""

from __future__ import annotations

import numpy as np

__all__ = ["SolverError", "acoustic_exchange_matrix", "ImexOperator",
           "imex_euler_step", "ars222_step", "ARS_GAMMA", "ARS_DHAT"]

# Two-stage, second-order, L-stable IMEX pair (stiff part SDIRK).
ARS_GAMMA = 1.0 - np.sqrt(0.5)
ARS_DHAT = 1.0 - 1.0 / (2.0 * ARS_GAMMA)


class SolverError(Exception):
    """Implicit factorization or stepping failure."""


def acoustic_exchange_matrix(grid, *, cont, grad_n, grad_t, visc_shear,
                             visc_bulk, div_t, heat_diff, exch_t, exch_g,
                             rad_diff, rad_t, rad_g):
    """Linear symbol of the coupled system at every mode.

    State layout per mode: ``(density-like, velocity-like x dim,
    temperature-like, radiation-like)``.  The rows are::

        n_t   = -cont * i k . v
        v_t   = -grad_n * i k n - grad_t * i k z
                - visc_shear |k|^2 v - visc_bulk k (k . v)
        z_t   = -div_t * i k . v - heat_diff |k|^2 z - exch_t z + exch_g g
        g_t   = rad_t z - rad_diff |k|^2 g - rad_g g

    Returns a complex array of shape ``(s, s, *grid.shape)`` with
    ``s = dim + 3``.
    """
    d = grid.dim
    s = d + 3
    kvec = grid.ik.imag  # Nyquist-zeroed wavenumbers
    ksq = grid.ksq
    M = np.zeros((s, s) + grid.shape, dtype=np.complex128)
    for i in range(d):
        M[0, 1 + i] = -cont * 1j * kvec[i]
        M[1 + i, 0] = -grad_n * 1j * kvec[i]
        M[1 + i, d + 1] = -grad_t * 1j * kvec[i]
        for j in range(d):
            M[1 + i, 1 + j] -= visc_bulk * kvec[i] * kvec[j]
        M[1 + i, 1 + i] -= visc_shear * ksq
        M[d + 1, 1 + i] = -div_t * 1j * kvec[i]
    M[d + 1, d + 1] = -heat_diff * ksq - exch_t
    M[d + 1, d + 2] = exch_g + 0j
    M[d + 2, d + 1] = rad_t + 0j
    M[d + 2, d + 2] = -rad_diff * ksq - rad_g
    return M


class ImexOperator:
    """Batched per-mode application of ``M`` and solve with ``(I - c*M)``.

    Spectral states have shape ``(s, *grid.shape)``; the factorization is
    computed once at construction and reused every step.
    """

    def __init__(self, M: np.ndarray, solve_coeff: float):
        s = M.shape[0]
        self._s = s
        self._field_shape = M.shape[2:]
        Mm = M.reshape(s, s, -1).transpose(2, 0, 1)
        try:
            self._inv = np.linalg.inv(np.eye(s)[None] - solve_coeff * Mm)
        except np.linalg.LinAlgError as exc:
            raise SolverError(
                f"implicit operator I - {solve_coeff!r}*M is singular") from exc
        self._M = Mm

    def _contract(self, mats, X):
        flat = X.reshape(self._s, -1)
        out = np.einsum("mij,jm->im", mats, flat)
        return out.reshape((self._s,) + self._field_shape)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """``M @ X`` per mode."""
        return self._contract(self._M, X)

    def solve(self, X: np.ndarray) -> np.ndarray:
        """``(I - c*M)^{-1} @ X`` per mode."""
        return self._contract(self._inv, X)


def imex_euler_step(op: ImexOperator, X, dt, explicit_fn):
    """First-order IMEX Euler; ``op`` must be factored with ``solve_coeff=dt``."""
    return op.solve(X + dt * explicit_fn(X))


def ars222_step(op: ImexOperator, X, dt, explicit_fn):
    """Second-order two-stage IMEX step; ``op`` factored with ``ARS_GAMMA*dt``."""
    n1 = explicit_fn(X)
    y = op.solve(X + dt * ARS_GAMMA * n1)
    n2 = explicit_fn(y)
    rhs = (X + dt * (ARS_DHAT * n1 + (1.0 - ARS_DHAT) * n2)
           + dt * (1.0 - ARS_GAMMA) * op.apply(y))
    return op.solve(rhs)
