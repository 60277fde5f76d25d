"""Beamformer coefficient matrices in the channel span.

Heuristic designs (MRT, ZF, MMSE) are built from a direction matrix whose
columns are first scaled to unit radiated power (``phi_k^H Q phi_k = 1``) and
then multiplied by ``sqrt(p_k)``, so ``p_k`` is exactly the power spent on
user ``k``. The structured optimum ``(I + Lambda Q / sigma^2)^{-1} P^{1/2}``
is returned without that normalization.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .aperture import QuadratureGrid
from .channel import ChannelSamples
from .errors import DomainError, IllConditionedError

__all__ = [
    "DEFAULT_MAX_CONDITION",
    "unit_power_columns",
    "mrt",
    "zf",
    "mmse",
    "optimal_structure",
    "operator_inverse_matrix",
    "verify_operator_inverse",
]

DEFAULT_MAX_CONDITION = 1e12


def _as_power(p, K: int) -> np.ndarray:
    p = np.broadcast_to(np.asarray(p, dtype=float), (K,))
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise DomainError("powers must be finite and non-negative")
    return p


def unit_power_columns(Q: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Rescale each column ``phi_k`` so that ``phi_k^H Q phi_k = 1``."""
    norms = np.real(np.einsum("ik,ij,jk->k", directions.conj(), Q, directions))
    if np.any(norms <= 0):
        k = int(np.argmin(norms))
        raise DomainError(f"direction {k} radiates no power (degenerate channel)")
    return directions / np.sqrt(norms)


def mrt(Q: np.ndarray, p) -> np.ndarray:
    """Maximum ratio transmission, ``w_k = sqrt(p_k) h_k / |h_k|``."""
    Q = np.asarray(Q, dtype=complex)
    K = Q.shape[0]
    p = _as_power(p, K)
    if np.any(np.real(np.diag(Q)) <= 0):
        raise DomainError("MRT needs q_kk > 0 for every user")
    return unit_power_columns(Q, np.eye(K, dtype=complex)) * np.sqrt(p)


def zf(Q: np.ndarray, p, max_condition: float = DEFAULT_MAX_CONDITION) -> np.ndarray:
    """Zero forcing, directions ``Q^{-1}``.

    Raises
    ------
    IllConditionedError
        If ``cond(Q)`` exceeds ``max_condition`` (e.g. near-coincident users).
    """
    Q = np.asarray(Q, dtype=complex)
    K = Q.shape[0]
    p = _as_power(p, K)
    cond = np.linalg.cond(Q)
    if not np.isfinite(cond) or cond > max_condition:
        raise IllConditionedError(
            f"Gram matrix condition number {cond:.3e} exceeds cap {max_condition:.1e}", cond
        )
    directions = scipy.linalg.solve(Q, np.eye(K), assume_a="her")
    return unit_power_columns(Q, directions) * np.sqrt(p)


def mmse(Q: np.ndarray, power_budget: float, noise_power: float, p) -> np.ndarray:
    """Regularized zero forcing, directions ``(I + P/(K sigma^2) Q)^{-1}``."""
    if power_budget <= 0 or noise_power <= 0:
        raise DomainError("power_budget and noise_power must be positive")
    Q = np.asarray(Q, dtype=complex)
    K = Q.shape[0]
    p = _as_power(p, K)
    R = np.eye(K) + power_budget / (K * noise_power) * Q
    directions = scipy.linalg.solve(R, np.eye(K), assume_a="her")
    return unit_power_columns(Q, directions) * np.sqrt(p)


def optimal_structure(Q: np.ndarray, lam, p, noise_power: float) -> np.ndarray:
    """``A = (I + Lambda Q / sigma^2)^{-1} P^{1/2}`` with ``Lambda = diag(lam)``."""
    if noise_power <= 0:
        raise DomainError("noise_power must be positive")
    Q = np.asarray(Q, dtype=complex)
    K = Q.shape[0]
    lam = _as_power(lam, K)
    p = _as_power(p, K)
    R = np.eye(K) + (lam[:, None] * Q) / noise_power
    return scipy.linalg.lu_solve(scipy.linalg.lu_factor(R), np.diag(np.sqrt(p)).astype(complex))


def operator_inverse_matrix(Q: np.ndarray, rho) -> np.ndarray:
    """``D = (I + diag(rho) Q)^{-1}``, the coefficient matrix of the inverse kernel."""
    Q = np.asarray(Q, dtype=complex)
    K = Q.shape[0]
    rho = _as_power(rho, K)
    return np.linalg.inv(np.eye(K) + rho[:, None] * Q)


def verify_operator_inverse(
    Q: np.ndarray, rho, samples: ChannelSamples | np.ndarray, grid: QuadratureGrid
) -> float:
    """Max node-wise relative residual of applying the kernel and its inverse.

    The kernel ``G(s, z) = delta(s - z) + sum_i rho_i h_i(s) conj(h_i(z))`` and
    its closed-form inverse with coefficients ``D = (I + diag(rho) Q)^{-1}``
    are applied to each sampled ``h_k`` in both orders (``G^{-1} G`` and
    ``G G^{-1}``). The delta terms act as the identity on sampled fields; the
    rank-K parts use inner products evaluated by quadrature on ``grid``.
    """
    H = samples.values if isinstance(samples, ChannelSamples) else np.asarray(samples)
    rho = _as_power(rho, H.shape[1])
    D = operator_inverse_matrix(Q, rho)
    weights = grid.weights[:, None]

    def apply_g(F):
        return F + H @ (rho[:, None] * (H.conj().T @ (weights * F)))

    def apply_g_inv(F):
        return F - H @ (D @ (rho[:, None] * (H.conj().T @ (weights * F))))

    scale = np.abs(H)
    worst = 0.0
    for out in (apply_g_inv(apply_g(H)), apply_g(apply_g_inv(H))):
        worst = max(worst, float(np.max(np.abs(out - H) / scale)))
    return worst
