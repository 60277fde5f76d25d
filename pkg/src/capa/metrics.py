"""Channel Gram matrix and performance metrics.

Every beamformer handled by the library lives in the channel span,
``w(s) = h(s) @ A`` for a ``K x K`` coefficient matrix ``A``. All received
amplitudes then follow from the Gram matrix ``Q`` alone:

    M = Q @ A,    M[k, i] = integral conj(h_k(s)) w_i(s) ds

so SINR, SLNR and radiated power never touch the quadrature nodes again.
The same functions serve discrete arrays with ``Q = H^H H``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .aperture import QuadratureGrid
from .channel import ChannelSamples
from .errors import DomainError

__all__ = [
    "correlation_matrix",
    "hermitian_part",
    "received_amplitudes",
    "sinr",
    "slnr",
    "transmit_power",
    "sum_rate",
    "average_rate",
    "beamforming_gain_capa",
    "beamforming_gain_spda",
    "multiplexing_gain_estimate",
]


def hermitian_part(Q: np.ndarray) -> np.ndarray:
    """``(Q + Q^H) / 2``."""
    Q = np.asarray(Q, dtype=complex)
    return (Q + Q.conj().T) / 2


def correlation_matrix(grid: QuadratureGrid, samples: ChannelSamples | np.ndarray) -> np.ndarray:
    """Gram matrix ``Q[k, i] = integral h_i(s) conj(h_k(s)) ds``.

    Parameters
    ----------
    grid : QuadratureGrid
    samples : ChannelSamples or ndarray
        Channel values of shape ``(nodes, K)``.

    Returns
    -------
    ndarray
        Hermitian ``K x K`` matrix in ohm^2 m^2.
    """
    H = samples.values if isinstance(samples, ChannelSamples) else np.asarray(samples)
    if H.ndim != 2 or H.shape[0] != grid.size:
        raise DomainError(f"channel samples must have shape ({grid.size}, K), got {H.shape}")
    Q = H.conj().T @ (grid.weights[:, None] * H)
    return hermitian_part(Q)


def received_amplitudes(Q: np.ndarray, A: np.ndarray) -> np.ndarray:
    """``M = Q A``; entry ``[k, i]`` is user ``i``'s beam as seen by user ``k``."""
    Q = np.asarray(Q)
    A = np.asarray(A)
    if Q.ndim != 2 or A.ndim != 2 or Q.shape[1] != A.shape[0]:
        raise DomainError(f"shapes {Q.shape} and {A.shape} are not conformable")
    return Q @ A


def sinr(Q: np.ndarray, A: np.ndarray, noise_power: float) -> np.ndarray:
    """Per-user SINR of the beamformer ``w = h A``."""
    if noise_power <= 0:
        raise DomainError("noise_power must be positive")
    G = np.abs(received_amplitudes(Q, A)) ** 2
    signal = np.diag(G)
    interference = G.sum(axis=1) - signal
    return signal / (interference + noise_power)


def slnr(Q: np.ndarray, A: np.ndarray, noise_power: float) -> np.ndarray:
    """Per-user signal-to-leakage-plus-noise ratio.

    Leakage of user ``k`` is the power its beam delivers to every other user,
    i.e. the off-diagonal part of column ``k`` of ``M``.
    """
    if noise_power <= 0:
        raise DomainError("noise_power must be positive")
    G = np.abs(received_amplitudes(Q, A)) ** 2
    signal = np.diag(G)
    leakage = G.sum(axis=0) - signal
    return signal / (leakage + noise_power)


def transmit_power(Q: np.ndarray, A: np.ndarray) -> float:
    """Radiated power ``sum_k a_k^H Q a_k`` in A^2."""
    A = np.asarray(A)
    return float(np.real(np.einsum("ik,ij,jk->", A.conj(), np.asarray(Q), A)))


def sum_rate(gamma) -> float:
    """``sum_k log2(1 + gamma_k)`` in bit/s/Hz."""
    return float(np.sum(np.log2(1 + np.asarray(gamma, dtype=float))))


def average_rate(gamma) -> float:
    gamma = np.asarray(gamma, dtype=float)
    return sum_rate(gamma) / gamma.size


def beamforming_gain_capa(Q: np.ndarray) -> float:
    """Mean integrated channel power ``(1/K) sum_k q_kk``."""
    return float(np.mean(np.real(np.diag(Q))))


def beamforming_gain_spda(H: np.ndarray) -> float:
    """Mean squared channel norm ``(1/K) sum_k |h_k|^2`` of an ``N x K`` matrix."""
    H = np.asarray(H)
    return float(np.mean(np.sum(np.abs(H) ** 2, axis=0)))


def multiplexing_gain_estimate(
    design: Callable[[np.ndarray, float, float], np.ndarray],
    Q: np.ndarray,
    noise_power: float,
    p_lo: float,
    p_hi: float,
) -> float:
    """Slope of sum rate against ``log2(P)`` between two power budgets.

    ``design(Q, noise_power, power_budget)`` must return coefficients ``A``.
    Both budgets should sit well inside the high-SNR regime for the slope to
    approximate the asymptotic multiplexing gain.
    """
    if not 0 < p_lo < p_hi:
        raise DomainError("need 0 < p_lo < p_hi")
    rates = []
    for power in (p_lo, p_hi):
        gamma = sinr(Q, design(Q, noise_power, power), noise_power)
        rate = sum_rate(gamma)
        if not np.isfinite(rate):
            raise DomainError(f"non-finite sum rate at P = {power}")
        rates.append(rate)
    return (rates[1] - rates[0]) / (np.log2(p_hi) - np.log2(p_lo))
