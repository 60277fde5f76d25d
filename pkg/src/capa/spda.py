"""Discrete-array baseline sharing the Gram-matrix code path.

A spatially discrete array with channel matrix ``H`` (``N_d x K``) behaves
exactly like an aperture whose Gram matrix is ``H^H H``: coefficient
matrices ``A`` give precoders ``W = H A`` and every metric follows from
``H^H H`` and ``A``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .metrics import hermitian_part, sum_rate
from .optimizer import PolyblockResult, polyblock_maximize

__all__ = ["spda_gram", "precoder", "table_one_directions", "spda_optimal"]


def spda_gram(H: np.ndarray) -> np.ndarray:
    """``H^H H``, symmetrized."""
    H = np.asarray(H, dtype=complex)
    return hermitian_part(H.conj().T @ H)


def precoder(H: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Antenna-domain precoder ``W = H A`` (``N_d x K``)."""
    return np.asarray(H) @ np.asarray(A)


def table_one_directions(kind: str, H: np.ndarray, noise_power: float, power_budget: float) -> np.ndarray:
    """Unnormalized antenna-domain directions ``H Phi`` of the classic precoders.

    ``kind`` is ``"mrt"`` (``H``), ``"zf"`` (``H (H^H H)^{-1}``) or
    ``"mmse"`` (``H (I + P/(K sigma^2) H^H H)^{-1}``). Computed directly from
    ``H`` without going through the shared Gram-matrix functions.
    """
    H = np.asarray(H, dtype=complex)
    K = H.shape[1]
    HH = H.conj().T @ H
    if kind == "mrt":
        return H.copy()
    if kind == "zf":
        return H @ np.linalg.inv(HH)
    if kind == "mmse":
        return H @ np.linalg.inv(np.eye(K) + power_budget / (K * noise_power) * HH)
    raise ValueError(f"unknown design {kind!r}")


def spda_optimal(
    H: np.ndarray,
    noise_power: float,
    power_budget: float,
    utility: Callable[[np.ndarray], float] = sum_rate,
    eps_gap: float = 1e-2,
    **kwargs,
) -> tuple[PolyblockResult, np.ndarray]:
    """Globally optimal discrete-array precoder.

    Returns the polyblock result (on ``Q = H^H H``) and ``W = H A*``.
    """
    result = polyblock_maximize(spda_gram(H), noise_power, power_budget, utility, eps_gap, **kwargs)
    return result, precoder(H, result.coefficients)
