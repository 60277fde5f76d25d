"""Per-user power allocation for the heuristic designs.

Sum-rate allocation treats each user's unit-power direction as an
interference-free scalar channel with gain ``g_k = |q_k^H phi_k|^2`` and
water-fills over those gains. This is the exact optimum for ZF directions
and a heuristic for MRT/MMSE, whose leakage it ignores.
"""

from __future__ import annotations

import numpy as np

from .beamformers import mmse, mrt, zf
from .errors import DomainError

__all__ = [
    "HEURISTICS",
    "waterfill_sum_rate",
    "equal_power",
    "effective_gains",
    "heuristic_design",
]

HEURISTICS = ("mrt", "zf", "mmse")


def waterfill_sum_rate(gains, noise_power: float, total_power: float, tol: float = 1e-12) -> np.ndarray:
    """Water-filling ``p_k = max(0, mu - noise_power / g_k)`` with ``sum(p) = total_power``.

    Parameters
    ----------
    gains : array_like
        Non-negative effective gains. Users with zero gain get no power.
    noise_power : float
    total_power : float
    tol : float
        Bisection stops once the water-level bracket is below ``tol * total_power``;
        the level is then recomputed in closed form on the identified active set.

    Returns
    -------
    ndarray
        Power per user, summing to ``total_power``.
    """
    g = np.asarray(gains, dtype=float)
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise DomainError("gains must be finite and non-negative")
    if not np.any(g > 0):
        raise DomainError("all effective gains are zero")
    if total_power <= 0 or noise_power <= 0:
        raise DomainError("total_power and noise_power must be positive")

    active = g > 0
    floor = np.full(g.shape, np.inf)
    floor[active] = noise_power / g[active]

    def allocated(mu):
        return np.maximum(0.0, mu - floor)

    lo, hi = floor.min(), floor.min() + total_power
    while hi - lo > tol * total_power:
        mu = (lo + hi) / 2
        if mu in (lo, hi):  # bracket is one ulp wide
            break
        if allocated(mu).sum() > total_power:
            hi = mu
        else:
            lo = mu

    on = floor < hi
    mu = (total_power + floor[on].sum()) / on.sum()
    p = allocated(mu)
    # a user at the cut-off may have flipped sign after the closed-form update
    while np.any(p[on] <= 0) and on.sum() > 1:
        on &= floor < mu
        mu = (total_power + floor[on].sum()) / on.sum()
        p = allocated(mu)
    return p


def equal_power(total_power: float, num_users: int) -> np.ndarray:
    if num_users < 1:
        raise DomainError("num_users must be >= 1")
    return np.full(num_users, total_power / num_users)


def effective_gains(Q: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """``|[Q Phi]_{kk}|^2`` for unit-power direction columns ``Phi``."""
    return np.abs(np.diag(np.asarray(Q) @ directions)) ** 2


def _directions(kind: str, Q: np.ndarray, noise_power: float, power_budget: float) -> np.ndarray:
    ones = np.ones(Q.shape[0])
    if kind == "mrt":
        return mrt(Q, ones)
    if kind == "zf":
        return zf(Q, ones)
    if kind == "mmse":
        return mmse(Q, power_budget, noise_power, ones)
    raise DomainError(f"unknown heuristic design {kind!r}; expected one of {HEURISTICS}")


def heuristic_design(
    kind: str,
    Q: np.ndarray,
    noise_power: float,
    power_budget: float,
    allocation: str = "waterfill",
) -> np.ndarray:
    """Coefficients of an MRT/ZF/MMSE design with power allocated.

    ``allocation`` is ``"waterfill"`` (sum-rate heuristic) or ``"equal"``.
    The radiated power equals ``power_budget``.
    """
    Q = np.asarray(Q, dtype=complex)
    directions = _directions(kind, Q, noise_power, power_budget)
    if allocation == "waterfill":
        p = waterfill_sum_rate(effective_gains(Q, directions), noise_power, power_budget)
    elif allocation == "equal":
        p = equal_power(power_budget, Q.shape[0])
    else:
        raise DomainError(f"unknown allocation {allocation!r}")
    return directions * np.sqrt(p)
