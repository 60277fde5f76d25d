"""Globally optimal beamforming by monotonic optimization.

Three layers:

* ``fixed_point_lambda`` solves the SINR-constrained power minimization
  through its Lagrange multipliers. With ``D = (I + Lambda Q / sigma^2)^{-1}``
  the multipliers are the fixed point of

      lambda_k = sigma^2 / ((1 + 1/t_k) [Q D]_{kk})

  and the minimum power is ``sum(lambda)``.
* ``project_onto_G`` bisects along the ray ``alpha * z`` for the largest
  SINR vector reachable within the power budget.
* ``polyblock_maximize`` runs the polyblock outer approximation over the
  SINR region, keeping an upper bound ``U_max`` (best vertex) and a lower
  bound ``U_min`` (best feasible projection).

Started from ``lambda_k = sigma^2 t_k / q_kk`` the map above is monotone and
the iterates increase towards the fixed point, so a running ``sum(lambda)``
above the budget proves infeasibility without finishing the iteration.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from .beamformers import optimal_structure
from .errors import ConvergenceError, DomainError
from .metrics import sum_rate

__all__ = [
    "PowerMinimum",
    "ProjectionResult",
    "TraceRow",
    "PolyblockResult",
    "fixed_point_lambda",
    "min_power_for_targets",
    "project_onto_G",
    "initial_box",
    "polyblock_maximize",
    "write_trace_csv",
]

FIXED_POINT_TOL = 1e-10
FIXED_POINT_MAX_ITER = 10_000
NEWTON_AFTER = 25
REDUCTION_MARGIN = 0.9


@dataclass
class PowerMinimum:
    """Solution of the power minimization for a vector of SINR targets.

    ``power`` equals ``sum(lam)``; ``coefficients`` is the recovered ``A``
    whose SINRs meet ``targets`` with equality.
    """

    targets: np.ndarray
    lam: np.ndarray
    power: float
    coefficients: np.ndarray
    iterations: int = 0


@dataclass
class ProjectionResult(PowerMinimum):
    """Boundary point ``alpha * z`` of the SINR region.

    ``alpha`` is the feasible end of the final bisection bracket and
    ``alpha_upper`` the infeasible end.
    """

    alpha: float = 0.0
    alpha_upper: float = 1.0


@dataclass
class TraceRow:
    n: int
    upper: float
    lower: float
    vertex_count: int
    wall_time_ms: float


@dataclass
class PolyblockResult:
    theta: np.ndarray
    coefficients: np.ndarray
    utility: float
    upper: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list, repr=False)

    @property
    def gap(self) -> float:
        return self.upper - self.utility


def _lambda_map(Q, noise_power, factor, lam):
    """One sweep ``lambda -> sigma^2 / ((1 + 1/t) diag(Q (I + Lambda Q / sigma^2)^{-1}))``."""
    R = np.eye(Q.shape[0]) + lam[:, None] * Q / noise_power
    # diag(Q R^{-1}) = diag of the transposed solve, Q Hermitian
    diag = np.real(np.diag(np.linalg.solve(R.T, Q.T)))
    return noise_power / (factor * diag)


def _lambda_iteration(Q, noise_power, targets, lam0, tol, max_iter, power_cap=None, warmup=NEWTON_AFTER):
    """Solve for the multipliers. Returns ``(lam, residual, sweeps, exceeded)``.

    Plain sweeps run first; from a lower bound they increase monotonically,
    so crossing ``power_cap`` proves infeasibility early. If they have not
    converged after ``warmup`` sweeps, the fixed point is polished by a
    root solve in ``log(lambda)`` and checked with one more sweep; plain
    sweeps resume if that fails.
    """
    factor = 1.0 + 1.0 / targets
    lam = lam0
    residual = np.inf
    n = 0
    while n < max_iter:
        n += 1
        new = _lambda_map(Q, noise_power, factor, lam)
        residual = float(np.max(np.abs(new - lam) / new))
        lam = new
        if power_cap is not None and lam.sum() > power_cap:
            return lam, residual, n, True
        if residual < tol:
            return lam, residual, n, False
        if n == warmup:
            polished = _newton_polish(Q, noise_power, factor, lam, tol)
            if polished is not None:
                lam_p, residual_p, evals = polished
                n += evals
                exceeded = power_cap is not None and lam_p.sum() > power_cap
                return lam_p, residual_p, n, exceeded
    return lam, residual, n, False


def _newton_polish(Q, noise_power, factor, lam, tol):
    def residual_log(x):
        return x - np.log(_lambda_map(Q, noise_power, factor, np.exp(x)))

    with np.errstate(all="ignore"):
        sol = scipy.optimize.root(residual_log, np.log(lam), method="hybr", options={"xtol": 1e-14})
        if not np.all(np.isfinite(sol.x)):
            return None
        candidate = np.exp(sol.x)
        new = _lambda_map(Q, noise_power, factor, candidate)
    if not np.all(np.isfinite(new)) or np.any(new <= 0):
        return None
    residual = float(np.max(np.abs(new - candidate) / new))
    if not residual < tol:
        return None
    return new, residual, int(sol.nfev) + 1


def _check_targets(Q, targets) -> tuple[np.ndarray, np.ndarray]:
    Q = np.asarray(Q, dtype=complex)
    t = np.asarray(targets, dtype=float).reshape(-1)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] != t.size:
        raise DomainError(f"targets of length {t.size} do not match Q of shape {Q.shape}")
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DomainError("SINR targets must be finite and non-negative")
    return Q, t


def fixed_point_lambda(
    Q: np.ndarray,
    noise_power: float,
    targets,
    tol: float = FIXED_POINT_TOL,
    max_iter: int = FIXED_POINT_MAX_ITER,
    initial=None,
) -> np.ndarray:
    """Lagrange multipliers of the minimum-power problem for SINR ``targets``.

    Parameters
    ----------
    Q : ndarray
        Gram matrix.
    noise_power : float
    targets : array_like
        Positive SINR targets.
    tol : float
        Stop when ``max_k |lambda_k - f_k(lambda)| / f_k(lambda) < tol``.
    max_iter : int
    initial : array_like, optional
        Starting point; the default ``sigma^2 t_k / q_kk`` is a lower bound on
        the solution.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` sweeps, carrying the last residual. Infeasible
        targets (singular ``Q``) end here as the iterates diverge.
    """
    Q, t = _check_targets(Q, targets)
    if np.any(t <= 0):
        raise DomainError("fixed_point_lambda needs strictly positive targets")
    q = np.real(np.diag(Q))
    lam0 = noise_power * t / q if initial is None else np.asarray(initial, dtype=float)
    lam, residual, n, _ = _lambda_iteration(Q, noise_power, t, lam0, tol, max_iter)
    if not (residual < tol) or not np.all(np.isfinite(lam)):
        raise ConvergenceError(
            f"fixed point did not converge in {n} sweeps (residual {residual:.3e})", residual, n
        )
    return lam


def _recover_coefficients(Q, noise_power, targets, lam) -> np.ndarray:
    """Column scales of the structured beamformer that make every target bind.

    With unit-scale directions ``D`` and ``G = |Q D|^2`` the binding equations
    ``p_k G_kk / t_k - sum_{i != k} p_i G_ki = sigma^2`` are linear in ``p``.
    """
    K = Q.shape[0]
    D = optimal_structure(Q, lam, np.ones(K), noise_power)
    G = np.abs(Q @ D) ** 2
    system = -G.copy()
    system[np.diag_indices(K)] = np.diag(G) / targets
    p = scipy.linalg.solve(system, np.full(K, noise_power))
    if np.any(p < 0):
        # only possible when lam is not the fixed point for these targets
        raise DomainError("targets are not attainable with the given multipliers")
    return D * np.sqrt(p)


def _embed(active, K, lam_s, A_s):
    lam = np.zeros(K)
    lam[active] = lam_s
    A = np.zeros((K, K), dtype=complex)
    A[np.ix_(active, active)] = A_s
    return lam, A


def min_power_for_targets(
    Q: np.ndarray,
    noise_power: float,
    targets,
    tol: float = FIXED_POINT_TOL,
    max_iter: int = FIXED_POINT_MAX_ITER,
) -> PowerMinimum:
    """Minimum radiated power meeting every SINR target, with its beamformer.

    Users with a zero target are left out of the problem and receive no beam.
    """
    Q, t = _check_targets(Q, targets)
    K = t.size
    active = np.flatnonzero(t > 0)
    if active.size == 0:
        return PowerMinimum(t, np.zeros(K), 0.0, np.zeros((K, K), dtype=complex))
    Qs = Q[np.ix_(active, active)]
    ts = t[active]
    lam_s = fixed_point_lambda(Qs, noise_power, ts, tol=tol, max_iter=max_iter)
    A_s = _recover_coefficients(Qs, noise_power, ts, lam_s)
    lam, A = _embed(active, K, lam_s, A_s)
    return PowerMinimum(t, lam, float(lam.sum()), A)


def initial_box(Q: np.ndarray, power_budget: float, noise_power: float) -> np.ndarray:
    """Single-user SINR bounds ``b_k = P q_kk / sigma^2``."""
    return power_budget * np.real(np.diag(np.asarray(Q))) / noise_power


def project_onto_G(
    Q: np.ndarray,
    noise_power: float,
    power_budget: float,
    z,
    eps_bisect: float = 1e-6,
    tol: float = FIXED_POINT_TOL,
    max_iter: int = FIXED_POINT_MAX_ITER,
) -> ProjectionResult:
    """Project ``z`` onto the SINR region along the ray from the origin.

    Bisects ``alpha`` in ``[0, 1]`` until the bracket is below ``eps_bisect``.
    Each step solves the minimum-power problem for ``alpha * z`` and compares
    ``sum(lambda)`` with the budget. The returned beamformer meets
    ``alpha * z`` exactly, ``alpha`` being the feasible end of the bracket.

    ``z`` must satisfy ``0 <= z <= b`` (the single-user bounds) so that
    ``alpha <= 1`` brackets the boundary.
    """
    Q, z = _check_targets(Q, z)
    K = z.size
    b = initial_box(Q, power_budget, noise_power)
    if np.any(z > b * (1 + 1e-9)):
        raise DomainError("projection needs z <= b elementwise")
    active = np.flatnonzero(z > 0)
    zero = ProjectionResult(
        targets=np.zeros(K), lam=np.zeros(K), power=0.0,
        coefficients=np.zeros((K, K), dtype=complex), alpha=0.0, alpha_upper=1.0,
    )
    if active.size == 0:
        return zero
    Qs = Q[np.ix_(active, active)]
    zs = z[active]
    q = np.real(np.diag(Qs))

    lo, hi = 0.0, 1.0
    best_lam = None
    total_sweeps = 0
    while hi - lo > eps_bisect:
        alpha = (lo + hi) / 2
        t = alpha * zs
        start = noise_power * t / q
        if best_lam is not None:
            # a solution for a smaller alpha is still a lower bound
            start = np.maximum(start, best_lam)
        lam, residual, n, exceeded = _lambda_iteration(Qs, noise_power, t, start, tol, max_iter, power_budget)
        total_sweeps += n
        if exceeded:
            hi = alpha
            continue
        if not residual < tol:
            raise ConvergenceError(
                f"fixed point did not converge at alpha={alpha:.6g} (residual {residual:.3e})",
                residual, n,
            )
        if lam.sum() <= power_budget:
            lo, best_lam = alpha, lam
        else:
            hi = alpha

    if best_lam is None:
        zero.alpha_upper = hi
        zero.iterations = total_sweeps
        return zero
    t = lo * zs
    A_s = _recover_coefficients(Qs, noise_power, t, best_lam)
    lam, A = _embed(active, K, best_lam, A_s)
    return ProjectionResult(
        targets=lo * z, lam=lam, power=float(lam.sum()), coefficients=A,
        iterations=total_sweeps, alpha=lo, alpha_upper=hi,
    )


def _negligible(utility, v, k, eps_snap) -> bool:
    if eps_snap <= 0:
        return False
    face = v.copy()
    face[k] = 0.0
    return utility(v) - utility(face) <= eps_snap


def _lower_corner(utility, v, level) -> np.ndarray:
    """Smallest ``a <= v`` with ``U(theta) >= level`` only if ``theta >= a`` (for ``theta <= v``).

    ``a_k`` is the least ``theta_k`` that still reaches ``level`` with every
    other coordinate at its vertex value. Requires ``U(v) >= level``.
    """
    a = np.zeros_like(v)
    if utility is sum_rate:
        rates = np.log2(1 + v)
        need = level - (rates.sum() - rates)
        return np.clip(np.exp2(need) - 1, 0.0, v)
    for k in range(v.size):
        low = v.copy()
        low[k] = 0.0
        if utility(low) >= level:
            continue
        lo, hi = 0.0, v[k]
        for _ in range(60):
            mid = (lo + hi) / 2
            low[k] = mid
            if utility(low) >= level:
                hi = mid
            else:
                lo = mid
        a[k] = lo
    return a


def _within_budget(Q, noise_power, power_budget, targets, tol, max_iter) -> bool:
    active = np.flatnonzero(targets > 0)
    if active.size == 0:
        return True
    Qs = Q[np.ix_(active, active)]
    t = targets[active]
    lam0 = noise_power * t / np.real(np.diag(Qs))
    lam, residual, n, exceeded = _lambda_iteration(Qs, noise_power, t, lam0, tol, max_iter, power_budget)
    if exceeded:
        return False
    if not residual < tol:
        raise ConvergenceError(f"fixed point did not converge (residual {residual:.3e})", residual, n)
    return lam.sum() <= power_budget


def _reduce_vertex(Q, noise_power, power_budget, utility, z, level, rel_tol=1e-6, passes=3):
    """Shrink vertex ``z`` to the smallest box holding every feasible ``theta <= z`` with ``U >= level``.

    Returns ``None`` if no such point exists. Each coordinate is lowered to
    the infeasible end of a bisection, so the result still covers them all.
    """

    def feasible(t):
        return _within_budget(Q, noise_power, power_budget, t, FIXED_POINT_TOL, FIXED_POINT_MAX_ITER)

    v = z.copy()
    if utility(v) < level:
        return None
    a = _lower_corner(utility, v, level)
    if not feasible(a):
        return None
    for _ in range(passes):
        # a smaller v raises the lower corner, which may allow further cuts
        changed = False
        for k in range(v.size):
            a = _lower_corner(utility, v, level)
            probe = a.copy()
            probe[k] = v[k]
            if v[k] <= a[k] or feasible(probe):
                continue
            lo, hi = a[k], v[k]
            while hi - lo > rel_tol * v[k]:
                probe[k] = (lo + hi) / 2
                if feasible(probe):
                    lo = probe[k]
                else:
                    hi = probe[k]
            changed |= hi < v[k]
            v[k] = hi
        if not changed:
            break
    return v


def polyblock_maximize(
    Q: np.ndarray,
    noise_power: float,
    power_budget: float,
    utility: Callable[[np.ndarray], float] = sum_rate,
    eps_gap: float = 1e-2,
    max_iter: int = 5000,
    eps_bisect: float = 1e-6,
    eps_vertex: float = 1e-9,
    eps_snap: float | None = None,
    reduce: bool = True,
    polish_bisect: float | None = 1e-12,
    initial_points: Sequence | None = None,
    callback: Callable[[TraceRow], None] | None = None,
) -> PolyblockResult:
    """Maximize a strictly increasing ``utility`` of the SINRs over the region.

    Parameters
    ----------
    Q : ndarray
        Gram matrix (continuous aperture or ``H^H H``).
    noise_power, power_budget : float
    utility : callable
        Must be strictly increasing in every SINR; defaults to the sum rate.
    eps_gap : float
        Stop once ``U_max - U_min <= eps_gap``.
    max_iter : int
        Iteration cap (one projection per iteration); the best incumbent is
        returned with ``converged=False``.
    eps_bisect : float
        Bracket width of each projection.
    eps_vertex : float
        Vertex coordinates at or below ``eps_vertex * b_k`` are set to zero.
    eps_snap : float, optional
        A reduced coordinate is also set to zero when doing so lowers the
        vertex utility by at most ``eps_snap`` (default ``eps_gap / 100``).
        This stops vertices creeping geometrically towards a face of the
        region.
    reduce : bool
        Before a vertex is expanded, shrink it to the smallest box that
        still holds every feasible point of its box with
        ``U >= U_min + 0.9 eps_gap``, or discard it if there is none.
        Without this step vertices next to the region boundary shrink by a
        factor close to one per expansion and the bounds stall.
    polish_bisect : float or None
        The incumbent's ray is bisected once more to this width at the end so
        the returned beamformer spends the budget to near machine precision.
        ``None`` keeps the incumbent as found.
    initial_points : sequence of array_like, optional
        Feasible SINR vectors (e.g. those of a heuristic design) used to seed
        the incumbent. Each ray is projected onto the region boundary at
        ``polish_bisect`` precision, so the returned utility is not below
        theirs.
    callback : callable, optional
        Called with every ``TraceRow``.

    Returns
    -------
    PolyblockResult
        Incumbent SINR vector ``theta`` with its beamformer, the final bounds
        and the per-iteration trace.

    Notes
    -----
    The highest-utility vertex is expanded each iteration (ties go to the
    lowest index). New vertices are cut at the infeasible end of the
    projection bracket so the polyblock keeps containing the region, while
    the incumbent uses the feasible end. New vertices dominated by an
    existing vertex are discarded. Only positive coordinates are cut: a zero
    coordinate already sits on the face of the region.

    ``U_max`` is the larger of the best remaining vertex and, once a vertex
    has been reduced, the reduction level ``U_min + 0.9 eps_gap`` at that
    time. Snapping can make it understate the exact polyblock bound by at
    most ``K * eps_snap``.
    """
    if eps_gap <= 0:
        raise DomainError("eps_gap must be positive")
    if max_iter < 1:
        raise DomainError("max_iter must be >= 1")
    if eps_snap is None:
        eps_snap = eps_gap / 100
    Q = np.asarray(Q, dtype=complex)
    K = Q.shape[0]
    b = initial_box(Q, power_budget, noise_power)
    floor = eps_vertex * b

    vertices = b[None, :].copy()
    values = np.array([utility(b)])
    reduced = np.array([-np.inf])  # level at which each vertex was last reduced
    lower = -np.inf
    ceiling = -np.inf  # bound on the points discarded by reduction
    best: ProjectionResult | None = None
    best_vertex = b
    trace: list[TraceRow] = []
    start = time.perf_counter()
    upper = float(values[0])
    converged = False

    seed_bisect = eps_bisect if polish_bisect is None else min(eps_bisect, polish_bisect)
    for point in initial_points or ():
        ray = np.maximum(np.asarray(point, dtype=float).reshape(-1), 0.0)
        if ray.size != K or not np.any(ray > 0):
            continue
        ray = ray * np.min(b[ray > 0] / ray[ray > 0])
        proj = project_onto_G(Q, noise_power, power_budget, np.minimum(ray, b), eps_bisect=seed_bisect)
        value = float(utility(proj.targets))
        if value > lower:
            lower, best, best_vertex = value, proj, np.minimum(ray, b)

    def current_upper():
        top = float(values.max()) if len(values) else -np.inf
        return min(upper, max(top, ceiling))

    for n in range(1, max_iter + 1):
        idx = int(np.argmax(values))
        if reduce and best is not None:
            # strictly inside the tolerance: reduced boxes keep U >= level, so
            # reducing at lower + eps_gap would leave the gap creeping down to eps_gap
            level = lower + REDUCTION_MARGIN * eps_gap
            while len(values):
                idx = int(np.argmax(values))
                if reduced[idx] >= level - eps_gap / 10 and values[idx] > level:
                    break
                v = None
                if values[idx] > level:
                    v = _reduce_vertex(Q, noise_power, power_budget, utility, vertices[idx], level)
                ceiling = max(ceiling, level)
                if v is None or not np.any(v > 0):
                    vertices = np.delete(vertices, idx, axis=0)
                    values = np.delete(values, idx)
                    reduced = np.delete(reduced, idx)
                    continue
                for k in np.flatnonzero((v > 0) & (v < vertices[idx])):
                    if v[k] <= floor[k] or _negligible(utility, v, k, eps_snap):
                        v[k] = 0.0
                vertices[idx], values[idx], reduced[idx] = v, utility(v), level
            if not len(values):
                upper = current_upper()
                converged = True
                break
        z = vertices[idx]
        upper = current_upper()
        proj = project_onto_G(Q, noise_power, power_budget, np.minimum(z, b), eps_bisect=eps_bisect)
        value = float(utility(proj.targets))
        if value > lower:
            lower, best, best_vertex = value, proj, np.minimum(z, b)

        vertices = np.delete(vertices, idx, axis=0)
        values = np.delete(values, idx)
        reduced = np.delete(reduced, idx)
        cut = proj.alpha_upper * z
        fresh = []
        for k in np.flatnonzero(z > 0):
            v = z.copy()
            v[k] = cut[k]
            if v[k] <= floor[k] or _negligible(utility, v, k, eps_snap):
                # the slab 0 < theta_k <= v_k adds at most eps_snap; fold it into the face
                v[k] = 0.0
            if not np.any(v > 0):
                continue
            if vertices.size and np.any(np.all(vertices >= v, axis=1)):
                continue
            if any(np.all(w >= v) for w in fresh):
                continue
            fresh.append(v)
        if fresh:
            fresh = np.array(fresh)
            vertices = np.vstack([vertices, fresh])
            values = np.concatenate([values, [utility(v) for v in fresh]])
            reduced = np.concatenate([reduced, np.full(len(fresh), -np.inf)])

        row = TraceRow(n, upper, lower, len(values), (time.perf_counter() - start) * 1e3)
        trace.append(row)
        if callback is not None:
            callback(row)
        if upper - lower <= eps_gap or len(values) == 0:
            converged = True
            break

    if converged and trace:
        upper = min(upper, max(current_upper(), lower))
    if polish_bisect is not None and polish_bisect < eps_bisect:
        # same midpoints, more steps: alpha can only grow, so the utility too
        best = project_onto_G(Q, noise_power, power_budget, best_vertex, eps_bisect=polish_bisect)
        lower = max(lower, float(utility(best.targets)))
    upper = max(upper, lower)
    return PolyblockResult(
        theta=best.targets, coefficients=best.coefficients, utility=lower,
        upper=upper, iterations=len(trace), converged=converged, trace=trace,
    )


TRACE_FIELDS = ("n", "U_max", "U_min", "vertex_count", "wall_time_ms")


def write_trace_csv(trace: Sequence[TraceRow], path, timing: bool = True) -> None:
    """Write ``(n, U_max, U_min, vertex_count, wall_time_ms)`` rows.

    With ``timing=False`` the wall-time column is left empty so the file is
    reproducible byte for byte.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_FIELDS)
        for row in trace:
            writer.writerow([
                row.n, repr(row.upper), repr(row.lower), row.vertex_count,
                f"{row.wall_time_ms:.3f}" if timing else "",
            ])
