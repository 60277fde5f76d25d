"""Seeded Monte Carlo sweeps comparing aperture and discrete-array designs.

Every sweep draws one scenario per trial from a seed derived from the base
seed and the trial index, so all designs and all grid points of a sweep see
the same users (paired comparisons). Raw rows, per-point aggregates and a
JSON metadata sidecar are written next to each other.

Units are SI throughout: power budgets in A^2 (1 mA^2 = 1e-3 A^2), aperture
areas in m^2.
"""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy

from . import __version__
from .aperture import Aperture, build_grid
from .channel import (
    DEFAULT_APERTURE_AREA,
    DEFAULT_NOISE_POWER,
    DEFAULT_POWER_BUDGET,
    DEFAULT_WAVELENGTH,
    Scenario,
    random_scenario,
    sample_channel,
    spda_array,
    spda_channels,
)
from .errors import ConvergenceError, DomainError
from .metrics import (
    average_rate,
    beamforming_gain_capa,
    beamforming_gain_spda,
    correlation_matrix,
    multiplexing_gain_estimate,
    sinr,
    sum_rate,
    transmit_power,
)
from .optimizer import polyblock_maximize
from .power import HEURISTICS, heuristic_design
from .spda import spda_gram

__all__ = [
    "SWEEPS",
    "DESIGNS",
    "ExperimentConfig",
    "ResultRow",
    "GainRow",
    "trial_seed",
    "run_power_sweep",
    "run_aperture_sweep",
    "run_user_sweep",
    "run_convergence",
    "run_gain_analysis",
    "run_experiment",
    "summarize",
    "write_outputs",
]

SWEEPS = ("power", "aperture", "users", "convergence", "gains")
DESIGNS = ("mrt", "zf", "mmse", "optimal", "spda-mrt", "spda-zf", "spda-mmse", "spda-optimal")
POWER_TOLERANCE = 1e-6


@dataclass
class ExperimentConfig:
    """Parameters of one sweep.

    ``grid`` holds power budgets (A^2) for ``power``, aperture areas (m^2)
    for ``aperture`` and user counts for ``users``, ``convergence`` and
    ``gains``. Scenario fields not swept take the values below.
    """

    sweep: str
    grid: list = field(default_factory=list)
    trials: int = 100
    seed: int = 0
    designs: list = field(default_factory=lambda: ["mrt", "zf", "mmse"])
    quadrature_order: int = 20
    num_users: int = 4
    power_budget: float = DEFAULT_POWER_BUDGET
    per_user_power: float = 0.25e-3
    aperture_area: float = DEFAULT_APERTURE_AREA
    noise_power: float = DEFAULT_NOISE_POWER
    wavelength: float = DEFAULT_WAVELENGTH
    allocation: str = "waterfill"
    eps_gap: float = 1e-2
    max_iter: int = 2000
    eps_bisect: float = 1e-6
    optimal_max_users: int = 3
    allow_large_optimal: bool = False
    large_optimal_eps_gap: float = 5e-2
    gain_powers: list = field(default_factory=lambda: [0.1, 10.0])
    workers: int = 1
    record_timing: bool = False
    output: str | None = None

    def __post_init__(self):
        if self.sweep not in SWEEPS:
            raise DomainError(f"unknown sweep {self.sweep!r}; expected one of {SWEEPS}")
        self.grid = list(self.grid)
        self.designs = list(self.designs)
        self.gain_powers = list(self.gain_powers)
        if not self.grid:
            raise DomainError("grid must be non-empty")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if self.sweep not in ("convergence", "gains"):
            if not self.designs:
                raise DomainError("designs must be non-empty")
            unknown = set(self.designs) - set(DESIGNS)
            if unknown:
                raise DomainError(f"unknown designs {sorted(unknown)}; expected a subset of {DESIGNS}")
        if self.sweep in ("users", "convergence", "gains"):
            if any(int(k) != k or k < 1 for k in self.grid):
                raise DomainError("user counts must be positive integers")
            self.grid = [int(k) for k in self.grid]
        elif any(v <= 0 for v in self.grid):
            raise DomainError("grid values must be positive")
        if self.quadrature_order < 1 or self.workers < 1:
            raise DomainError("quadrature_order and workers must be >= 1")
        if len(self.gain_powers) != 2 or not 0 < self.gain_powers[0] < self.gain_powers[1]:
            raise DomainError("gain_powers must be [P_lo, P_hi] with 0 < P_lo < P_hi")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise DomainError(f"unknown config keys {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ResultRow:
    sweep_value: float
    design: str
    trial: int
    seed: int
    sum_rate: float = math.nan
    average_rate: float = math.nan
    sinrs: tuple = ()
    power: float = math.nan
    power_budget: float = math.nan
    iterations: int = 0
    wall_time_ms: float = math.nan
    error: str = ""


@dataclass
class GainRow:
    sweep_value: int
    trial: int
    seed: int
    mux_capa: float
    mux_spda: float
    gain_capa: float
    gain_spda: float

    @property
    def gain_ratio(self) -> float:
        return self.gain_capa / self.gain_spda


def trial_seed(base_seed: int, trial: int) -> int:
    """Scenario seed of one trial: first 64-bit word of ``SeedSequence([base_seed, trial])``."""
    state = np.random.SeedSequence([int(base_seed), int(trial)]).generate_state(1, dtype=np.uint64)
    return int(state[0])


# ---------------------------------------------------------------- evaluation


def _scenario(config: ExperimentConfig, seed: int, num_users: int) -> Scenario:
    return random_scenario(
        seed,
        num_users=num_users,
        aperture=Aperture.square(config.aperture_area),
        wavelength=config.wavelength,
        noise_power=config.noise_power,
        power_budget=config.power_budget,
    )


def _capa_gram(scenario: Scenario, order: int) -> np.ndarray:
    grid = build_grid(scenario.aperture, order)
    return correlation_matrix(grid, sample_channel(grid, scenario))


def _spda_matrix(scenario: Scenario) -> np.ndarray:
    return spda_channels(spda_array(scenario.aperture, scenario.wavelength), scenario)


def _evaluate(config: ExperimentConfig, design: str, Q: np.ndarray, scenario: Scenario):
    """Coefficients and iteration count of one design on the Gram matrix ``Q``."""
    kind = design.removeprefix("spda-")
    s2, P = scenario.noise_power, scenario.power_budget
    if kind in HEURISTICS:
        return heuristic_design(kind, Q, s2, P, allocation=config.allocation), 0
    K = Q.shape[0]
    eps_gap = config.eps_gap
    if K > config.optimal_max_users:
        if not config.allow_large_optimal:
            raise DomainError(
                f"optimal design skipped for K={K} > {config.optimal_max_users}; set allow_large_optimal"
            )
        eps_gap = max(eps_gap, config.large_optimal_eps_gap)
    # the MMSE point seeds the incumbent, so "optimal" never reports less
    seed = sinr(Q, heuristic_design("mmse", Q, s2, P, allocation=config.allocation), s2)
    result = polyblock_maximize(
        Q, s2, P, eps_gap=eps_gap, max_iter=config.max_iter, eps_bisect=config.eps_bisect,
        initial_points=[seed],
    )
    return result.coefficients, result.iterations


def _design_rows(config: ExperimentConfig, value, trial: int, seed: int, scenario: Scenario):
    grams: dict[str, np.ndarray] = {}
    rows = []
    for design in config.designs:
        family = "spda" if design.startswith("spda-") else "capa"
        row = ResultRow(value, design, trial, seed, power_budget=scenario.power_budget)
        start = time.perf_counter()
        try:
            if family not in grams:
                grams[family] = (
                    spda_gram(_spda_matrix(scenario))
                    if family == "spda"
                    else _capa_gram(scenario, config.quadrature_order)
                )
            Q = grams[family]
            A, row.iterations = _evaluate(config, design, Q, scenario)
            gamma = sinr(Q, A, scenario.noise_power)
            row.sum_rate = sum_rate(gamma)
            row.average_rate = average_rate(gamma)
            row.sinrs = tuple(float(g) for g in gamma)
            row.power = transmit_power(Q, A)
        except (DomainError, ConvergenceError, ArithmeticError, np.linalg.LinAlgError) as exc:
            row.error = f"{type(exc).__name__}: {exc}"
        if config.record_timing:
            row.wall_time_ms = (time.perf_counter() - start) * 1e3
        rows.append(row)
    return rows


def _sweep_trial(args):
    config, value, trial = args
    seed = trial_seed(config.seed, trial)
    if config.sweep == "power":
        scenario = _scenario(config, seed, config.num_users).with_power(float(value))
    elif config.sweep == "aperture":
        scenario = _scenario(config, seed, config.num_users).with_aperture(Aperture.square(float(value)))
    elif config.sweep == "users":
        scenario = _scenario(config, seed, int(value)).with_power(int(value) * config.per_user_power)
    else:
        raise DomainError(f"{config.sweep!r} is not a design sweep")
    return _design_rows(config, value, trial, seed, scenario)


def _map(config: ExperimentConfig, func, jobs: list):
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(func, jobs))
    return [func(job) for job in jobs]


def _design_sweep(config: ExperimentConfig, kind: str) -> list[ResultRow]:
    if config.sweep != kind:
        raise DomainError(f"config is for a {config.sweep!r} sweep, not {kind!r}")
    jobs = [(config, value, trial) for value in config.grid for trial in range(config.trials)]
    return [row for rows in _map(config, _sweep_trial, jobs) for row in rows]


def run_power_sweep(config: ExperimentConfig) -> list[ResultRow]:
    """Every design on every trial for each power budget in ``config.grid``."""
    return _design_sweep(config, "power")


def run_aperture_sweep(config: ExperimentConfig) -> list[ResultRow]:
    """Every design on every trial for each aperture area in ``config.grid``.

    The quadrature grid, Gram matrix and discrete array are rebuilt per area.
    """
    return _design_sweep(config, "aperture")


def run_user_sweep(config: ExperimentConfig) -> list[ResultRow]:
    """Every design for each user count, with budget ``K * per_user_power``.

    Scenarios are nested: the first ``K`` users of a trial are the same for
    every ``K``.
    """
    return _design_sweep(config, "users")


def _convergence_trial(args):
    config, K, trial = args
    seed = trial_seed(config.seed, trial)
    scenario = _scenario(config, seed, K)
    Q = _capa_gram(scenario, config.quadrature_order)
    result = polyblock_maximize(
        Q, scenario.noise_power, scenario.power_budget,
        eps_gap=config.eps_gap, max_iter=config.max_iter, eps_bisect=config.eps_bisect,
    )
    return K, trial, seed, result


def run_convergence(config: ExperimentConfig) -> list[dict]:
    """Polyblock traces, one per (user count, trial).

    Rows carry ``n``, ``U_max``, ``U_min``, ``vertex_count`` and
    ``wall_time_ms`` (blank unless ``record_timing``), plus the final
    ``converged`` flag of their run.
    """
    if config.sweep != "convergence":
        raise DomainError(f"config is for a {config.sweep!r} sweep, not 'convergence'")
    jobs = [(config, K, trial) for K in config.grid for trial in range(config.trials)]
    rows = []
    for K, trial, seed, result in _map(config, _convergence_trial, jobs):
        for r in result.trace:
            rows.append({
                "sweep_value": K, "trial": trial, "seed": seed, "n": r.n,
                "U_max": r.upper, "U_min": r.lower, "vertex_count": r.vertex_count,
                "wall_time_ms": r.wall_time_ms if config.record_timing else math.nan,
                "converged": result.converged,
            })
    return rows


def _zf_design(Q, noise_power, power_budget):
    return heuristic_design("zf", Q, noise_power, power_budget)


def _gain_trial(args):
    config, K, trial = args
    seed = trial_seed(config.seed, trial)
    scenario = _scenario(config, seed, K)
    Q = _capa_gram(scenario, config.quadrature_order)
    H = _spda_matrix(scenario)
    p_lo, p_hi = config.gain_powers
    s2 = scenario.noise_power
    return GainRow(
        K, trial, seed,
        mux_capa=multiplexing_gain_estimate(_zf_design, Q, s2, p_lo, p_hi),
        mux_spda=multiplexing_gain_estimate(_zf_design, spda_gram(H), s2, p_lo, p_hi),
        gain_capa=beamforming_gain_capa(Q),
        gain_spda=beamforming_gain_spda(H),
    )


def run_gain_analysis(config: ExperimentConfig) -> list[GainRow]:
    """ZF multiplexing-gain slopes and beamforming gains per user count.

    The slope is taken between ``gain_powers[0]`` and ``gain_powers[1]``,
    both deep in the high-SNR regime.
    """
    if config.sweep != "gains":
        raise DomainError(f"config is for a {config.sweep!r} sweep, not 'gains'")
    jobs = [(config, K, trial) for K in config.grid for trial in range(config.trials)]
    return _map(config, _gain_trial, jobs)


RUNNERS = {
    "power": run_power_sweep,
    "aperture": run_aperture_sweep,
    "users": run_user_sweep,
    "convergence": run_convergence,
    "gains": run_gain_analysis,
}


def run_experiment(config: ExperimentConfig):
    return RUNNERS[config.sweep](config)


# ---------------------------------------------------------------- aggregation


def _mean_stderr(values: list[float]) -> tuple[float, float]:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    stderr = float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else math.nan
    return float(np.mean(x)), stderr


def summarize(rows: Iterable) -> list[dict]:
    """Mean and standard error per (sweep value, design), from raw rows only.

    Rows with an error are counted but left out of the statistics.
    """
    rows = list(rows)
    out = []
    if rows and isinstance(rows[0], GainRow):
        for value in dict.fromkeys(r.sweep_value for r in rows):
            group = [r for r in rows if r.sweep_value == value]
            entry = {"sweep_value": value, "count": len(group)}
            for name in ("mux_capa", "mux_spda", "gain_capa", "gain_spda", "gain_ratio"):
                mean, err = _mean_stderr([getattr(r, name) for r in group])
                entry[f"mean_{name}"], entry[f"stderr_{name}"] = mean, err
            out.append(entry)
        return out
    if rows and isinstance(rows[0], dict):
        for value in dict.fromkeys(r["sweep_value"] for r in rows):
            group = [r for r in rows if r["sweep_value"] == value]
            finals = {}
            for r in group:
                finals[r["trial"]] = r
            mean, err = _mean_stderr([r["n"] for r in finals.values()])
            gaps = [r["U_max"] - r["U_min"] for r in finals.values()]
            out.append({
                "sweep_value": value, "count": len(finals),
                "mean_iterations": mean, "stderr_iterations": err,
                "max_final_gap": max(gaps),
                "converged": sum(bool(r["converged"]) for r in finals.values()),
            })
        return out
    keys = dict.fromkeys((r.sweep_value, r.design) for r in rows)
    for value, design in keys:
        group = [r for r in rows if r.sweep_value == value and r.design == design]
        ok = [r for r in group if not r.error]
        entry = {"sweep_value": value, "design": design, "count": len(ok), "errors": len(group) - len(ok)}
        for name in ("sum_rate", "average_rate"):
            mean, err = _mean_stderr([getattr(r, name) for r in ok])
            entry[f"mean_{name}"], entry[f"stderr_{name}"] = mean, err
        out.append(entry)
    return out


# ---------------------------------------------------------------- checks


def structural_checks(config: ExperimentConfig, rows: list) -> dict[str, bool]:
    """Invariants every run must satisfy; any ``False`` makes the CLI fail."""
    checks: dict[str, bool] = {}
    if config.sweep in ("power", "aperture", "users"):
        ok = [r for r in rows if not r.error]
        checks["power_within_budget"] = all(
            r.power <= r.power_budget * (1 + POWER_TOLERANCE) for r in ok
        )
        optimal = [r for r in ok if r.design.endswith("optimal")]
        checks["optimal_spends_budget"] = all(
            abs(r.power - r.power_budget) <= POWER_TOLERANCE * r.power_budget for r in optimal
        )
        checks["finite_rates"] = all(math.isfinite(r.sum_rate) for r in ok)
        checks["no_unexpected_errors"] = all(
            r.error == "" or "skipped" in r.error for r in rows
        )
    elif config.sweep == "convergence":
        monotone = converged = True
        previous = {}
        for r in rows:
            key = (r["sweep_value"], r["trial"])
            if key in previous:
                prev = previous[key]
                monotone &= r["n"] == prev["n"] + 1
                monotone &= r["U_max"] <= prev["U_max"] and r["U_min"] >= prev["U_min"]
            previous[key] = r
        for r in previous.values():
            converged &= bool(r["converged"]) and r["U_max"] - r["U_min"] <= config.eps_gap
        checks["trace_monotone"] = bool(monotone)
        checks["gap_reached"] = bool(converged)
    elif config.sweep == "gains":
        checks["finite_gains"] = all(
            all(math.isfinite(x) for x in (r.mux_capa, r.mux_spda, r.gain_capa, r.gain_spda))
            for r in rows
        )
    return checks


# ---------------------------------------------------------------- output


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    if isinstance(value, tuple):
        return ";".join(repr(float(v)) for v in value)
    return str(value)


def _records(rows: list) -> tuple[list[str], list[list[str]]]:
    if not rows:
        return [], []
    if isinstance(rows[0], dict):
        header = list(rows[0])
        return header, [[_fmt(r[h]) for h in header] for r in rows]
    header = [f.name for f in fields(rows[0])]
    return header, [[_fmt(getattr(r, h)) for h in header] for r in rows]


def _write_csv(path: Path, header: list[str], records: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        writer.writerows(records)


def output_paths(out) -> dict[str, Path]:
    """Raw CSV at ``out``; ``<stem>.summary.csv`` and ``<stem>.meta.json`` beside it."""
    out = Path(out)
    return {
        "raw": out,
        "summary": out.with_name(out.stem + ".summary.csv"),
        "metadata": out.with_name(out.stem + ".meta.json"),
    }


def write_outputs(config: ExperimentConfig, rows: list, out, wall_time_s: float, checks: dict) -> dict[str, Path]:
    paths = output_paths(out)
    paths["raw"].parent.mkdir(parents=True, exist_ok=True)
    _write_csv(paths["raw"], *_records(rows))
    summary = summarize(rows)
    if summary:
        header = list(summary[0])
        _write_csv(paths["summary"], header, [[_fmt(s[h]) for h in header] for s in summary])
    else:
        _write_csv(paths["summary"], [], [])
    metadata = {
        "config": config.to_dict(),
        "versions": {
            "capa": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": wall_time_s,
        "rows": len(rows),
        "checks": checks,
    }
    with open(paths["metadata"], "w") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
