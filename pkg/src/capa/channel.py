"""Free-space line-of-sight channel between aperture points and users.

The stored response is ``h_k(s)``, the conjugate of the displayed field
kernel, so that the received amplitude is ``integral conj(h_k(s)) w(s) ds``:

    h_k(s) = j * eta / (2 lambda R) * exp(+j 2 pi R / lambda)
             * u_k^T (I - d d^T / R^2) u_T,        d = r_k - s, R = |d|

with ``eta = 120 pi`` ohm. Values are in ohm/m^2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema
import numpy as np

from .aperture import Aperture, QuadratureGrid
from .errors import DomainError

__all__ = [
    "SPEED_OF_LIGHT",
    "ETA",
    "DEFAULT_FREQUENCY",
    "DEFAULT_WAVELENGTH",
    "DEFAULT_NOISE_POWER",
    "DEFAULT_POWER_BUDGET",
    "DEFAULT_APERTURE_AREA",
    "SCENARIO_SCHEMA",
    "User",
    "Scenario",
    "ChannelSamples",
    "SpdaArray",
    "los_channel_response",
    "sample_channel",
    "random_scenario",
    "spda_array",
    "spda_channels",
    "scenario_rng",
]

SPEED_OF_LIGHT = 299_792_458.0
ETA = 120 * math.pi
DEFAULT_FREQUENCY = 2.4e9
DEFAULT_WAVELENGTH = SPEED_OF_LIGHT / DEFAULT_FREQUENCY
DEFAULT_NOISE_POWER = 5.6e-3
DEFAULT_POWER_BUDGET = 1e-3
DEFAULT_APERTURE_AREA = 0.1
Y_HAT = (0.0, 1.0, 0.0)


def _unit(vector, name: str) -> np.ndarray:
    v = np.asarray(vector, dtype=float).reshape(3)
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or abs(norm - 1.0) > 1e-9:
        raise DomainError(f"{name} must be a unit 3-vector, got norm {norm}")
    v = v / norm
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class User:
    """Single-antenna receiver.

    ``position`` is in meters; ``polarization`` is a unit 3-vector.
    """

    position: np.ndarray
    polarization: np.ndarray = Y_HAT

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        if not np.all(np.isfinite(pos)):
            raise DomainError("user position must be finite")
        pos.setflags(write=False)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "polarization", _unit(self.polarization, "polarization"))

    def __eq__(self, other):
        if not isinstance(other, User):
            return NotImplemented
        return np.array_equal(self.position, other.position) and np.array_equal(
            self.polarization, other.polarization
        )


@dataclass(frozen=True, eq=False)
class Scenario:
    """Users, polarizations and link budget for one channel realization.

    Attributes
    ----------
    users : tuple of User
    tx_polarization : ndarray
        Unit polarization of the transmit aperture currents.
    wavelength : float
        Meters.
    noise_power : float
        Noise variance in V^2/m^2.
    power_budget : float
        Transmit power budget in A^2.
    aperture : Aperture
    seed : int or None
        Seed the scenario was drawn from, if any.
    """

    users: tuple
    tx_polarization: np.ndarray = Y_HAT
    wavelength: float = DEFAULT_WAVELENGTH
    noise_power: float = DEFAULT_NOISE_POWER
    power_budget: float = DEFAULT_POWER_BUDGET
    aperture: Aperture = field(default_factory=lambda: Aperture.square(DEFAULT_APERTURE_AREA))
    seed: int | None = None

    def __post_init__(self):
        users = tuple(u if isinstance(u, User) else User(*u) for u in self.users)
        if not users:
            raise DomainError("a scenario needs at least one user")
        for k, user in enumerate(users):
            if user.position[2] <= 0:
                raise DomainError(f"user {k} is not in front of the aperture (z <= 0)")
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "tx_polarization", _unit(self.tx_polarization, "tx_polarization"))
        for name in ("wavelength", "noise_power", "power_budget"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive, got {value!r}")

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def positions(self) -> np.ndarray:
        return np.array([u.position for u in self.users])

    def with_power(self, power_budget: float) -> "Scenario":
        return replace(self, power_budget=power_budget)

    def with_aperture(self, aperture: Aperture) -> "Scenario":
        return replace(self, aperture=aperture)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        return {
            "users": [
                {"position": u.position.tolist(), "rx_polarization": u.polarization.tolist()}
                for u in self.users
            ],
            "tx_polarization": self.tx_polarization.tolist(),
            "wavelength": self.wavelength,
            "noise_power": self.noise_power,
            "power_budget": self.power_budget,
            "aperture": {"lx": self.aperture.lx, "ly": self.aperture.ly},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        try:
            jsonschema.validate(data, SCENARIO_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise DomainError(f"invalid scenario document: {exc.message}") from exc
        return cls(
            users=tuple(User(u["position"], u["rx_polarization"]) for u in data["users"]),
            tx_polarization=data["tx_polarization"],
            wavelength=data["wavelength"],
            noise_power=data["noise_power"],
            power_budget=data["power_budget"],
            aperture=Aperture(data["aperture"]["lx"], data["aperture"]["ly"]),
            seed=data.get("seed"),
        )

    def to_json(self, path=None, indent: int | None = 2) -> str:
        text = json.dumps(self.to_dict(), indent=indent)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source) -> "Scenario":
        """Load from a JSON string or a path to a JSON file."""
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            source = Path(source).read_text()
        return cls.from_dict(json.loads(source))


_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Scenario",
    "type": "object",
    "required": ["users", "tx_polarization", "wavelength", "noise_power", "power_budget", "aperture"],
    "properties": {
        "users": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["position", "rx_polarization"],
                "properties": {
                    "position": {**_VEC3, "description": "user location r_k [m]"},
                    "rx_polarization": {**_VEC3, "description": "unit receive polarization [-]"},
                },
            },
        },
        "tx_polarization": {**_VEC3, "description": "unit transmit polarization [-]"},
        "wavelength": {"type": "number", "exclusiveMinimum": 0, "description": "[m]"},
        "noise_power": {"type": "number", "exclusiveMinimum": 0, "description": "noise variance [V^2/m^2]"},
        "power_budget": {"type": "number", "exclusiveMinimum": 0, "description": "transmit power [A^2]"},
        "aperture": {
            "type": "object",
            "required": ["lx", "ly"],
            "properties": {
                "lx": {"type": "number", "exclusiveMinimum": 0, "description": "[m]"},
                "ly": {"type": "number", "exclusiveMinimum": 0, "description": "[m]"},
            },
        },
        "seed": {"type": ["integer", "null"]},
    },
}


@dataclass(frozen=True, eq=False)
class ChannelSamples:
    """Channel responses at quadrature nodes, shape ``(nodes, K)`` in ohm/m^2."""

    values: np.ndarray
    grid: QuadratureGrid

    @property
    def num_users(self) -> int:
        return self.values.shape[1]


def los_channel_response(s, user: User, tx_polarization, wavelength: float):
    """LoS response ``h_k(s)`` of ``user`` at source point(s) ``s`` (shape ``(..., 3)``).

    Returns a complex scalar for a single point, otherwise an array of shape
    ``s.shape[:-1]``.
    """
    s = np.asarray(s, dtype=float)
    d = user.position - s
    dist = np.linalg.norm(d, axis=-1)
    if np.any(dist <= 0):
        raise DomainError("source point coincides with the user position")
    u_r = user.polarization
    u_t = np.asarray(tx_polarization, dtype=float)
    # u_r^T (I - d d^T / R^2) u_t
    projection = u_r @ u_t - (d @ u_r) * (d @ u_t) / dist**2
    h = 1j * ETA * np.exp(2j * np.pi * dist / wavelength) / (2 * wavelength * dist) * projection
    return complex(h) if h.ndim == 0 else h


def _user_response(points, user: User, scenario: Scenario) -> np.ndarray:
    return los_channel_response(points, user, scenario.tx_polarization, scenario.wavelength)


def sample_channel(grid: QuadratureGrid, scenario: Scenario) -> ChannelSamples:
    """Tabulate every user's response at every quadrature node."""
    values = np.column_stack([_user_response(grid.nodes, u, scenario) for u in scenario.users])
    values.setflags(write=False)
    return ChannelSamples(values, grid)


def scenario_rng(seed: int) -> np.random.Generator:
    """PCG64 generator used for every scenario draw."""
    return np.random.Generator(np.random.PCG64(seed))


def random_scenario(
    seed: int,
    num_users: int = 4,
    ux: float = 5.0,
    uy: float = 5.0,
    uz_min: float = 15.0,
    uz_max: float = 30.0,
    aperture: Aperture | None = None,
    wavelength: float = DEFAULT_WAVELENGTH,
    noise_power: float = DEFAULT_NOISE_POWER,
    power_budget: float = DEFAULT_POWER_BUDGET,
) -> Scenario:
    """Users drawn uniformly from ``|x| <= ux, |y| <= uy, uz_min <= z <= uz_max``.

    Draws come from ``scenario_rng(seed)`` three at a time (x, y, z) per user,
    so the first ``K`` users of a larger scenario with the same seed coincide
    with the ``K``-user scenario. All polarizations are ``(0, 1, 0)``.
    """
    if num_users < 1:
        raise DomainError("num_users must be >= 1")
    if not (ux > 0 and uy > 0 and uz_min > 0 and uz_max >= uz_min):
        raise DomainError("region bounds must be positive with uz_min <= uz_max")
    rng = scenario_rng(seed)
    unit = rng.random((num_users, 3))
    low = np.array([-ux, -uy, uz_min])
    high = np.array([ux, uy, uz_max])
    positions = low + unit * (high - low)
    return Scenario(
        users=tuple(User(p, Y_HAT) for p in positions),
        tx_polarization=Y_HAT,
        wavelength=wavelength,
        noise_power=noise_power,
        power_budget=power_budget,
        aperture=aperture if aperture is not None else Aperture.square(DEFAULT_APERTURE_AREA),
        seed=seed,
    )


@dataclass(frozen=True, eq=False)
class SpdaArray:
    """Discrete planar array occupying an aperture.

    ``centers`` has shape ``(N_d, 3)``; antenna ``(n_x, n_y)`` sits at
    ``((n_x - 1) d - lx/2, (n_y - 1) d - ly/2, 0)``.
    """

    centers: np.ndarray
    spacing: float
    effective_area: float
    shape: tuple

    @property
    def count(self) -> int:
        return self.centers.shape[0]


def spda_array(
    aperture: Aperture,
    wavelength: float,
    spacing: float | None = None,
    effective_area: float | None = None,
) -> SpdaArray:
    """Array with ``ceil(lx/d) x ceil(ly/d)`` elements.

    Defaults are half-wavelength spacing and effective area
    ``lambda^2 / (4 pi)`` per element.
    """
    d = wavelength / 2 if spacing is None else spacing
    area = wavelength**2 / (4 * math.pi) if effective_area is None else effective_area
    if not (d > 0 and area > 0):
        raise DomainError("spacing and effective area must be positive")
    # guard against ceil(5.000000001) style round-off
    nx = math.ceil(aperture.lx / d - 1e-9)
    ny = math.ceil(aperture.ly / d - 1e-9)
    xs = np.arange(nx) * d - aperture.lx / 2
    ys = np.arange(ny) * d - aperture.ly / 2
    x, y = np.meshgrid(xs, ys, indexing="ij")
    centers = np.column_stack([x.ravel(), y.ravel(), np.zeros(x.size)])
    centers.setflags(write=False)
    return SpdaArray(centers, d, area, (nx, ny))


def spda_channels(array: SpdaArray, scenario: Scenario) -> np.ndarray:
    """Channel matrix ``H`` of shape ``(N_d, K)``, entries ``sqrt(A_d) h_k(s_n)``."""
    scale = math.sqrt(array.effective_area)
    return scale * np.column_stack([_user_response(array.centers, u, scenario) for u in scenario.users])
