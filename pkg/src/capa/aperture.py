"""Planar transmit aperture and Gauss-Legendre integration over it.

The aperture is the rectangle ``[-lx/2, lx/2] x [-ly/2, ly/2]`` in the z = 0
plane. Integrals of fields over the surface are evaluated with a tensor
product Gauss-Legendre rule whose weights already carry the Jacobian, so an
integral is a single weighted sum over the nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "Aperture",
    "QuadratureGrid",
    "build_grid",
    "integrate",
    "inner_product",
]


@dataclass(frozen=True)
class Aperture:
    """Rectangular aperture centred at the origin of the x-y plane.

    Parameters
    ----------
    lx, ly : float
        Side lengths in meters.
    """

    lx: float
    ly: float

    def __post_init__(self):
        for name in ("lx", "ly"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"aperture {name} must be positive and finite, got {value!r}")

    @classmethod
    def square(cls, area: float) -> "Aperture":
        """Square aperture with the given area in m^2."""
        if not (math.isfinite(area) and area > 0):
            raise DomainError(f"aperture area must be positive, got {area!r}")
        side = math.sqrt(area)
        return cls(side, side)

    @property
    def area(self) -> float:
        return self.lx * self.ly

    def contains(self, points: np.ndarray, atol: float = 1e-12) -> np.ndarray:
        """Boolean mask of the points (shape ``(..., 3)``) lying on the aperture."""
        points = np.asarray(points, dtype=float)
        return (
            (np.abs(points[..., 0]) <= self.lx / 2 + atol)
            & (np.abs(points[..., 1]) <= self.ly / 2 + atol)
            & (np.abs(points[..., 2]) <= atol)
        )


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Quadrature nodes and weights on an aperture.

    ``nodes`` has shape ``(order_x * order_y, 3)`` (meters) and ``weights``
    shape ``(order_x * order_y,)`` (m^2). Both arrays are read-only.
    """

    aperture: Aperture
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    order_x: int
    order_y: int

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def __len__(self) -> int:
        return self.size


def build_grid(aperture: Aperture, order_x: int = 20, order_y: int | None = None) -> QuadratureGrid:
    """Tensor-product Gauss-Legendre rule on ``aperture``.

    Parameters
    ----------
    aperture : Aperture
        Integration domain.
    order_x, order_y : int
        Points per axis. ``order_y`` defaults to ``order_x``.

    Returns
    -------
    QuadratureGrid
        Nodes ordered with the y index varying fastest.
    """
    if order_y is None:
        order_y = order_x
    if not isinstance(aperture, Aperture):
        raise DomainError("aperture must be an Aperture instance")
    for name, order in (("order_x", order_x), ("order_y", order_y)):
        if int(order) != order or order < 1:
            raise DomainError(f"{name} must be a positive integer, got {order!r}")
    order_x, order_y = int(order_x), int(order_y)

    tx, wx = np.polynomial.legendre.leggauss(order_x)
    ty, wy = np.polynomial.legendre.leggauss(order_y)
    hx, hy = aperture.lx / 2, aperture.ly / 2
    x, y = np.meshgrid(hx * tx, hy * ty, indexing="ij")
    nodes = np.column_stack([x.ravel(), y.ravel(), np.zeros(x.size)])
    weights = np.outer(hx * wx, hy * wy).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureGrid(aperture, nodes, weights, order_x, order_y)


def _check_samples(grid: QuadratureGrid, samples) -> np.ndarray:
    samples = np.asarray(samples)
    if samples.ndim == 0 or samples.shape[0] != grid.size:
        raise DomainError(
            f"expected {grid.size} samples along the first axis, got shape {samples.shape}"
        )
    return samples


def integrate(grid: QuadratureGrid, samples) -> complex | np.ndarray:
    """Integral of a sampled field over the aperture.

    ``samples`` holds one value per node along the first axis; trailing axes
    are integrated independently.
    """
    samples = _check_samples(grid, samples)
    result = np.tensordot(grid.weights, samples, axes=(0, 0))
    return complex(result) if np.ndim(result) == 0 else result


def inner_product(grid: QuadratureGrid, f, g) -> complex:
    """``integral of conj(f(s)) g(s) ds`` (conjugate-linear in ``f``)."""
    f = _check_samples(grid, f)
    g = _check_samples(grid, g)
    if f.shape != g.shape:
        raise DomainError(f"sample shapes differ: {f.shape} vs {g.shape}")
    return complex(np.sum(grid.weights * np.conj(f) * g))
