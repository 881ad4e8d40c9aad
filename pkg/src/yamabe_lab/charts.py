"""Coordinate charts.

Two kinds of chart are supported:

* periodic structured grids with torus topology, on which all tensor
  calculus is done by 4th-order centered finite differences, and

* closed-form model geometries (round sphere, circle x sphere product,
  flat torus) represented by a single homogeneous node.  Model charts
  carry analytic curvature and volume; no grid derivatives are ever
  taken on them.

On a model chart the metric is stored in an orthonormal frame at the
single node, and the coordinate "cell volume" of that node is chosen to
equal the total Riemannian volume of the model, so that the generic
nodal-mean integration rule returns exact integrals of invariant
quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedChartError

__all__ = [
    "GridChart",
    "ModelGeometry",
    "RoundSphere",
    "ProductCylinder",
    "FlatTorusModel",
    "sphere_volume",
]


def sphere_volume(n: int, radius: float = 1.0) -> float:
    """Riemannian volume of the round n-sphere of the given radius.

    vol(S^n_r) = 2 pi^((n+1)/2) / Gamma((n+1)/2) * r^n.
    """
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0) * radius**n


@dataclass(frozen=True)
class RoundSphere:
    """Round n-sphere of a given radius: Ric = (n-1)/r^2 g, R = n(n-1)/r^2."""

    radius: float

    def scalar_curvature(self, dim: int) -> float:
        return dim * (dim - 1) / self.radius**2

    def ricci_frame(self, dim: int) -> np.ndarray:
        return (dim - 1) / self.radius**2 * np.eye(dim)

    def volume(self, dim: int) -> float:
        return sphere_volume(dim, self.radius)


@dataclass(frozen=True)
class ProductCylinder:
    """S^1(L) x S^(n-1)(r) with the product metric.

    The first frame axis is the circle direction (Ricci-flat); the
    remaining n-1 axes span the sphere factor.
    """

    circumference: float
    sphere_radius: float = 1.0

    def scalar_curvature(self, dim: int) -> float:
        return (dim - 1) * (dim - 2) / self.sphere_radius**2

    def ricci_frame(self, dim: int) -> np.ndarray:
        ric = np.zeros((dim, dim))
        ric[1:, 1:] = (dim - 2) / self.sphere_radius**2 * np.eye(dim - 1)
        return ric

    def volume(self, dim: int) -> float:
        return self.circumference * sphere_volume(dim - 1, self.sphere_radius)


@dataclass(frozen=True)
class FlatTorusModel:
    """Flat torus with the stated coordinate periods; all curvature vanishes."""

    periods: tuple[float, ...]

    def scalar_curvature(self, dim: int) -> float:
        return 0.0

    def ricci_frame(self, dim: int) -> np.ndarray:
        return np.zeros((dim, dim))

    def volume(self, dim: int) -> float:
        return float(np.prod(self.periods))


ModelGeometry = RoundSphere | ProductCylinder | FlatTorusModel


@dataclass(frozen=True)
class GridChart:
    """Periodic coordinate grid, or a single-node closed-form model chart.

    Parameters
    ----------
    dim : number of coordinate directions, >= 2.
    resolution : nodes per axis; even and >= 8 for periodic grids.
    periods : coordinate length per axis, > 0.
    kind : "periodic-grid" or "model".
    model : the closed-form geometry when kind == "model".
    """

    dim: int
    resolution: tuple[int, ...]
    periods: tuple[float, ...]
    kind: str = "periodic-grid"
    model: ModelGeometry | None = field(default=None)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"chart dimension must be >= 2, got {self.dim}")
        if len(self.resolution) != self.dim or len(self.periods) != self.dim:
            raise ValueError("resolution and periods must have one entry per axis")
        if any(p <= 0 for p in self.periods):
            raise ValueError("all periods must be positive")
        if self.kind == "periodic-grid":
            if self.model is not None:
                raise ValueError("periodic-grid charts carry no model geometry")
            if any(r < 8 or r % 2 for r in self.resolution):
                raise ValueError("periodic grids need even resolutions >= 8 per axis")
        elif self.kind == "model":
            if self.model is None:
                raise ValueError("model charts need a model geometry")
        else:
            raise ValueError(f"unknown chart kind {self.kind!r}")

    # ------------------------------------------------------------------
    # constructors

    @staticmethod
    def periodic(resolution, periods) -> "GridChart":
        resolution = tuple(int(r) for r in resolution)
        periods = tuple(float(p) for p in periods)
        return GridChart(len(resolution), resolution, periods)

    @staticmethod
    def round_sphere(radius: float, dim: int = 3) -> "GridChart":
        model = RoundSphere(float(radius))
        vol = model.volume(dim)
        return GridChart(dim, (1,) * dim, (vol,) + (1.0,) * (dim - 1), "model", model)

    @staticmethod
    def product_cylinder(circumference: float, sphere_radius: float = 1.0,
                         dim: int = 3) -> "GridChart":
        model = ProductCylinder(float(circumference), float(sphere_radius))
        vol = model.volume(dim)
        return GridChart(dim, (1,) * dim, (vol,) + (1.0,) * (dim - 1), "model", model)

    @staticmethod
    def flat_torus_model(periods) -> "GridChart":
        periods = tuple(float(p) for p in periods)
        model = FlatTorusModel(periods)
        dim = len(periods)
        vol = model.volume(dim)
        return GridChart(dim, (1,) * dim, (vol,) + (1.0,) * (dim - 1), "model", model)

    # ------------------------------------------------------------------

    @property
    def is_grid(self) -> bool:
        return self.kind == "periodic-grid"

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(p / r for p, r in zip(self.periods, self.resolution))

    @property
    def coordinate_volume(self) -> float:
        """Product of the periods: the coordinate (not Riemannian) volume."""
        return float(np.prod(self.periods))

    @property
    def node_count(self) -> int:
        return int(np.prod(self.resolution))

    def require_grid(self, operation: str) -> None:
        if not self.is_grid:
            raise UnsupportedChartError(
                f"{operation} needs a periodic-grid chart, got model chart "
                f"{type(self.model).__name__}")

    def axis_coordinates(self, axis: int) -> np.ndarray:
        """Node coordinates along one axis (uniform, period-open)."""
        n = self.resolution[axis]
        return np.arange(n) * (self.periods[axis] / n)

    def meshgrid(self) -> list[np.ndarray]:
        """Coordinate arrays of shape `resolution`, one per axis."""
        axes = [self.axis_coordinates(a) for a in range(self.dim)]
        return list(np.meshgrid(*axes, indexing="ij"))
