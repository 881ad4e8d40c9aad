"""Sampled fields on a chart: scalars, densities, tensors, and metrics.

Density weights are tracked exactly as `fractions.Fraction` (typically
rationals over the dimension n, e.g. 1 - 2/n) so that weight arithmetic
in pairings and products can be checked without float fuzz.  On a fixed
chart a density of weight alpha is stored as plain nodal values with the
weight recorded alongside.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from .charts import GridChart
from .errors import DegenerateMetricError, FieldDomainError, WeightError

__all__ = [
    "ScalarField",
    "DensityField",
    "TensorField",
    "TensorDensityField",
    "MetricField",
    "as_weight",
]

ZERO = Fraction(0)


def as_weight(value) -> Fraction:
    """Coerce ints/Fractions to an exact weight; floats are rejected."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    raise WeightError(f"weights must be exact rationals, got {value!r}")


def _check_shape(chart: GridChart, array: np.ndarray, extra: tuple[int, ...]):
    expected = chart.resolution + extra
    if array.shape != expected:
        raise ValueError(f"field shape {array.shape} != expected {expected}")


@dataclass
class ScalarField:
    """Nodal scalar (weight 0) or density (weight alpha) field."""

    chart: GridChart
    values: np.ndarray
    weight: Fraction = ZERO

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        _check_shape(self.chart, self.values, ())
        self.weight = as_weight(self.weight)

    @staticmethod
    def constant(chart: GridChart, value: float, weight=ZERO) -> "ScalarField":
        return ScalarField(chart, np.full(chart.resolution, float(value)), weight)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            if other.chart is not self.chart and other.chart != self.chart:
                raise ValueError("fields live on different charts")
            return ScalarField(self.chart, self.values * other.values,
                               self.weight + other.weight)
        return ScalarField(self.chart, self.values * float(other), self.weight)

    __rmul__ = __mul__

    def power(self, exponent) -> "ScalarField":
        """Real power; positivity is required for non-integer exponents."""
        exact = as_weight(exponent) if not isinstance(exponent, float) else None
        if exact is not None and exact.denominator == 1:
            return ScalarField(self.chart, self.values ** int(exact),
                               self.weight * exact)
        if np.any(self.values <= 0):
            raise FieldDomainError("fractional power of a non-positive density")
        if exact is not None:
            return ScalarField(self.chart, self.values ** float(exact),
                               self.weight * exact)
        raise WeightError("exponent must be an exact rational to track the weight")


DensityField = ScalarField


@dataclass
class TensorField:
    """Symmetric (0,2)-tensor valued density of a recorded weight."""

    chart: GridChart
    components: np.ndarray
    weight: Fraction = ZERO

    def __post_init__(self):
        self.components = np.asarray(self.components, dtype=float)
        n = self.chart.dim
        _check_shape(self.chart, self.components, (n, n))
        self.weight = as_weight(self.weight)

    @staticmethod
    def zero(chart: GridChart, weight=ZERO) -> "TensorField":
        n = chart.dim
        return TensorField(chart, np.zeros(chart.resolution + (n, n)), weight)

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.components - np.swapaxes(self.components, -1, -2))))

    def scaled_by(self, density: ScalarField) -> "TensorField":
        """Multiply componentwise by a scalar/density field; weights add."""
        return TensorField(self.chart,
                           self.components * density.values[..., None, None],
                           self.weight + density.weight)

    def __mul__(self, scalar: float) -> "TensorField":
        return TensorField(self.chart, self.components * float(scalar), self.weight)

    __rmul__ = __mul__

    def __add__(self, other: "TensorField") -> "TensorField":
        if other.weight != self.weight:
            raise WeightError(f"cannot add weights {self.weight} and {other.weight}")
        return TensorField(self.chart, self.components + other.components, self.weight)

    def __sub__(self, other: "TensorField") -> "TensorField":
        return self + (-1.0) * other

    def matrix_inverse(self) -> np.ndarray:
        """Pointwise inverse of the component matrices (array, not a field)."""
        return np.linalg.inv(self.components)

    def determinant(self) -> np.ndarray:
        return np.linalg.det(self.components)


TensorDensityField = TensorField


def _leading_minors_positive(components: np.ndarray) -> np.ndarray:
    """Boolean per-node mask: all leading principal minors positive."""
    n = components.shape[-1]
    ok = np.ones(components.shape[:-2], dtype=bool)
    for k in range(1, n + 1):
        ok &= np.linalg.det(components[..., :k, :k]) > 0
    return ok


@dataclass
class MetricField:
    """Sampled Riemannian metric: symmetric and positive definite at every node."""

    chart: GridChart
    components: np.ndarray
    _inverse: np.ndarray | None = dc_field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.components = np.asarray(self.components, dtype=float)
        n = self.chart.dim
        _check_shape(self.chart, self.components, (n, n))
        defect = np.max(np.abs(self.components - np.swapaxes(self.components, -1, -2)))
        if defect > 1e-12:
            raise ValueError(f"metric components not symmetric (defect {defect:.3e})")
        # exact symmetry so downstream symmetrizations are no-ops
        self.components = 0.5 * (self.components + np.swapaxes(self.components, -1, -2))
        ok = _leading_minors_positive(self.components)
        if not np.all(ok):
            node = np.argwhere(~ok)[0]
            raise DegenerateMetricError(node)

    @staticmethod
    def flat(chart: GridChart) -> "MetricField":
        n = chart.dim
        comps = np.broadcast_to(np.eye(n), chart.resolution + (n, n)).copy()
        return MetricField(chart, comps)

    @staticmethod
    def model_metric(chart: GridChart) -> "MetricField":
        """Canonical metric of a model chart, in its orthonormal frame."""
        if chart.is_grid:
            raise ValueError("model_metric is only defined on model charts")
        return MetricField.flat(chart)

    @property
    def dim(self) -> int:
        return self.chart.dim

    def inverse(self) -> np.ndarray:
        if self._inverse is None:
            self._inverse = np.linalg.inv(self.components)
        return self._inverse

    def sqrt_det(self) -> np.ndarray:
        return np.sqrt(np.linalg.det(self.components))

    def as_tensor(self, weight=ZERO) -> TensorField:
        return TensorField(self.chart, self.components.copy(), weight)

    def scaled(self, factor: float) -> "MetricField":
        if factor <= 0:
            raise ValueError("metric scale factor must be positive")
        return MetricField(self.chart, self.components * float(factor))

    def norm_squared(self, tensor: TensorField) -> np.ndarray:
        """Pointwise |T|_g^2 = g^ik g^jl T_ij T_kl (weight ignored)."""
        ginv = self.inverse()
        return np.einsum("...ik,...jl,...ij,...kl->...", ginv, ginv,
                         tensor.components, tensor.components)
