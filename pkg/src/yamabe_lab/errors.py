"""Exception types shared across the library."""


class YamabeLabError(Exception):
    """Base class for all library errors."""


class UnsupportedChartError(YamabeLabError):
    """Operation requires a periodic coordinate grid, got a model chart."""


class DegenerateMetricError(YamabeLabError):
    """Metric failed the positive-definiteness check at some node."""

    def __init__(self, node, message=None):
        self.node = tuple(int(i) for i in node)
        super().__init__(message or f"metric not positive definite at node {self.node}")


class WeightError(YamabeLabError):
    """Density weights of the operands are incompatible."""


class FieldDomainError(YamabeLabError):
    """Field values outside the domain required by the operation (e.g. fractional power of a non-positive density)."""


class InvalidClassError(YamabeLabError):
    """Conformal-class section does not have unit determinant."""


class PathRangeError(YamabeLabError):
    """det(c0 + t v) is not positive on the requested parameter range."""


class EnsembleError(YamabeLabError):
    """Ensemble members are inconsistent (chart or conformal class mismatch)."""


class ConfigError(YamabeLabError):
    """Experiment configuration failed validation."""
