"""Conformal formalism: the (density, unit-determinant section) split,
the normalized total scalar curvature functional, its first variations,
paths of conformal classes, and the canonical pairings.

A metric g is split as (omega, c) with omega = |dVol_g| (weight-1
density) and c = g * |dVol_g|^(-2/n), a symmetric tensor density of
weight -2/n with pointwise determinant 1.  The section c is identified
with the conformal class of g; paths of classes are determinant-
normalized linear paths c_t = (c0 + t v)/det(c0 + t v)^(1/n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .calculus import (density_power, integrate, ricci, riemannian_volume,
                       scalar_curvature, volume_density)
from .charts import GridChart, sphere_volume
from .errors import FieldDomainError, InvalidClassError, PathRangeError, WeightError
from .fields import DensityField, MetricField, ScalarField, TensorField

__all__ = [
    "sphere_quotient_bound",
    "ConformalSplit",
    "ClassPath",
    "conformal_split",
    "recombine",
    "apply_conformal_factor",
    "total_scalar_quotient",
    "q_map",
    "trace_with",
    "trace_free_project",
    "pairing",
    "dQ_conformal_direction",
    "dQ_full",
    "class_path",
    "path_velocity",
    "modulus_bound_rhs",
]

DET_TOL = 1e-9


def sphere_quotient_bound(n: int) -> float:
    """The dimensional constant n(n-1) vol(S^n)^(2/n).

    This is the value of the normalized total scalar curvature of the
    round n-sphere, and an upper bound for the per-class infimum of the
    functional on any compact n-manifold.
    """
    return n * (n - 1) * sphere_volume(n) ** (2.0 / n)


def sphere_quotient_bound_gamma_form(n: int) -> float:
    """Equivalent expression via Gamma functions and vol(S^(n-1))."""
    w = math.gamma(n / 2.0) * math.gamma(n / 2.0 + 1) * sphere_volume(n - 1) / math.gamma(n + 1)
    return 4 * n * (n - 1) * w ** (2.0 / n)


def _require_dim(chart: GridChart, operation: str) -> int:
    if chart.dim < 3:
        raise FieldDomainError(f"{operation} needs dimension >= 3, got {chart.dim}")
    return chart.dim


def _check_unit_determinant(c: TensorField) -> None:
    defect = float(np.max(np.abs(c.determinant() - 1.0)))
    if defect > DET_TOL:
        raise InvalidClassError(
            f"conformal-class section determinant deviates from 1 by {defect:.3e}")


@dataclass
class ConformalSplit:
    """The pair (omega, c) with omega > 0 and det(c) = 1 pointwise."""

    omega: DensityField
    c: TensorField

    def __post_init__(self):
        if self.omega.weight != 1:
            raise WeightError("omega must be a weight-1 density")
        n = self.c.chart.dim
        if self.c.weight != Fraction(-2, n):
            raise WeightError(f"class section must have weight -2/{n}")
        if np.any(self.omega.values <= 0):
            raise FieldDomainError("omega must be strictly positive")
        _check_unit_determinant(self.c)


def conformal_split(g: MetricField) -> ConformalSplit:
    """Split g into (|dVol_g|, g * |dVol_g|^(-2/n))."""
    n = _require_dim(g.chart, "conformal_split")
    omega = volume_density(g)
    factor = density_power(omega, Fraction(-2, n))
    c = g.as_tensor().scaled_by(factor)
    return ConformalSplit(omega, c)


def recombine(omega: DensityField, c: TensorField) -> MetricField:
    """Inverse of the split: (omega, c) -> omega^(2/n) c."""
    n = _require_dim(c.chart, "recombine")
    if omega.weight != 1:
        raise WeightError("omega must be a weight-1 density")
    _check_unit_determinant(c)
    factor = density_power(omega, Fraction(2, n))
    comps = c.components * factor.values[..., None, None]
    return MetricField(c.chart, comps)


def apply_conformal_factor(g: MetricField, phi: ScalarField) -> MetricField:
    """phi^(4/(n-2)) g for a positive scalar phi (n >= 3)."""
    n = _require_dim(g.chart, "apply_conformal_factor")
    if np.any(phi.values <= 0):
        raise FieldDomainError("conformal factor must be strictly positive")
    factor = phi.values ** (4.0 / (n - 2))
    return MetricField(g.chart, g.components * factor[..., None, None])


def total_scalar_quotient(g: MetricField) -> float:
    """Normalized total scalar curvature: int R dVol / Vol^(1-2/n)."""
    n = _require_dim(g.chart, "total_scalar_quotient")
    numerator = integrate(scalar_curvature(g), volume_density(g))
    vol = riemannian_volume(g)
    return numerator / vol ** (1.0 - 2.0 / n)


def q_map(g: MetricField) -> TensorField:
    """Trace-free Ricci density: (Ric - R/n g) |dVol_g|^(1-2/n), weight 1-2/n."""
    n = _require_dim(g.chart, "q_map")
    ric = ricci(g)
    scal = scalar_curvature(g)
    trace_free = ric.components - scal.values[..., None, None] / n * g.components
    factor = density_power(volume_density(g), Fraction(n - 2, n))
    comps = trace_free * factor.values[..., None, None]
    return TensorField(g.chart, comps, Fraction(n - 2, n))


def trace_with(c: TensorField, w: TensorField) -> ScalarField:
    """tr_c w = c^ij w_ij (pointwise; matrix inverse of the c components)."""
    cinv = c.matrix_inverse()
    values = np.einsum("...ij,...ij->...", cinv, w.components)
    return ScalarField(c.chart, values, w.weight - c.weight)


def trace_free_project(c: TensorField, w: TensorField) -> TensorField:
    """w - (1/n)(tr_c w) c; idempotent, same weight as w."""
    n = c.chart.dim
    if c.weight != Fraction(-2, n):
        raise WeightError(f"projection base must have weight -2/{n}, got {c.weight}")
    tr = trace_with(c, w)
    comps = w.components - tr.values[..., None, None] / n * c.components
    return TensorField(c.chart, comps, w.weight)


def pairing(v: TensorField, w: TensorField, g: MetricField) -> float:
    """Canonical class pairing int g(v, w) |dVol_g|^(4/n).

    The operand weights must sum to 1 - 4/n so the integrand is a
    weight-1 density; the value is then independent of the choice of the
    representative g within the class (checked by tests, exact up to
    roundoff since no derivatives are involved).
    """
    n = g.chart.dim
    if v.weight + w.weight != 1 - Fraction(4, n):
        raise WeightError(
            f"pairing weights {v.weight} + {w.weight} != 1 - 4/{n}")
    ginv = g.inverse()
    inner = np.einsum("...ik,...jl,...ij,...kl->...", ginv, ginv,
                      v.components, w.components)
    factor = density_power(volume_density(g), Fraction(4, n))
    return float(np.mean(inner * factor.values) * g.chart.coordinate_volume)


def _c_inner_integral(c: TensorField, v: TensorField, w: TensorField) -> float:
    """int <v, w>_c, contracting with the inverse of the c components.

    Each inverse index pair of c contributes weight +2/n, so the operand
    weights must sum to 1 - 4/n for a weight-1 integrand.
    """
    n = c.chart.dim
    if v.weight + w.weight != 1 - Fraction(4, n):
        raise WeightError(
            f"c-pairing weights {v.weight} + {w.weight} != 1 - 4/{n}")
    cinv = c.matrix_inverse()
    inner = np.einsum("...ik,...jl,...ij,...kl->...", cinv, cinv,
                      v.components, w.components)
    return float(np.mean(inner) * c.chart.coordinate_volume)


def total_mass(omega: DensityField) -> float:
    """int omega over the chart."""
    one = ScalarField.constant(omega.chart, 1.0)
    return integrate(one, omega)


def dQ_conformal_direction(omega: DensityField, c: TensorField,
                           w: TensorField, trace_tol: float = 1e-9) -> float:
    """Directional derivative of Q at class c with frozen density omega.

    The direction w must be c-trace-free (project first if needed).  The
    value is Vol(omega)^(2/n-1) * int <w, -Ric(g) omega^(1-2/n)>_c with
    g = recombine(omega, c).
    """
    n = _require_dim(c.chart, "dQ_conformal_direction")
    tr = trace_with(c, w)
    tr_norm = float(np.max(np.abs(tr.values)))
    scale = float(np.max(np.abs(w.components))) or 1.0
    if tr_norm > trace_tol * max(1.0, scale):
        raise ValueError(
            f"direction is not c-trace-free (|tr| = {tr_norm:.3e}); "
            "apply trace_free_project first")
    g = recombine(omega, c)
    ric = ricci(g)
    factor = density_power(omega, Fraction(n - 2, n))
    integrand = TensorField(c.chart, -ric.components * factor.values[..., None, None],
                            Fraction(n - 2, n))
    vol = total_mass(omega)
    return vol ** (2.0 / n - 1.0) * _c_inner_integral(c, w, integrand)


def dQ_full(g: MetricField, h: TensorField) -> float:
    """First variation of Q at g in an arbitrary symmetric direction h.

    Vol^(2/n-1) int <h, -Ric + [R/2 - (n-2)/(2n) mean R] g>_g dVol, with
    mean R the volume average of the scalar curvature.  The mean-R term
    carries the coefficient (n-2)/(2n) because the volume normalization
    Vol^(1-2/n) contributes only that fraction of the trace variation.
    """
    n = _require_dim(g.chart, "dQ_full")
    if h.weight != 0:
        raise WeightError("dQ_full expects a plain (weight-0) tensor direction")
    ric = ricci(g)
    scal = scalar_curvature(g)
    vol = riemannian_volume(g)
    mean_r = integrate(scal, volume_density(g)) / vol
    bracket = (-ric.components
               + (0.5 * scal.values[..., None, None]
                  - (n - 2) / (2.0 * n) * mean_r) * g.components)
    ginv = g.inverse()
    inner = np.einsum("...ik,...jl,...ij,...kl->...", ginv, ginv,
                      h.components, bracket)
    val = integrate(ScalarField(g.chart, inner), volume_density(g))
    return vol ** (2.0 / n - 1.0) * val


def _det_path(c0: TensorField, v: TensorField, t: float) -> np.ndarray:
    return np.linalg.det(c0.components + t * v.components)


def class_path(c0: TensorField, v: TensorField, t: float) -> TensorField:
    """Determinant-normalized path (c0 + t v)/det(c0 + t v)^(1/n)."""
    n = c0.chart.dim
    det = _det_path(c0, v, t)
    if np.any(det <= 0):
        raise PathRangeError(f"det(c0 + t v) non-positive at t = {t}")
    comps = (c0.components + t * v.components) / det[..., None, None] ** (1.0 / n)
    return TensorField(c0.chart, comps, Fraction(-2, n))


def path_velocity(c0: TensorField, v: TensorField, t: float) -> TensorField:
    """d/dt of class_path: det^(-1/n) [v - (1/n)(tr_{c_t} v) c_t]."""
    n = c0.chart.dim
    det = _det_path(c0, v, t)
    if np.any(det <= 0):
        raise PathRangeError(f"det(c0 + t v) non-positive at t = {t}")
    ct = class_path(c0, v, t)
    projected = trace_free_project(ct, v)
    comps = projected.components / det[..., None, None] ** (1.0 / n)
    return TensorField(c0.chart, comps, Fraction(-2, n))


@dataclass
class ClassPath:
    """Linear determinant-normalized path of conformal classes on [0, t_max]."""

    c0: TensorField
    v: TensorField
    t_max: float = 1.0

    def __post_init__(self):
        _check_unit_determinant(self.c0)
        for t in np.linspace(0.0, self.t_max, 17):
            if np.any(_det_path(self.c0, self.v, float(t)) <= 0):
                raise PathRangeError(f"det(c0 + t v) non-positive at t = {t}")

    def at(self, t: float) -> TensorField:
        return class_path(self.c0, self.v, t)

    def velocity(self, t: float) -> TensorField:
        return path_velocity(self.c0, self.v, t)


def modulus_bound_rhs(c0: TensorField, v: TensorField, omega: DensityField,
                      quadrature_points: int = 16) -> float:
    """Lower-bound integral for the change of the per-class infimum.

    Gauss-Legendre quadrature in t of
    int_M <v, (-Ric(g_t) + R(g_t)/n g_t) det(c0 + t v)^(-1/n) omega^(1-2/n)>_{c_t}
    with g_t = recombine(omega, c_t).
    """
    n = _require_dim(c0.chart, "modulus_bound_rhs")
    nodes, weights = np.polynomial.legendre.leggauss(quadrature_points)
    nodes = 0.5 * (nodes + 1.0)          # map [-1, 1] -> [0, 1]
    weights = 0.5 * weights
    factor = density_power(omega, Fraction(n - 2, n))
    total = 0.0
    for t, wt in zip(nodes, weights):
        det = _det_path(c0, v, float(t))
        if np.any(det <= 0):
            raise PathRangeError(f"det(c0 + t v) non-positive at t = {t}")
        ct = class_path(c0, v, float(t))
        gt = recombine(omega, ct)
        ric = ricci(gt)
        scal = scalar_curvature(gt)
        comps = (-ric.components
                 + scal.values[..., None, None] / n * gt.components)
        comps *= (det ** (-1.0 / n) * factor.values)[..., None, None]
        integrand = TensorField(c0.chart, comps, Fraction(n - 2, n))
        total += wt * _c_inner_integral(ct, v, integrand)
    return total
