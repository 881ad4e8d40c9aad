"""Tensor calculus on periodic grids and closed-form model charts.

All grid derivatives are 4th-order centered finite differences with
periodic wraparound.  Integration is the periodic trapezoid rule
(nodal mean times coordinate volume), which is spectrally accurate for
smooth periodic integrands.  Model charts bypass differentiation
entirely and return their analytic curvature.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .charts import GridChart
from .errors import UnsupportedChartError, WeightError
from .fields import DensityField, MetricField, ScalarField, TensorField

__all__ = [
    "partial_derivative",
    "christoffel",
    "ricci",
    "scalar_curvature",
    "hessian",
    "laplacian",
    "volume_density",
    "density_power",
    "integrate",
    "riemannian_volume",
]


def _roll_deriv(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """4th-order centered periodic difference along one array axis."""
    f1 = np.roll(values, -1, axis) - np.roll(values, 1, axis)
    f2 = np.roll(values, -2, axis) - np.roll(values, 2, axis)
    return (8.0 * f1 - f2) / (12.0 * h)


def partial_derivative(f, axis: int):
    """Coordinate partial derivative along `axis`.

    Accepts a ScalarField (returns a ScalarField of the same weight) or a
    bare component array together with a chart via `f = (chart, array)`.
    """
    if isinstance(f, ScalarField):
        chart = f.chart
        chart.require_grid("partial_derivative")
        d = _roll_deriv(f.values, axis, chart.spacing[axis])
        return ScalarField(chart, d, f.weight)
    chart, array = f
    chart.require_grid("partial_derivative")
    return _roll_deriv(np.asarray(array, dtype=float), axis, chart.spacing[axis])


def _grad_stack(chart: GridChart, values: np.ndarray) -> np.ndarray:
    """All coordinate derivatives, stacked on a trailing axis."""
    h = chart.spacing
    return np.stack([_roll_deriv(values, a, h[a]) for a in range(chart.dim)], axis=-1)


def _is_constant_multiple_of_identity(comps: np.ndarray, dim: int):
    s = comps.reshape(-1, dim, dim)[0, 0, 0]
    if np.allclose(comps, s * np.eye(dim), rtol=1e-12, atol=1e-12 * abs(s)):
        return float(s)
    return None


def _model_scale(g: MetricField) -> float:
    """Homothety factor of a model-chart metric relative to the canonical one."""
    s = _is_constant_multiple_of_identity(g.components, g.dim)
    if s is None:
        raise UnsupportedChartError(
            "model charts only support constant rescalings of the canonical metric")
    return s


def christoffel(g: MetricField) -> np.ndarray:
    """Levi-Civita symbols, indexed (node..., k, i, j); symmetric in (i, j)."""
    chart = g.chart
    if not chart.is_grid:
        _model_scale(g)  # homogeneous frame: symbols vanish
        return np.zeros(chart.resolution + (chart.dim,) * 3)
    dg = _grad_stack(chart, g.components)  # (..., i, j, l) = d_l g_ij
    ginv = g.inverse()
    # Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)
    term = (np.moveaxis(dg, -1, -3)            # (..., i, j, l) <- d_i g_jl
            + np.moveaxis(dg, -1, -2)          # d_j g_il
            - dg)                              # d_l g_ij
    return 0.5 * np.einsum("...kl,...ijl->...kij", ginv, term)


def ricci(g: MetricField) -> TensorField:
    """Coordinate Ricci tensor (weight 0); exactly symmetric."""
    chart = g.chart
    if not chart.is_grid:
        _model_scale(g)
        ric = np.broadcast_to(chart.model.ricci_frame(chart.dim),
                              chart.resolution + (chart.dim,) * 2).copy()
        return TensorField(chart, ric)
    gamma = christoffel(g)
    dgamma = _grad_stack(chart, gamma)  # (..., k, i, j, l) = d_l Gamma^k_ij
    # R_ij = d_k Gamma^k_ij - d_j Gamma^k_ik + Gamma^k_kl Gamma^l_ij - Gamma^k_jl Gamma^l_ik
    term1 = np.einsum("...kijk->...ij", dgamma)
    term2 = np.einsum("...kikj->...ij", dgamma)
    contracted = np.einsum("...kkl->...l", gamma)
    term3 = np.einsum("...l,...lij->...ij", contracted, gamma)
    term4 = np.einsum("...kjl,...lik->...ij", gamma, gamma)
    ric = term1 - term2 + term3 - term4
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    return TensorField(chart, ric)


def scalar_curvature(g: MetricField) -> ScalarField:
    """Scalar curvature R(g) = g^ij Ric_ij; closed form on model charts."""
    chart = g.chart
    if not chart.is_grid:
        s = _model_scale(g)
        value = chart.model.scalar_curvature(chart.dim) / s
        return ScalarField.constant(chart, value)
    ric = ricci(g)
    values = np.einsum("...ij,...ij->...", g.inverse(), ric.components)
    return ScalarField(chart, values)


def hessian(g: MetricField, f: ScalarField) -> TensorField:
    """Covariant Hessian of a scalar: d_i d_j f - Gamma^k_ij d_k f."""
    chart = g.chart
    if not chart.is_grid:
        return TensorField.zero(chart)  # model fields are homogeneous
    df = _grad_stack(chart, f.values)
    ddf = np.stack([_grad_stack(chart, df[..., a]) for a in range(chart.dim)], axis=-2)
    gamma = christoffel(g)
    hess = ddf - np.einsum("...kij,...k->...ij", gamma, df)
    return TensorField(chart, 0.5 * (hess + np.swapaxes(hess, -1, -2)))


def laplacian(g: MetricField, f: ScalarField) -> ScalarField:
    """Geometer's Laplacian: trace of the Hessian (negative spectrum on flat)."""
    chart = g.chart
    if not chart.is_grid:
        return ScalarField.constant(chart, 0.0)
    hess = hessian(g, f)
    values = np.einsum("...ij,...ij->...", g.inverse(), hess.components)
    return ScalarField(chart, values)


def volume_density(g: MetricField) -> DensityField:
    """|dVol_g| as a weight-1 density: sqrt(det g) per node."""
    return DensityField(g.chart, g.sqrt_det(), Fraction(1))


def density_power(rho: DensityField, alpha) -> DensityField:
    """rho^alpha with exact weight arithmetic; rho > 0 for fractional alpha."""
    return rho.power(alpha)


def integrate(f: ScalarField, rho: DensityField) -> float:
    """Integral of f against a weight-1 density over the closed chart.

    The combined weight must be exactly 1 so the integrand is a true
    density.  Summation is the numpy pairwise reduction in axis-major
    order, so results do not depend on any parallel chunking.
    """
    if f.weight + rho.weight != 1:
        raise WeightError(
            f"integrand weight {f.weight} + {rho.weight} != 1")
    if f.chart != rho.chart:
        raise ValueError("fields live on different charts")
    return float(np.mean(f.values * rho.values) * f.chart.coordinate_volume)


def riemannian_volume(g: MetricField) -> float:
    """Total volume of (M, g)."""
    one = ScalarField.constant(g.chart, 1.0)
    return integrate(one, volume_density(g))
