"""Seeded generators for smooth test fields on periodic grids.

All generators draw from a caller-supplied numpy Generator and build
band-limited trigonometric polynomials, so the fields are smooth,
periodic, and reproducible.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .charts import GridChart
from .fields import MetricField, ScalarField, TensorField

__all__ = [
    "random_trig_scalar",
    "random_symmetric_tensor",
    "conformally_flat_metric",
    "perturbed_flat_metric",
]


def random_trig_scalar(chart: GridChart, rng: np.random.Generator,
                       modes: int = 2, amplitude: float = 0.1,
                       terms: int = 4) -> ScalarField:
    """Random real trig polynomial with wave numbers bounded by `modes`.

    Normalized so the max amplitude is exactly `amplitude` (unless the
    draw is identically zero).
    """
    coords = chart.meshgrid()
    values = np.zeros(chart.resolution)
    for _ in range(terms):
        k = rng.integers(-modes, modes + 1, size=chart.dim)
        if not np.any(k):
            continue
        coeff = rng.normal()
        phase = rng.uniform(0, 2 * np.pi)
        arg = sum(2 * np.pi * ki / p * x
                  for ki, p, x in zip(k, chart.periods, coords))
        values += coeff * np.cos(arg + phase)
    peak = np.max(np.abs(values))
    if peak > 0:
        values *= amplitude / peak
    return ScalarField(chart, values)


def random_symmetric_tensor(chart: GridChart, rng: np.random.Generator,
                            modes: int = 2, amplitude: float = 0.1,
                            weight=Fraction(0)) -> TensorField:
    """Random symmetric tensor field with trig-polynomial entries."""
    n = chart.dim
    comps = np.zeros(chart.resolution + (n, n))
    for i in range(n):
        for j in range(i, n):
            entry = random_trig_scalar(chart, rng, modes, amplitude).values
            comps[..., i, j] = entry
            comps[..., j, i] = entry
    return TensorField(chart, comps, weight)


def conformally_flat_metric(chart: GridChart, f: ScalarField) -> MetricField:
    """exp(2 f) times the flat coordinate metric."""
    n = chart.dim
    factor = np.exp(2.0 * f.values)
    comps = factor[..., None, None] * np.eye(n)
    return MetricField(chart, comps)


def perturbed_flat_metric(chart: GridChart, rng: np.random.Generator,
                          amplitude: float = 0.05, modes: int = 1) -> MetricField:
    """Flat metric plus a small random symmetric trig perturbation.

    The amplitude must be small enough to keep the result positive
    definite; the MetricField constructor enforces that.
    """
    n = chart.dim
    pert = random_symmetric_tensor(chart, rng, modes, amplitude)
    comps = np.broadcast_to(np.eye(n), chart.resolution + (n, n)) + pert.components
    return MetricField(chart, comps)
