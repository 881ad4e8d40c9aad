"""Convex-hull balance certificate for ensembles of CSC metrics.

Given finitely many metrics in one conformal class, the trace-free
Ricci densities of the members span a finite-dimensional convex
geometry.  The engine decides whether the zero section lies in the
convex hull of those densities: if yes it emits probability weights (a
finite balancing measure), if no it produces a separating direction
whose pairing with every member is negative.

The min-norm point over the probability simplex is computed by
Frank-Wolfe with away steps, which touches the fields only through
their Gram matrix of pairings and is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .conformal import conformal_split, pairing, q_map, recombine, trace_free_project
from .calculus import density_power, volume_density, riemannian_volume
from .errors import EnsembleError, FieldDomainError
from .fields import DensityField, MetricField, TensorField
from .synthetic import random_symmetric_tensor

__all__ = [
    "QEnsemble",
    "CertificateResult",
    "DualCheckReport",
    "assemble",
    "min_norm_point",
    "hull_feasibility",
    "dual_sample_check",
    "normalize_measure",
]

CLASS_TOL = 1e-8
PSD_TOL = 1e-10
DROP_TOL = 1e-14


@dataclass
class QEnsemble:
    """Metrics sharing one class, their trace-free Ricci densities, and the Gram matrix."""

    c: TensorField
    members: list
    q_fields: list
    omega_ref: DensityField       # unit-mass reference density of the class
    g_ref: MetricField            # representative used for contractions
    gram: np.ndarray

    @property
    def size(self) -> int:
        return len(self.members)

    def adjusted(self, w: TensorField) -> TensorField:
        """Multiply by omega_ref^-1: weight 1-2/n -> -2/n."""
        return w.scaled_by(density_power(self.omega_ref, -1))

    def pair_with_members(self, v: TensorField) -> np.ndarray:
        """Pairings <v, Q_i> for a weight -2/n direction."""
        return np.array([pairing(v, q, self.g_ref) for q in self.q_fields])

    def combination(self, weights) -> TensorField:
        comps = sum(w * q.components for w, q in zip(weights, self.q_fields))
        n = self.c.chart.dim
        return TensorField(self.c.chart, comps, Fraction(n - 2, n))

    def combination_norm(self, weights) -> float:
        """Pairing norm of sum_i w_i Q_i recomputed from the raw fields."""
        combo = self.combination(weights)
        return float(np.sqrt(max(pairing(self.adjusted(combo), combo, self.g_ref), 0.0)))


def assemble(metrics: list, c: TensorField) -> QEnsemble:
    """Build the ensemble, validating the shared conformal class.

    The Gram matrix is assembled with the weight-adjusting reference
    density (the unit-mass volume density of the first member), which
    makes the pairing of two trace-free Ricci densities well-defined.
    """
    if not metrics:
        raise EnsembleError("ensemble needs at least one metric")
    chart = c.chart
    for index, g in enumerate(metrics):
        if g.chart != chart:
            raise EnsembleError(f"member {index} lives on a different chart")
        split = conformal_split(g)
        defect = float(np.max(np.abs(split.c.components - c.components)))
        if defect > CLASS_TOL:
            raise EnsembleError(
                f"member {index} is not in the shared conformal class "
                f"(section defect {defect:.3e})")
    first = metrics[0]
    omega_raw = volume_density(first)
    omega_ref = DensityField(chart, omega_raw.values / riemannian_volume(first),
                             Fraction(1))
    g_ref = recombine(omega_ref, c)
    q_fields = [q_map(g) for g in metrics]
    adjust = density_power(omega_ref, -1)
    m = len(metrics)
    gram = np.zeros((m, m))
    for i in range(m):
        qi_adjusted = q_fields[i].scaled_by(adjust)
        for j in range(i, m):
            gram[i, j] = gram[j, i] = pairing(qi_adjusted, q_fields[j], g_ref)
    eigs = np.linalg.eigvalsh(gram)
    scale = max(float(eigs[-1]), 1.0)
    if eigs[0] < -PSD_TOL * scale:
        raise EnsembleError(f"Gram matrix not PSD (min eigenvalue {eigs[0]:.3e})")
    return QEnsemble(c, list(metrics), q_fields, omega_ref, g_ref, gram)


@dataclass
class CertificateResult:
    status: str                       # "measure-found", "separated", "inconclusive"
    weights: np.ndarray
    residual: float                   # pairing norm of the weighted combination
    direction: TensorField | None = None
    margin: float | None = None       # max_i <direction, Q_i>; negative if separated
    iterations: int = 0
    gap: float = float("nan")         # final Frank-Wolfe dual gap
    norm_history: np.ndarray | None = field(default=None, repr=False)


def min_norm_point(gram: np.ndarray, target_norm: float = 0.0,
                   gap_tol: float = 1e-13, max_iter: int = 20000):
    """Minimize || sum_i a_i q_i || over the probability simplex.

    Frank-Wolfe with away steps and exact line search on the quadratic
    a^T G a; the iterate norm sequence is non-increasing.  Returns
    (weights, norm, gap, iterations, optimal_flag, history).
    """
    gram = np.asarray(gram, dtype=float)
    m = gram.shape[0]
    a = np.zeros(m)
    a[int(np.argmin(np.diag(gram)))] = 1.0
    history = []
    gap = np.inf
    iterations = 0
    optimal = False
    for iterations in range(1, max_iter + 1):
        ga = gram @ a
        value = float(a @ ga)
        history.append(np.sqrt(max(value, 0.0)))
        if history[-1] <= target_norm:
            optimal = True
            break
        fw = int(np.argmin(ga))
        support = np.flatnonzero(a > 0)
        away = int(support[np.argmax(ga[support])])
        gap = 2.0 * (value - ga[fw])          # FW dual gap of a^T G a
        if gap <= gap_tol * max(1.0, abs(value)):
            optimal = True
            break
        away_gap = 2.0 * (ga[away] - value)
        if gap >= away_gap:
            d = -a.copy()
            d[fw] += 1.0
            gamma_max = 1.0
        else:
            d = a.copy()
            d[away] -= 1.0
            gamma_max = a[away] / (1.0 - a[away]) if a[away] < 1.0 else 0.0
        curvature = float(d @ gram @ d)
        slope = float(ga @ d)
        if curvature <= 0.0:
            gamma = gamma_max
        else:
            gamma = min(max(-slope / curvature, 0.0), gamma_max)
        if gamma == 0.0:
            optimal = True
            break
        a = a + gamma * d
        a = np.clip(a, 0.0, None)
        a /= a.sum()
    ga = gram @ a
    norm = float(np.sqrt(max(a @ ga, 0.0)))
    return a, norm, float(gap), iterations, optimal, np.asarray(history)


def hull_feasibility(ensemble, tol: float = 1e-7) -> CertificateResult:
    """Decide hull membership of 0 among the member densities.

    Accepts a QEnsemble or a bare Gram matrix.  The tolerance is scaled
    by the largest member norm so the verdict is invariant under a
    common rescaling of the inputs.
    """
    if isinstance(ensemble, QEnsemble):
        gram = ensemble.gram
        ens = ensemble
    else:
        gram = np.asarray(ensemble, dtype=float)
        ens = None
    scale = float(np.sqrt(np.max(np.diag(gram)))) if gram.size else 0.0
    threshold = tol * max(scale, 1e-300)
    weights, norm, gap, iterations, optimal, history = min_norm_point(
        gram, target_norm=threshold)
    if norm <= threshold or scale == 0.0:
        return CertificateResult("measure-found", weights, norm,
                                 iterations=iterations, gap=gap,
                                 norm_history=history)
    if optimal:
        ga = gram @ weights
        margin = float(-np.min(ga))
        direction = None
        if ens is not None:
            combo = ens.combination(weights)
            direction = (-1.0) * ens.adjusted(combo)
            margin = float(np.max(ens.pair_with_members(direction)))
        return CertificateResult("separated", weights, norm, direction=direction,
                                 margin=margin, iterations=iterations, gap=gap,
                                 norm_history=history)
    return CertificateResult("inconclusive", weights, norm,
                             iterations=iterations, gap=gap,
                             norm_history=history)


@dataclass
class DualCheckReport:
    """Sampled check that every direction pairs nonnegatively with some member."""

    worst_value: float                  # min over directions of max_i <v, Q_i>
    values: np.ndarray                  # (directions, members) pairing table
    counterexample: TensorField | None  # direction with all pairings negative


def dual_sample_check(ens: QEnsemble, direction_count: int,
                      rng_seed: int) -> DualCheckReport:
    """Sample random trace-free directions and pair them with the members.

    A nonnegative worst value is consistent with the per-direction
    optimality criterion; any direction with all pairings negative is
    returned as an explicit counterexample.
    """
    if ens.size == 0:
        raise EnsembleError("ensemble is empty")
    n = ens.c.chart.dim
    rng = np.random.default_rng(rng_seed)
    rows = []
    worst = np.inf
    counterexample = None
    for _ in range(direction_count):
        raw = random_symmetric_tensor(ens.c.chart, rng, modes=2, amplitude=1.0,
                                      weight=Fraction(-2, n))
        v = trace_free_project(ens.c, raw)
        values = ens.pair_with_members(v)
        rows.append(values)
        best = float(np.max(values))
        if best < worst:
            worst = best
            if best < 0:
                counterexample = v
    return DualCheckReport(worst, np.array(rows), counterexample)


def normalize_measure(weights) -> np.ndarray:
    """Rescale nonnegative weights to a probability vector, dropping dust.

    Entries below 1e-14 of the total are set to exactly zero before the
    final rescaling.  All-zero (or negative) input is a domain error.
    """
    w = np.asarray(weights, dtype=float).copy()
    if w.size == 0 or np.all(w == 0):
        raise FieldDomainError("measure weights must not be all zero")
    if np.any(w < 0):
        raise FieldDomainError("measure weights must be nonnegative")
    w /= w.sum()
    w[w < DROP_TOL] = 0.0
    w /= w.sum()
    return w
