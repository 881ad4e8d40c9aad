"""Constant-scalar-curvature (CSC) metrics within a conformal class.

The minimizer runs projected gradient descent on the conformal factor
phi of g = phi^(4/(n-2)) g0, for the normalized total scalar curvature
with unit-volume normalization.  The descent direction is
preconditioned with a Fourier inverse of the flat conformal Laplacian,
and steps are accepted by Armijo backtracking, so the reported quotient
sequence is non-increasing.  Reported solutions are CSC critical
points; no claim of global minimality is made.

On product-cylinder model charts the search runs through the 1-D
shooting reduction instead (see `cylinder`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calculus import ricci, riemannian_volume, scalar_curvature
from .charts import ProductCylinder
from .conformal import apply_conformal_factor, conformal_split, _require_dim
from .cylinder import (BranchPoint, ShootingFailure, _nonconstant_by_period,
                       constant_branch, cylinder_csc_residual, cylinder_shoot,
                       first_bifurcation_length)
from .errors import FieldDomainError
from .fields import MetricField, ScalarField, TensorField
from .synthetic import random_trig_scalar

__all__ = [
    "SolverOptions",
    "YamabeSolution",
    "minimize_in_class",
    "multi_start",
    "einstein_residual",
    "anderson_residual",
]


@dataclass
class SolverOptions:
    tol: float = 1e-7            # stop when max|R - lam| <= tol
    max_iter: int = 600
    dedup_tol: float = 1e-3      # relative L2 distance identifying duplicates
    seed_amplitude: float = 0.3  # log-amplitude of randomized starting factors
    backtrack_limit: int = 40
    subcritical_continuation: bool = False
    continuation_steps: int = 4


@dataclass
class YamabeSolution:
    """A CSC candidate: conformal factor, metric, and diagnostics."""

    phi: ScalarField | None
    metric: MetricField | None
    lam: float
    quotient: float
    residual: float
    iterations: int
    converged: bool
    message: str = ""
    seed_index: int | None = None
    branch: BranchPoint | None = field(default=None, repr=False)


def _roll_deriv(values, axis, h):
    f1 = np.roll(values, -1, axis) - np.roll(values, 1, axis)
    f2 = np.roll(values, -2, axis) - np.roll(values, 2, axis)
    return (8.0 * f1 - f2) / (12.0 * h)


class _ConformalDescent:
    """Cached background data for descent over the conformal factor."""

    def __init__(self, g0: MetricField, exponent_scale: float = 1.0):
        chart = g0.chart
        chart.require_grid("conformal-factor descent")
        n = _require_dim(chart, "conformal-factor descent")
        self.chart = chart
        self.n = n
        self.a = 4.0 * (n - 1) / (n - 2)
        # exponent_scale < 1 runs a subcritical surrogate of the volume exponent
        self.p = 2.0 * n / (n - 2) * exponent_scale
        self.h = chart.spacing
        self.ginv0 = g0.inverse()
        self.r0 = scalar_curvature(g0).values
        self.sqrtdet0 = g0.sqrt_det()
        self.coordvol = chart.coordinate_volume
        self._build_preconditioner()

    def _build_preconditioner(self):
        # symbol of the centered first-difference stencil, not the
        # continuum k: the two differ near Nyquist, where the stencil
        # response vanishes and 1/k^2 would freeze those modes
        symbols = np.meshgrid(*[
            (8.0 * np.sin(theta) - np.sin(2.0 * theta)) / (6.0 * h)
            for r, h in zip(self.chart.resolution, self.h)
            for theta in [2.0 * np.pi * np.fft.fftfreq(r)]
        ], indexing="ij")
        k2 = sum(s**2 for s in symbols)
        cg = float(np.mean(np.einsum("...ii->...", self.ginv0))) / self.n
        shift = 1.0 + float(np.max(np.abs(self.r0)))
        # factor 2 matches the gradient 2(L phi - ...), so a unit step
        # solves the linearized problem instead of overshooting it
        self.precond = 1.0 / (2.0 * (self.a * cg * k2 + shift))

    def laplacian0(self, values: np.ndarray) -> np.ndarray:
        """Divergence-form Laplace-Beltrami of g0.

        div(sqrtdet g^{ij} d_j f)/sqrtdet with central-difference first
        derivatives.  The stencil is antisymmetric on the periodic grid,
        so the associated Dirichlet energy has an exact discrete
        gradient: the operator is self-adjoint for the sqrtdet measure
        to machine precision, not just to truncation order.
        """
        df = np.stack([_roll_deriv(values, ax, self.h[ax])
                       for ax in range(self.n)], axis=-1)
        flux = np.einsum("...ij,...j,...->...i", self.ginv0, df, self.sqrtdet0)
        div = sum(_roll_deriv(flux[..., ax], ax, self.h[ax])
                  for ax in range(self.n))
        return div / self.sqrtdet0

    def operator(self, phi: np.ndarray) -> np.ndarray:
        """Conformal Laplacian action: -a lap(phi) + R0 phi."""
        return -self.a * self.laplacian0(phi) + self.r0 * phi

    def volume(self, phi: np.ndarray) -> float:
        return float(np.mean(phi**self.p * self.sqrtdet0) * self.coordvol)

    def numerator(self, phi: np.ndarray, lphi: np.ndarray) -> float:
        return float(np.mean(phi * lphi * self.sqrtdet0) * self.coordvol)

    def quotient(self, phi: np.ndarray) -> float:
        lphi = self.operator(phi)
        return (self.numerator(phi, lphi)
                / self.volume(phi) ** ((self.n - 2.0) / self.n))

    def normalize(self, phi: np.ndarray) -> np.ndarray:
        return phi / self.volume(phi) ** (1.0 / self.p)

    def scalar_curvature_of(self, phi: np.ndarray, lphi=None) -> np.ndarray:
        if lphi is None:
            lphi = self.operator(phi)
        return phi ** (1.0 - self.p) * lphi


def _descend(problem: _ConformalDescent, phi: np.ndarray, opts: SolverOptions):
    """Preconditioned Armijo descent; returns (phi, info dict)."""
    phi = problem.normalize(phi)
    iterations = 0
    message = ""
    converged = False
    lam = residual = quotient = np.nan
    for iterations in range(1, opts.max_iter + 1):
        lphi = problem.operator(phi)
        num = problem.numerator(phi, lphi)
        vol = problem.volume(phi)           # == 1 after normalize
        quotient = num / vol ** ((problem.n - 2.0) / problem.n)
        r_field = problem.scalar_curvature_of(phi, lphi)
        lam = num / vol
        residual = float(np.max(np.abs(r_field - lam)))
        if residual <= opts.tol:
            converged = True
            break
        grad = 2.0 * (lphi - quotient * phi ** (problem.p - 1.0)) * problem.sqrtdet0
        direction = -np.real(np.fft.ifftn(problem.precond * np.fft.fftn(grad)))
        slope = float(np.mean(grad * direction) * problem.coordvol)
        if slope >= 0:
            message = "preconditioned direction is not a descent direction"
            break
        step = 1.0
        accepted = False
        for _ in range(opts.backtrack_limit):
            trial = phi + step * direction
            if np.min(trial) > 0:
                q_trial = problem.quotient(trial)
                if q_trial <= quotient + 1e-4 * step * slope:
                    phi = problem.normalize(trial)
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            message = "line search stalled"
            break
    else:
        message = "iteration cap reached"
    info = dict(lam=lam, residual=residual, quotient=quotient,
                iterations=iterations, converged=converged, message=message)
    return phi, info


def minimize_in_class(g0: MetricField, opts: SolverOptions | None = None,
                      initial_phi: ScalarField | None = None) -> YamabeSolution:
    """Search for a CSC metric phi^(4/(n-2)) g0 of unit volume.

    Non-convergence is reported through the `converged` flag and
    `message`, never as an exception; the best iterate is returned with
    its honest residual.
    """
    opts = opts or SolverOptions()
    chart = g0.chart
    n = _require_dim(chart, "minimize_in_class")
    if not chart.is_grid:
        return _model_solution(g0, opts)
    phi = (initial_phi.values.copy() if initial_phi is not None
           else np.ones(chart.resolution))
    if np.any(phi <= 0):
        raise FieldDomainError("initial conformal factor must be positive")
    # descend against the unit-determinant representative of the class,
    # not g0 itself: the background then carries no conformal factor,
    # so a conformally flat class sees an exactly flat background
    split = conformal_split(g0)
    ghat = MetricField(chart, split.c.components)
    w = split.omega.values ** ((n - 2.0) / (2.0 * n))   # g0 = w^{4/(n-2)} ghat
    phi = phi * w
    if opts.subcritical_continuation:
        for k in range(1, opts.continuation_steps + 1):
            scale = 0.7 + 0.3 * k / opts.continuation_steps
            sub = _ConformalDescent(ghat, exponent_scale=scale)
            relaxed = SolverOptions(tol=max(opts.tol, 1e-4),
                                    max_iter=opts.max_iter // 2)
            phi, _ = _descend(sub, phi, relaxed)
    problem = _ConformalDescent(ghat)
    phi, info = _descend(problem, phi, opts)
    phi_field = ScalarField(chart, phi / w)
    metric = apply_conformal_factor(ghat, ScalarField(chart, phi))
    return YamabeSolution(phi=phi_field, metric=metric, lam=info["lam"],
                          quotient=info["quotient"], residual=info["residual"],
                          iterations=info["iterations"],
                          converged=info["converged"], message=info["message"])


def _model_solution(g0: MetricField, opts: SolverOptions) -> YamabeSolution:
    """Model charts are homogeneous: the unit-volume rescaling is CSC."""
    chart = g0.chart
    n = chart.dim
    p = 2.0 * n / (n - 2)
    vol = riemannian_volume(g0)
    phi = ScalarField.constant(chart, vol ** (-1.0 / p))
    metric = apply_conformal_factor(g0, phi)
    lam = float(scalar_curvature(metric).values.flat[0])
    return YamabeSolution(phi=phi, metric=metric, lam=lam, quotient=lam,
                          residual=0.0, iterations=0, converged=True)


def _relative_l2(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a.ravel()), np.linalg.norm(b.ravel()), 1e-300)
    return float(np.linalg.norm((a - b).ravel()) / scale)


def multi_start(g0: MetricField, seed_count: int, rng_seed: int,
                opts: SolverOptions | None = None) -> list[YamabeSolution]:
    """Descent from randomized positive seeds, deduplicated.

    Returns distinct converged CSC candidates sorted by quotient; seeds
    that failed to converge are appended as flagged entries.  On a
    product-cylinder model chart the seeds drive the 1-D shooting
    reduction instead of grid descent.
    """
    opts = opts or SolverOptions()
    chart = g0.chart
    if not chart.is_grid and isinstance(chart.model, ProductCylinder):
        return _cylinder_multi_start(g0, seed_count, rng_seed, opts)
    rng = np.random.default_rng(rng_seed)
    solutions: list[YamabeSolution] = []
    for seed_index in range(seed_count):
        if chart.is_grid:
            bump = random_trig_scalar(chart, rng, modes=2,
                                      amplitude=opts.seed_amplitude)
            phi0 = ScalarField(chart, np.exp(bump.values))
            sol = minimize_in_class(g0, opts, initial_phi=phi0)
        else:
            sol = minimize_in_class(g0, opts)
        sol.seed_index = seed_index
        solutions.append(sol)
    return _dedup(solutions, opts.dedup_tol)


def _dedup(solutions: list[YamabeSolution], tol: float) -> list[YamabeSolution]:
    distinct: list[YamabeSolution] = []
    failed: list[YamabeSolution] = []
    for sol in solutions:
        if not sol.converged:
            failed.append(sol)
            continue
        probe = sol.phi.values if sol.phi is not None else sol.branch.u
        duplicate = False
        for kept in distinct:
            ref = kept.phi.values if kept.phi is not None else kept.branch.u
            if probe.shape == ref.shape and _relative_l2(probe, ref) < tol:
                duplicate = True
                break
        if not duplicate:
            distinct.append(sol)
    distinct.sort(key=lambda s: s.quotient)
    return distinct + failed


def _branch_to_solution(bp: BranchPoint, seed_index=None) -> YamabeSolution:
    unit = bp.normalized_unit_volume().aligned()
    residual = cylinder_csc_residual(unit.u, unit.L, unit.dim, unit.lam,
                                     unit.sphere_radius)
    return YamabeSolution(phi=None, metric=None, lam=unit.lam,
                          quotient=unit.lam, residual=residual,
                          iterations=0, converged=True, branch=unit,
                          seed_index=seed_index)


def _cylinder_multi_start(g0: MetricField, seed_count: int, rng_seed: int,
                          opts: SolverOptions) -> list[YamabeSolution]:
    model: ProductCylinder = g0.chart.model
    n = g0.chart.dim
    L, radius = model.circumference, model.sphere_radius
    r0 = (n - 1) * (n - 2) / radius**2
    rng = np.random.default_rng(rng_seed)
    candidates: list[YamabeSolution] = []
    candidates.append(_branch_to_solution(
        constant_branch(L, n, 1.0, radius, samples=1024)))
    # deterministic continuation from each admissible bifurcation
    l_star = first_bifurcation_length(n, radius)
    for bumps in range(1, int(L / l_star) + 1):
        found = _nonconstant_by_period(L, n, bumps, radius, samples=1024)
        if found is not None:
            candidates.append(_branch_to_solution(found))
    # randomized shooting seeds
    for seed_index in range(seed_count):
        u0 = float(np.exp(rng.normal(scale=opts.seed_amplitude)))
        lam0 = r0 * float(np.exp(rng.normal(scale=0.2)))
        result = cylinder_shoot(L, n, u0, 0.0, lam0, radius, samples=1024)
        if isinstance(result, ShootingFailure):
            candidates.append(YamabeSolution(
                phi=None, metric=None, lam=result.lam, quotient=np.nan,
                residual=result.residual, iterations=0, converged=False,
                message=result.message, seed_index=seed_index))
        else:
            sol = _branch_to_solution(result, seed_index)
            candidates.append(sol)
    return _dedup(candidates, opts.dedup_tol)


def einstein_residual(g: MetricField) -> float:
    """Sup-norm (pointwise Frobenius norm in g) of Ric - R/n g."""
    n = g.chart.dim
    ric = ricci(g)
    scal = scalar_curvature(g)
    trace_free = TensorField(
        g.chart, ric.components - scal.values[..., None, None] / n * g.components)
    return float(np.sqrt(np.max(g.norm_squared(trace_free))))


def anderson_residual(g: MetricField, u: ScalarField) -> float:
    """Defect of the two-metric compatibility identity.

    Compares u^-1 (1 + u^(n-2)) [Ric - R/n g] against
    -(n-2) [Hess_g(u^-1) - (1/n) Lap_g(u^-1) g] in the g-Frobenius
    sup-norm.  The trace-free reading (with the metric closing the
    second bracket) is used.
    """
    from .calculus import hessian, laplacian
    n = g.chart.dim
    if np.any(u.values <= 0):
        raise FieldDomainError("u must be strictly positive")
    ric = ricci(g)
    scal = scalar_curvature(g)
    lhs_factor = (1.0 + u.values ** (n - 2)) / u.values
    lhs = lhs_factor[..., None, None] * (
        ric.components - scal.values[..., None, None] / n * g.components)
    uinv = ScalarField(g.chart, 1.0 / u.values)
    hess = hessian(g, uinv)
    lap = laplacian(g, uinv)
    rhs = -(n - 2.0) * (hess.components
                        - lap.values[..., None, None] / n * g.components)
    defect = TensorField(g.chart, lhs - rhs)
    return float(np.sqrt(np.max(g.norm_squared(defect))))
