from fractions import Fraction

import numpy as np
import pytest

import yamabe_lab as yl
from yamabe_lab.errors import UnsupportedChartError, WeightError
from yamabe_lab.synthetic import conformally_flat_metric, random_trig_scalar

from oracle_conformal import (conformal_exponent, ricci_reference,
                              scalar_curvature_reference)


def unit_torus(n_nodes):
    return yl.GridChart.periodic((n_nodes,) * 3, (1.0, 1.0, 1.0))


def conformal_metric(chart):
    X, Y, Z = chart.meshgrid()
    f = conformal_exponent(X, Y, Z)
    comps = np.exp(2.0 * f)[..., None, None] * np.eye(3)
    return yl.MetricField(chart, comps)


class TestPartialDerivative:
    def test_single_mode(self):
        chart = unit_torus(32)
        X, _, _ = chart.meshgrid()
        f = yl.ScalarField(chart, np.sin(2 * np.pi * X))
        d = yl.partial_derivative(f, 0)
        err = np.max(np.abs(d.values - 2 * np.pi * np.cos(2 * np.pi * X)))
        assert err < 5e-4

    def test_fourth_order(self):
        errs = []
        for n in (16, 32):
            chart = unit_torus(n)
            X, _, _ = chart.meshgrid()
            f = yl.ScalarField(chart, np.sin(2 * np.pi * X))
            d = yl.partial_derivative(f, 0)
            errs.append(np.max(np.abs(d.values - 2 * np.pi * np.cos(2 * np.pi * X))))
        order = np.log2(errs[0] / errs[1])
        assert order > 3.5

    def test_constant_is_flat(self):
        chart = unit_torus(16)
        f = yl.ScalarField.constant(chart, 3.0)
        assert np.max(np.abs(yl.partial_derivative(f, 1).values)) == 0.0

    def test_model_chart_rejected(self):
        chart = yl.GridChart.round_sphere(1.0)
        f = yl.ScalarField.constant(chart, 1.0)
        with pytest.raises(UnsupportedChartError):
            yl.partial_derivative(f, 0)


class TestCurvatureGrid:
    def test_flat_christoffel_zero(self):
        g = yl.MetricField.flat(unit_torus(16))
        assert np.max(np.abs(yl.christoffel(g))) == 0.0

    def test_flat_curvature_zero(self):
        g = yl.MetricField.flat(unit_torus(16))
        assert np.max(np.abs(yl.ricci(g).components)) <= 1e-12
        assert np.max(np.abs(yl.scalar_curvature(g).values)) <= 1e-12

    def test_ricci_exactly_symmetric(self):
        chart = unit_torus(16)
        g = conformal_metric(chart)
        assert yl.ricci(g).symmetry_defect() == 0.0

    def test_conformal_ricci_matches_symbolic_reference(self):
        chart = unit_torus(32)
        X, Y, Z = chart.meshgrid()
        g = conformal_metric(chart)
        err = np.max(np.abs(yl.ricci(g).components - ricci_reference(X, Y, Z)))
        assert err < 5e-3

    def test_conformal_scalar_convergence_order(self):
        errs = []
        for n in (16, 32, 64):
            chart = unit_torus(n)
            X, Y, Z = chart.meshgrid()
            g = conformal_metric(chart)
            r = yl.scalar_curvature(g).values
            errs.append(np.max(np.abs(r - scalar_curvature_reference(X, Y, Z))))
        orders = [np.log2(errs[k] / errs[k + 1]) for k in range(2)]
        assert min(orders) >= 3.5


class TestCurvatureModels:
    def test_round_sphere(self):
        chart = yl.GridChart.round_sphere(2.0)
        g = yl.MetricField.model_metric(chart)
        # R = n(n-1)/radius^2 for the round sphere
        assert yl.scalar_curvature(g).values.flat[0] == pytest.approx(6.0 / 4.0)
        ric = yl.ricci(g).components
        assert np.allclose(ric, (2.0 / 4.0) * g.components)

    def test_product_cylinder(self):
        chart = yl.GridChart.product_cylinder(5.0, 1.0)
        g = yl.MetricField.model_metric(chart)
        # scalar curvature of S^1 x S^2(r) is that of the sphere factor
        assert yl.scalar_curvature(g).values.flat[0] == pytest.approx(2.0)
        ric = yl.ricci(g).components.reshape(3, 3)
        assert ric[0, 0] == pytest.approx(0.0)
        assert ric[1, 1] == pytest.approx(1.0)
        assert ric[2, 2] == pytest.approx(1.0)

    def test_flat_torus_model(self):
        chart = yl.GridChart.flat_torus_model((2.0, 1.0, 1.0))
        g = yl.MetricField.model_metric(chart)
        assert np.max(np.abs(yl.ricci(g).components)) == 0.0


class TestSecondOrderOperators:
    def test_hessian_of_constant(self):
        chart = unit_torus(16)
        g = yl.MetricField.flat(chart)
        f = yl.ScalarField.constant(chart, 2.0)
        assert np.max(np.abs(yl.hessian(g, f).components)) == 0.0

    def test_flat_laplacian_single_mode(self):
        chart = unit_torus(32)
        X, _, _ = chart.meshgrid()
        g = yl.MetricField.flat(chart)
        f = yl.ScalarField(chart, np.sin(2 * np.pi * X))
        lap = yl.laplacian(g, f)
        err = np.max(np.abs(lap.values + (2 * np.pi) ** 2 * np.sin(2 * np.pi * X)))
        assert err < 5e-3

    def test_laplacian_is_hessian_trace(self):
        chart = unit_torus(16)
        g = conformal_metric(chart)
        rng = np.random.default_rng(0)
        f = random_trig_scalar(chart, rng, modes=1, amplitude=1.0)
        hes = yl.hessian(g, f)
        tr = np.einsum("...ij,...ij->...", g.inverse(), hes.components)
        assert np.max(np.abs(tr - yl.laplacian(g, f).values)) < 1e-12

    def test_divergence_theorem(self):
        # int Delta_g f dVol_g vanishes on a closed manifold
        chart = unit_torus(64)
        rng = np.random.default_rng(12)
        g = conformally_flat_metric(
            chart, random_trig_scalar(chart, rng, modes=1, amplitude=0.02))
        f = random_trig_scalar(chart, rng, modes=1, amplitude=1.0)
        defect = yl.integrate(yl.laplacian(g, f), yl.volume_density(g))
        assert abs(defect) <= 1e-8


class TestIntegration:
    def test_weight_sum_enforced(self):
        chart = unit_torus(16)
        one = yl.ScalarField.constant(chart, 1.0)
        with pytest.raises(WeightError):
            yl.integrate(one, yl.DensityField(chart, np.ones(chart.resolution),
                                              Fraction(0)))

    def test_flat_volume(self):
        chart = yl.GridChart.periodic((16, 16, 16), (2.0, 1.0, 1.0))
        g = yl.MetricField.flat(chart)
        assert yl.riemannian_volume(g) == pytest.approx(2.0, abs=1e-14)

    def test_round_sphere_volume(self):
        chart = yl.GridChart.round_sphere(2.0)
        g = yl.MetricField.model_metric(chart)
        assert yl.riemannian_volume(g) == pytest.approx(
            2.0 * np.pi ** 2 * 8.0, rel=1e-14)

    def test_density_power_weights(self):
        chart = unit_torus(16)
        g = conformal_metric(chart)
        omega = yl.volume_density(g)
        half = yl.density_power(omega, Fraction(1, 2))
        assert half.weight == Fraction(1, 2)
        assert np.allclose(half.values ** 2, omega.values)
