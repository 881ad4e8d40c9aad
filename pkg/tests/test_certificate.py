from fractions import Fraction

import numpy as np
import pytest

import yamabe_lab as yl
from yamabe_lab.errors import EnsembleError, FieldDomainError
from yamabe_lab.synthetic import conformally_flat_metric, random_trig_scalar


def unit_torus(n_nodes=16):
    return yl.GridChart.periodic((n_nodes,) * 3, (1.0, 1.0, 1.0))


def class_members(count=3, n_nodes=16, amplitude=0.15, seed=6):
    """Conformally flat metrics, all in the class of the flat torus."""
    chart = unit_torus(n_nodes)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        f = random_trig_scalar(chart, rng, modes=1, amplitude=amplitude)
        out.append(conformally_flat_metric(chart, f))
    return out


def flat_section(chart):
    return yl.conformal_split(yl.MetricField.flat(chart)).c


class TestMinNormPoint:
    def test_singleton(self):
        a, norm, _gap, _it, optimal, history = yl.min_norm_point(np.array([[4.0]]))
        assert np.allclose(a, [1.0])
        assert norm == pytest.approx(2.0, rel=1e-14)
        assert optimal

    def test_orthonormal_pair(self):
        # min over the segment between two orthonormal points is the midpoint
        a, norm, _gap, _it, optimal, _h = yl.min_norm_point(np.eye(2))
        assert np.allclose(a, [0.5, 0.5], atol=1e-12)
        assert norm == pytest.approx(1.0 / np.sqrt(2.0), rel=1e-12)
        assert optimal

    def test_antipodal_pair_reaches_zero(self):
        gram = np.array([[1.0, -1.0], [-1.0, 1.0]])
        a, norm, _gap, _it, optimal, _h = yl.min_norm_point(gram)
        assert np.allclose(a, [0.5, 0.5], atol=1e-12)
        assert norm <= 1e-13
        assert optimal

    def test_colinear_boundary_solution(self):
        # q2 = 3 q1: the minimum sits at the vertex with the shorter vector
        gram = np.array([[1.0, 3.0], [3.0, 9.0]])
        a, norm, _gap, _it, optimal, _h = yl.min_norm_point(gram)
        assert np.allclose(a, [1.0, 0.0], atol=1e-12)
        assert norm == pytest.approx(1.0, rel=1e-12)
        assert optimal

    def test_norm_history_non_increasing(self):
        rng = np.random.default_rng(0)
        b = rng.normal(size=(6, 4))
        gram = b @ b.T
        _a, _norm, _gap, _it, _opt, history = yl.min_norm_point(gram)
        assert np.all(np.diff(history) <= 1e-12)


class TestAssemble:
    def test_empty_rejected(self):
        with pytest.raises(EnsembleError):
            yl.assemble([], flat_section(unit_torus()))

    def test_wrong_chart_rejected(self):
        member = yl.MetricField.flat(unit_torus(16))
        with pytest.raises(EnsembleError):
            yl.assemble([member], flat_section(unit_torus(32)))

    def test_wrong_class_rejected(self):
        chart = unit_torus()
        comps = np.broadcast_to(np.diag([1.3, 1.0, 1.0 / 1.3]),
                                chart.resolution + (3, 3)).copy()
        stranger = yl.MetricField(chart, comps)
        with pytest.raises(EnsembleError):
            yl.assemble([stranger], flat_section(chart))

    def test_gram_is_psd_and_symmetric(self):
        chart = unit_torus()
        ens = yl.assemble(class_members(3), flat_section(chart))
        assert ens.size == 3
        assert np.allclose(ens.gram, ens.gram.T)
        assert np.min(np.linalg.eigvalsh(ens.gram)) >= -1e-10

    def test_flat_member_has_zero_density(self):
        chart = unit_torus()
        ens = yl.assemble([yl.MetricField.flat(chart)], flat_section(chart))
        assert np.max(np.abs(ens.q_fields[0].components)) <= 1e-12
        assert abs(ens.gram[0, 0]) <= 1e-12


class TestHullFeasibility:
    def test_measure_found_on_zero_gram(self):
        result = yl.hull_feasibility(np.zeros((1, 1)))
        assert result.status == "measure-found"
        assert result.residual <= 1e-13

    def test_separated_on_definite_gram(self):
        result = yl.hull_feasibility(np.eye(2))
        assert result.status == "separated"
        assert result.margin == pytest.approx(-0.5, abs=1e-10)
        assert result.residual == pytest.approx(1.0 / np.sqrt(2.0), rel=1e-10)

    def test_measure_found_on_cancelling_pair(self):
        result = yl.hull_feasibility(np.array([[1.0, -1.0], [-1.0, 1.0]]))
        assert result.status == "measure-found"
        assert np.allclose(result.weights, [0.5, 0.5], atol=1e-12)

    def test_weights_form_probability_vector(self):
        result = yl.hull_feasibility(np.array([[2.0, 0.3], [0.3, 1.0]]))
        assert np.all(result.weights >= 0)
        assert result.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_field_level_ensemble_separated(self):
        # non-flat members of the flat class have strictly positive Gram
        chart = unit_torus()
        ens = yl.assemble(class_members(3), flat_section(chart))
        result = yl.hull_feasibility(ens)
        assert result.status == "separated"
        assert result.direction is not None
        # the separating direction pairs negatively with every member
        pairings = ens.pair_with_members(result.direction)
        assert np.max(pairings) < 0
        assert result.margin == pytest.approx(float(np.max(pairings)))

    def test_field_level_measure_on_flat_member(self):
        chart = unit_torus()
        ens = yl.assemble([yl.MetricField.flat(chart)], flat_section(chart))
        result = yl.hull_feasibility(ens)
        assert result.status == "measure-found"
        assert np.allclose(result.weights, [1.0])
        assert ens.combination_norm(result.weights) <= 1e-12


class TestDualSampleCheck:
    def test_flat_member_worst_zero(self):
        chart = unit_torus()
        ens = yl.assemble([yl.MetricField.flat(chart)], flat_section(chart))
        report = yl.dual_sample_check(ens, 8, rng_seed=1)
        assert report.worst_value == pytest.approx(0.0, abs=1e-12)
        assert report.values.shape == (8, 1)

    def test_counterexample_for_separated_ensemble(self):
        chart = unit_torus()
        ens = yl.assemble(class_members(2), flat_section(chart))
        result = yl.hull_feasibility(ens)
        assert result.status == "separated"
        # feed the separating direction back through the pairing table
        values = ens.pair_with_members(result.direction)
        assert np.all(values < 0)
        report = yl.dual_sample_check(ens, 16, rng_seed=4)
        if report.counterexample is not None:
            assert np.all(ens.pair_with_members(report.counterexample) < 0)


class TestNormalizeMeasure:
    def test_rescaling(self):
        w = yl.normalize_measure([2.0, 6.0])
        assert np.allclose(w, [0.25, 0.75])

    def test_dust_dropped(self):
        w = yl.normalize_measure([1.0, 1e-20])
        assert w[1] == 0.0
        assert w.sum() == pytest.approx(1.0, abs=1e-15)

    def test_all_zero_rejected(self):
        with pytest.raises(FieldDomainError):
            yl.normalize_measure([0.0, 0.0])

    def test_negative_rejected(self):
        with pytest.raises(FieldDomainError):
            yl.normalize_measure([1.0, -0.1])
