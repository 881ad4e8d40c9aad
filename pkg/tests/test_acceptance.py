"""Acceptance gate: one test per headline capability.

Each test prints a single PASS/FAIL line (visible with ``pytest -s`` or
in captured output) before asserting, so the gate reads as a checklist.
"""

from fractions import Fraction

import numpy as np
import pytest

import yamabe_lab as yl
from yamabe_lab.cli import main as cli_main
from yamabe_lab.synthetic import (conformally_flat_metric, perturbed_flat_metric,
                                  random_symmetric_tensor, random_trig_scalar)

from oracle_conformal import conformal_exponent, scalar_curvature_reference


def report(index, label, ok):
    print(f"criterion {index:2d} ({label}): {'PASS' if ok else 'FAIL'}")
    assert ok, f"criterion {index} ({label}) failed"


def unit_torus(n_nodes):
    return yl.GridChart.periodic((n_nodes,) * 3, (1.0, 1.0, 1.0))


def test_criterion_01_sharp_constant():
    # Lambda(n) = n(n-1) vol(S^n)^(2/n); for n = 3 with vol(S^3) = 2 pi^2
    expected = 6.0 * (2.0 * np.pi ** 2) ** (2.0 / 3.0)
    err = abs(yl.sphere_quotient_bound(3) - expected)
    report(1, "sharp constant", err <= 1e-9)


def test_criterion_02_round_sphere_equality():
    chart = yl.GridChart.round_sphere(1.0)
    q = yl.total_scalar_quotient(yl.MetricField.model_metric(chart))
    err = abs(q - yl.sphere_quotient_bound(3))
    report(2, "round-sphere equality", err <= 1e-9)


def test_criterion_03_curvature_oracle():
    flat = yl.MetricField.flat(unit_torus(16))
    flat_err = max(np.max(np.abs(yl.ricci(flat).components)),
                   np.max(np.abs(yl.scalar_curvature(flat).values)))
    errs = []
    for n_nodes in (16, 32, 64):
        chart = unit_torus(n_nodes)
        X, Y, Z = chart.meshgrid()
        f = conformal_exponent(X, Y, Z)
        g = yl.MetricField(chart, np.exp(2.0 * f)[..., None, None] * np.eye(3))
        r = yl.scalar_curvature(g).values
        errs.append(np.max(np.abs(r - scalar_curvature_reference(X, Y, Z))))
    orders = [np.log2(errs[k] / errs[k + 1]) for k in range(2)]
    report(3, "curvature oracle", flat_err <= 1e-12 and min(orders) >= 3.5)


def test_criterion_04_first_variations():
    chart = unit_torus(32)
    rng = np.random.default_rng(7)
    g = perturbed_flat_metric(chart, rng, amplitude=0.08, modes=1)
    split = yl.conformal_split(g)
    eps = 1e-4
    worst = 0.0
    for _ in range(20):
        h = random_symmetric_tensor(chart, rng, modes=1, amplitude=0.05)
        analytic = yl.dQ_full(g, h)
        plus = yl.MetricField(chart, g.components + eps * h.components)
        minus = yl.MetricField(chart, g.components - eps * h.components)
        fd = (yl.total_scalar_quotient(plus)
              - yl.total_scalar_quotient(minus)) / (2 * eps)
        worst = max(worst, abs(analytic - fd) / abs(fd))
        raw = random_symmetric_tensor(chart, rng, modes=1, amplitude=0.05,
                                      weight=Fraction(-2, 3))
        w = yl.trace_free_project(split.c, raw)
        analytic = yl.dQ_conformal_direction(split.omega, split.c, w)
        q_plus = yl.total_scalar_quotient(
            yl.recombine(split.omega, yl.class_path(split.c, w, eps)))
        q_minus = yl.total_scalar_quotient(
            yl.recombine(split.omega, yl.class_path(split.c, w, -eps)))
        fd = (q_plus - q_minus) / (2 * eps)
        worst = max(worst, abs(analytic - fd) / abs(fd))
    report(4, "first variations vs finite differences", worst <= 1e-4)


def test_criterion_05_modulus_inequality():
    chart = unit_torus(16)
    rng = np.random.default_rng(5)
    ok = True
    for _ in range(5):
        g = perturbed_flat_metric(chart, rng, amplitude=0.1, modes=1)
        split = yl.conformal_split(g)
        c0 = split.c
        v = random_symmetric_tensor(chart, rng, modes=1, amplitude=0.1,
                                    weight=Fraction(-2, 3))
        c1 = yl.class_path(c0, v, 1.0)
        sol1 = yl.minimize_in_class(yl.recombine(split.omega, c1))
        omega = yl.ScalarField(chart, sol1.metric.sqrt_det(), Fraction(1))
        sol0 = yl.minimize_in_class(yl.recombine(omega, c0))
        rhs = yl.modulus_bound_rhs(c0, v, omega)
        # both endpoint solutions have unit volume, so Vol^(1-2/n) = 1
        lhs = sol1.quotient - sol0.quotient
        ok = ok and sol0.converged and sol1.converged and lhs >= rhs - 1e-6
    report(5, "modulus-of-continuity lower bound", ok)


def test_criterion_06_flat_class_solve():
    chart = unit_torus(16)
    rng = np.random.default_rng(3)
    f = random_trig_scalar(chart, rng, modes=1, amplitude=0.2)
    g0 = conformally_flat_metric(chart, f)
    sol = yl.minimize_in_class(g0)
    sols = yl.multi_start(g0, 5, rng_seed=11)
    distinct = [s for s in sols if s.converged]
    ok = (sol.converged and sol.residual <= 1e-6
          and abs(yl.riemannian_volume(sol.metric) - 1.0) <= 1e-8
          and abs(sol.lam) <= 1e-5
          and len(distinct) == 1)
    report(6, "flat-class CSC solve and uniqueness", ok)


def test_criterion_07_cylinder_bifurcation():
    scan = yl.bifurcation_scan(4.0, 10.0, 13, 3)
    l_star_ok = (scan.l_star is not None
                 and abs(scan.l_star - 2 * np.pi) / (2 * np.pi) <= 0.01)
    below = [bp for bp in scan.branches if bp.L < 2 * np.pi - 0.3]
    no_early = all(bp.kind == "constant" for bp in below)
    # direct shooting just below the threshold collapses to the constant branch
    probe = yl.cylinder_shoot(2 * np.pi - 0.3, 3, u0=1.2, lam0=1.9)
    probe_ok = (isinstance(probe, yl.ShootingFailure)
                or probe.kind == "constant")
    report(7, "cylinder bifurcation threshold", l_star_ok and no_early and probe_ok)


def test_criterion_08_certificate_engine():
    # singleton Einstein member: the flat torus
    chart = unit_torus(16)
    flat = yl.MetricField.flat(chart)
    c = yl.conformal_split(flat).c
    ens = yl.assemble([flat], c)
    single = yl.hull_feasibility(ens)
    single_ok = (single.status == "measure-found"
                 and np.allclose(single.weights, [1.0])
                 and single.residual <= 1e-12)
    ortho = yl.hull_feasibility(np.eye(2))
    ortho_ok = (ortho.status == "separated"
                and abs(ortho.residual - 1.0 / np.sqrt(2.0)) <= 1e-9
                and np.all(np.eye(2) @ ortho.weights > 0)
                and ortho.margin <= -0.5 + 1e-9)
    cancel = yl.hull_feasibility(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    cancel_ok = (cancel.status == "measure-found"
                 and np.max(np.abs(cancel.weights - 0.5)) <= 1e-9)
    report(8, "certificate engine", single_ok and ortho_ok and cancel_ok)


def test_criterion_09_dual_check():
    chart = unit_torus(16)
    flat = yl.MetricField.flat(chart)
    c = yl.conformal_split(flat).c
    ens = yl.assemble([flat], c)
    dual = yl.dual_sample_check(ens, 100, rng_seed=1)
    singleton_ok = abs(dual.worst_value) <= 1e-10
    rng = np.random.default_rng(6)
    members = [conformally_flat_metric(
        chart, random_trig_scalar(chart, rng, modes=1, amplitude=0.15))
        for _ in range(3)]
    sep_ens = yl.assemble(members, c)
    result = yl.hull_feasibility(sep_ens)
    separated_ok = (result.status == "separated"
                    and np.all(sep_ens.pair_with_members(result.direction) < 0))
    report(9, "per-direction dual check", singleton_ok and separated_ok)


def test_criterion_10_reproducibility(tmp_path):
    configs = {
        "curvature": """
[chart]
kind = "periodic-grid"
resolution = [16, 16, 16]

[metric]
kind = "conformal-sine"
amplitude = 0.1
""",
        "multi-start": """
seed = 11

[chart]
kind = "periodic-grid"
resolution = [16, 16, 16]

[metric]
kind = "conformal-sine"
amplitude = 0.2

[solver]
seeds = 2
""",
        "certify": """
seed = 7

[certify]
ensemble = "singleton-flat"
resolution = [16, 16, 16]
directions = 20
""",
    }
    ok = True
    for command, text in configs.items():
        cfg = tmp_path / f"{command}.toml"
        cfg.write_text(text)
        outs = []
        for run in ("a", "b"):
            out = tmp_path / f"{command}-{run}"
            code = cli_main([command, "--config", str(cfg), "--out", str(out)])
            ok = ok and code == 0
            outs.append(out)
        for path in sorted(outs[0].iterdir()):
            if path.name == "manifest.json":   # carries wall time
                continue
            twin = outs[1] / path.name
            ok = ok and twin.exists() \
                and path.read_bytes() == twin.read_bytes()
    report(10, "byte-identical reruns", ok)
