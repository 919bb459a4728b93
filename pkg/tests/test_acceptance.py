"""End-to-end acceptance runs; each test prints a single PASS/FAIL line with its runtime."""

import json
import time

import numpy as np
import pytest

from setvalued.cli import summary_json
from setvalued.config import load_config
from setvalued.experiments import run_experiment
from setvalued.mean_variance import MVParams, simulate_optimal, static_solution, time_consistency_check
from setvalued.reference_sets import convexity_report

_cache: dict = {}


def experiment(name, **overrides):
    key = (name, tuple(sorted(overrides.items())))
    if key not in _cache:
        cfg = load_config(name, overrides=overrides)
        start = time.perf_counter()
        result = run_experiment(cfg)
        _cache[key] = (cfg, result, time.perf_counter() - start)
    return _cache[key]


def report(capsys, number, title, ok, elapsed, budget, detail):
    ok = bool(ok) and (budget is None or elapsed <= budget)
    limit = "" if budget is None else f" / {budget:g} s"
    with capsys.disabled():
        print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {title}: {detail} ({elapsed:.2f} s{limit})")
    assert ok, detail


def check_values(result):
    return ", ".join(f"{k}={c.value:.3g}" for k, c in result.checks.items())


def test_criterion_01_mean_variance_static_value_and_monte_carlo(capsys):
    exact = (np.e - 1) / 2
    static_err = abs(static_solution(MVParams()).V0 - exact)
    _, result, elapsed = experiment("mean-variance", seed=7)
    z = result.summary["z_score"]
    ok = static_err <= 1e-12 and abs(z) <= 3 and result.checks["positivity_violations"].passed
    report(capsys, 1, "mean-variance V0 and MC objective", ok, elapsed, 60.0,
           f"|V0 - (e-1)/2|={static_err:.2e}, z={z:.3f}, paths={result.summary['paths']}")


def test_criterion_02_moving_scalarization_alignment(capsys):
    start = time.perf_counter()
    params = MVParams()
    sim = simulate_optimal(params, 1e-3, 20, seed=1, record=5)
    worst = 0.0
    for path in sim.paths:
        idx = np.linspace(0, len(path.times) - 1, 100).astype(int)
        worst = max(worst, float(np.max(time_consistency_check(params, path.times[idx], path.X[idx]))))
    elapsed = time.perf_counter() - start
    report(capsys, 2, "alignment of (1, -Λ/2) with the set normal", worst <= 1e-6, elapsed, 1.0,
           f"max angle={worst:.2e} over 5 paths x 100 times")


def test_criterion_03_classical_solutions_solve_the_hjb(capsys):
    elapsed, details, ok = 0.0, [], True
    for family in ("heat-ball", "mean-variance"):
        _, result, t = experiment("hjb-check", family=family, points=100)
        elapsed += t
        ok &= result.summary["max_abs_n_form"] <= 1e-8 and result.summary["max_form_gap"] <= 1e-9
        details.append(f"{family}: n_form={result.summary['max_abs_n_form']:.1e}, "
                       f"gap={result.summary['max_form_gap']:.1e}")
    report(capsys, 3, "HJB residual of classical solutions", ok, elapsed, 5.0, "; ".join(details))


def test_criterion_04_ito_boundary_invariance(capsys):
    _, tangential, elapsed = experiment("ito-flow", order_study=True)
    ok = tangential.checks["max_abs_residual"].passed and tangential.checks["weak_order"].passed
    details = [f"residual={tangential.summary['max_abs_residual']:.4f}",
               f"order={tangential.summary['order_study']['weak_order']:.3f}"]
    for regime in ("inward", "outward"):
        _, result, t = experiment("ito-flow", regime=regime)
        elapsed += t
        ok &= result.summary["sign_violations"] == 0
        details.append(f"{regime} violations={result.summary['sign_violations']}")
    report(capsys, 4, "set-valued Itô boundary invariance", ok, elapsed, 120.0, ", ".join(details))


def test_criterion_05_geodesic_on_translating_ball(capsys):
    _, result, elapsed = experiment("geodesic", family="translating-ball", dt=1e-3)
    s = result.summary
    ok = s["max_error_vs_exact"] <= 1e-8 and s["max_abs_residual"] <= 1e-7 and s["length_comparison"] <= 1e-3
    report(capsys, 5, "geodesic flow and length comparison", ok, elapsed, 1.0, check_values(result))


def test_criterion_06_hausdorff_boundary_identity(capsys):
    _, result, elapsed = experiment("hausdorff", pairs=200, eps=1e-3)
    s = result.summary
    ok = s["max_identity_gap"] <= 1e-9 and s["pacman_set_distance"] <= 2e-3 and s["pacman_boundary_distance"] >= 0.99
    report(capsys, 6, "Hausdorff boundary identity and pac-man", ok, elapsed, 5.0, check_values(result))


def test_criterion_07_nonconvexity_threshold(capsys):
    start = time.perf_counter()
    T, step = 2.0, 1e-3
    gaps = np.arange(0.6, 0.8 + step / 2, step)
    verdicts, agree = [], True
    for gap in gaps:
        rep = convexity_report(T, T - gap)
        agree &= rep["threshold"] == rep["phi_second"] == rep["midpoint"]
        verdicts.append(rep["threshold"])
    verdicts = np.array(verdicts)
    flips = np.flatnonzero(verdicts[:-1] != verdicts[1:])
    edge = 1 / np.sqrt(2)
    located = len(flips) == 1 and gaps[flips[0]] <= edge <= gaps[flips[0] + 1]
    elapsed = time.perf_counter() - start
    report(capsys, 7, "nonconvexity threshold", agree and located and verdicts[0] and not verdicts[-1], elapsed, 2.0,
           f"single flip in [{gaps[flips[0]]:.3f}, {gaps[flips[0] + 1]:.3f}], tests agree={agree}" if len(flips)
           else "no flip")


def test_criterion_08_scalar_reduction(capsys):
    _, result, elapsed = experiment("scalar-hjb", dx=1e-2)
    s = result.summary
    ok = result.checks["sup_error"].value <= 2e-3 and s["refinement_ratio"] >= 2
    report(capsys, 8, "scalar HJB interval", ok, elapsed, 10.0, check_values(result))


def test_criterion_09_product_set_comparison(capsys):
    _, slab, t1 = experiment("hat-equation", family="slab")
    _, heat, t2 = experiment("hat-equation", family="symmetric-heat-interval")
    ok = slab.checks["slab_ratio"].value <= 1e-8 and heat.summary["max_abs_residual"] <= 1e-4
    report(capsys, 9, "product-set comparison", ok, t1 + t2, 5.0,
           f"slab ratio error={slab.checks['slab_ratio'].value:.1e}, "
           f"heat-interval residual={heat.summary['max_abs_residual']:.1e}")


@pytest.mark.parametrize("name, overrides", [
    ("mean-variance", {"seed": 7}),
    ("ito-flow", {"order_study": True}),
    ("verification", {}),
    ("verification", {"family": "mean-variance"}),
])
def test_criterion_10_determinism_across_workers(capsys, name, overrides):
    cfg, result, t1 = experiment(name, **overrides)
    cfg3, result3, t3 = experiment(name, workers=3, **overrides)
    a, b = summary_json(cfg, result), summary_json(cfg3, result3)
    same = a == b and json.loads(a)["config"] == json.loads(b)["config"]
    report(capsys, 10, f"determinism {name} {overrides or ''}".rstrip(), same, t1 + t3, None,
           "summary JSON identical for workers 1 and 3" if same else "summary JSON differs")
