"""End-to-end acceptance criteria.

The learning sweeps are expensive (about an hour on one core in total), so
they are computed once per session and shared.  Deselect with
``-m "not acceptance"`` for a quick run.
"""

import json
import math
import time

import numpy as np
import pytest

from stlpi2 import pi2
from stlpi2.adaptation import AdaptationConfig, adapt, adapt_targets, blend_and_clip
from stlpi2.checks import random_formula, random_funnel, random_signals
from stlpi2.cli import main
from stlpi2.controllers import (
    ControllerConfig, GuidingController, PredicateChannel, improved_combination, individual_control,
    solve_combination,
)
from stlpi2.dynamics import SingleIntegrator, rollout, rollout_batch
from stlpi2.funnels import Funnel, xi
from stlpi2.scenarios import analytic_optimum, complex_scenario, reach_time, shortest_path_length, simple_scenario
from stlpi2.stl import EmptyWindowError, PredicateDef, evaluate, oracle, robustness_batch

pytestmark = pytest.mark.acceptance

THETAS = (0.25, 0.6, 1.2)
SEEDS = range(20)
D = shortest_path_length()
T_OPT = 4.37


def _summarise(res, scenario, seconds):
    goal = scenario.registry["mu1"]
    t_star = reach_time(goal.value(res.solution.states), scenario.dt) if scenario.name.startswith("simple") else None
    return {"J": res.J, "C": res.C, "rho": res.rho, "t_star": t_star, "seconds": seconds}


def _simple_sweep(robot, thetas, adapt_on):
    out = {}
    for theta in thetas:
        sc = simple_scenario(theta, robot=robot)
        rows = []
        for seed in SEEDS:
            t0 = time.perf_counter()
            res = pi2.run(sc, pi2.Pi2Config(adapt_funnels=adapt_on), seed=seed)
            rows.append(_summarise(res, sc, time.perf_counter() - t0))
        out[theta] = rows
    return out


@pytest.fixture(scope="session")
def integrator_sweep():
    return _simple_sweep("integrator", THETAS, True)


@pytest.fixture(scope="session")
def unicycle_sweep():
    return _simple_sweep("unicycle", THETAS, True)


def _col(rows, key):
    return np.array([r[key] for r in rows])


def _parity(verdict, number, title, sweep, tol):
    lines, ok = [], True
    for theta, rows in sweep.items():
        c_opt = analytic_optimum(theta, D, 10.0)[1]
        med = float(np.median(_col(rows, "J")))
        sat = float(np.mean(_col(rows, "rho") >= 0))
        good = abs(med - c_opt) <= tol * c_opt and (number != 2 or sat >= 0.9)
        ok &= good
        lines.append(f"theta={theta} median J={med:.3f} vs {c_opt:.3f} ({100 * (med / c_opt - 1):+.1f}%), "
                     f"rho>=0 in {100 * sat:.0f}%")
    slowest = max(r["seconds"] for rows in sweep.values() for r in rows)
    ok &= slowest <= 120
    verdict(number, title, ok, "; ".join(lines) + f"; slowest run {slowest:.0f}s")
    return ok


# 1 ------------------------------------------------------------------------------


def test_criterion_01_stl_oracle_equivalence(verdict):
    rng = np.random.default_rng(2024)
    cases = [(random_formula(rng), random_signals(rng, int(rng.integers(1, 21)))) for _ in range(1000)]
    mismatches = 0
    t0 = time.perf_counter()
    for f, h in cases:
        got = evaluate(f, h, 1.0)
        want = []
        for t in range(len(got)):
            try:
                want.append(oracle.rho(f, h, 1.0, t))
            except EmptyWindowError:
                want.append(math.nan)
        mismatches += not np.array_equal(got, np.array(want), equal_nan=True)
    seconds = time.perf_counter() - t0
    ok = mismatches == 0 and seconds < 10
    assert verdict(1, "STL oracle equivalence", ok, f"{mismatches} mismatches in 1000 formulas, {seconds:.2f}s")


# 2 - 4 ---------------------------------------------------------------------------


def test_criterion_02_integrator_matches_analytic_optimum(verdict, integrator_sweep):
    assert _parity(verdict, 2, "integrator vs analytic optimum", integrator_sweep, 0.15)


def test_criterion_03_unicycle_parity(verdict, unicycle_sweep):
    assert _parity(verdict, 3, "unicycle parity", unicycle_sweep, 0.25)


def test_criterion_04_adaptation_ablation(verdict, integrator_sweep):
    on = integrator_sweep[1.2]
    off = _simple_sweep("integrator", (1.2,), False)[1.2]
    j_on, j_off = float(np.median(_col(on, "J"))), float(np.median(_col(off, "J")))
    t_on, t_off = float(np.median(_col(on, "t_star"))), float(np.median(_col(off, "t_star")))
    ok = j_on < j_off and abs(t_on - T_OPT) <= 1.0
    assert verdict(4, "adaptation ablation", ok,
                   f"median J on {j_on:.3f} / off {j_off:.3f}; median T* on {t_on:.2f}s / off {t_off:.2f}s")


# 5 ------------------------------------------------------------------------------


def test_criterion_05_guidance_comparison(verdict):
    rho = {}
    for comb in ("improved", "simple"):
        sc = complex_scenario(combiner=comb)
        S, _ = rollout_batch(sc.model, sc.controller(), sc.x0, sc.steps, sc.dt)
        rho[comb] = float(robustness_batch(sc.formula, sc.registry, S, sc.dt)[0])
    ok = abs(rho["improved"] + 0.59) <= 0.5 and abs(rho["simple"] + 2.53) <= 0.5 and rho["improved"] > rho["simple"]
    assert verdict(5, "guidance comparison", ok,
                   f"improved rho={rho['improved']:.3f} (target -0.59), simple rho={rho['simple']:.3f} (target -2.53)")


# 6 ------------------------------------------------------------------------------


def test_criterion_06_complex_learning(verdict):
    sc = complex_scenario()
    rows = []
    for seed in SEEDS:
        t0 = time.perf_counter()
        res = pi2.run(sc, pi2.Pi2Config(N=100, K=50), seed=seed)
        rows.append(_summarise(res, sc, time.perf_counter() - t0))
    C, rho = _col(rows, "C"), _col(rows, "rho")
    best = float(C[rho >= 0].min()) if np.any(rho >= 0) else math.inf
    slowest = max(r["seconds"] for r in rows)
    ok = np.median(rho) >= 0 and np.median(C) <= 10 and abs(best - 8.0) <= 1.6 and slowest <= 600
    assert verdict(6, "complex-scenario learning", ok,
                   f"median rho={np.median(rho):.3f}, median C={np.median(C):.3f}, best satisfying C={best:.3f}, "
                   f"slowest run {slowest:.0f}s")


# 7 ------------------------------------------------------------------------------


def test_criterion_07_controller_identities(verdict):
    rng = np.random.default_rng(7)
    sm_err = res_err = single_err = 0.0
    for _ in range(1000):
        m = int(rng.integers(1, 6))
        v = rng.normal(size=m)
        delta, K = float(rng.uniform(1e-3, 2.0)), float(rng.uniform(1.0, 10.0))
        lhs = np.linalg.solve((np.outer(v, v) + delta * np.eye(m)) / K, v)
        sm_err = max(sm_err, float(np.abs(lhs - K / (v @ v + delta) * v).max()))

        M = int(rng.integers(1, 8))
        alpha, V, kp = rng.dirichlet(np.ones(M)), rng.normal(size=(M, m)), rng.uniform(0, 3, M)
        u = solve_combination(alpha, kp, V, delta)
        A = (alpha[:, None, None] * V[:, :, None] * V[:, None, :]).sum(0) + delta * np.eye(m)
        res_err = max(res_err, float(np.linalg.norm(A @ u - (alpha * kp) @ V)))

        pred = PredicateDef("g", "inside_ball", ((0, 2),), 0.2, tuple(rng.uniform(-2, 2, 2)))
        g = float(rng.uniform(-4, 0))
        ch = PredicateChannel(pred, Funnel.constant(g, g + float(rng.uniform(0.05, 3)), length=1))
        x = rng.uniform(-3, 3, 2)
        cfg = ControllerConfig()
        diff = improved_combination(cfg, SingleIntegrator(), [ch], x, 0) - individual_control(
            cfg, SingleIntegrator(), ch, x, 0)
        single_err = max(single_err, float(np.abs(diff).max()))
    ok = sm_err <= 1e-10 and res_err <= 1e-9 and single_err <= 1e-10
    assert verdict(7, "controller identities", ok,
                   f"Sherman-Morrison {sm_err:.1e}, residual {res_err:.1e}, single channel {single_err:.1e}")


# 8 ------------------------------------------------------------------------------


def test_criterion_08_local_robustness_satisfaction(verdict):
    pred = PredicateDef("g", "inside_ball", ((0, 2),), 0.2, (1.0, 1.0))
    dt, T = 0.01, 10.0
    t = np.arange(round(T / dt) + 1) * dt
    cases = {
        "flat": np.full_like(t, -1.5),
        "rising": -0.05 - 2.0 * np.exp(-0.4 * t),  # gamma' <= 0.8 < max speed
    }
    worst = {}
    for name, gamma in cases.items():
        f = Funnel(gamma, np.full_like(t, 0.2), gamma - 1.0)
        law = GuidingController(SingleIntegrator(), [PredicateChannel(pred, f)], ControllerConfig())
        x0 = np.array([1.0, 1.0]) + (0.2 - gamma[0] - 0.01) * np.array([np.cos(2.0), np.sin(2.0)])
        rho = pred.value(rollout(SingleIntegrator(), law, x0, T, dt).states)
        worst[name] = float(np.min(rho - gamma))
    ok = all(w >= -1e-3 for w in worst.values())
    assert verdict(8, "local robustness satisfaction", ok,
                   ", ".join(f"{k}: min(rho-gamma)={v:.4f}" for k, v in worst.items()))


# 9 ------------------------------------------------------------------------------


def test_criterion_09_adaptation_invariance(verdict):
    rng = np.random.default_rng(9)
    model, ccfg, rho_min, steps = SingleIntegrator(), ControllerConfig(), 0.05, 40
    gap, order_bad = 0.0, 0
    for _ in range(200):
        preds = [PredicateDef("a", "inside_ball", ((0, 2),), 0.3, tuple(rng.uniform(-2, 2, 2))),
                 PredicateDef("b", "outside_ball", ((0, 2),), 0.5, tuple(rng.uniform(-2, 2, 2)))]
        funnels = [random_funnel(rng, steps + 1, rho_min) for _ in preds]
        states = np.cumsum(rng.normal(scale=0.2, size=(steps + 1, 2)), axis=0)
        theta = rng.normal(scale=0.1, size=(steps, 2))
        acfg = AdaptationConfig(float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.05, 1.0)))
        new_f, new_theta = adapt(funnels, theta, states, preds, rho_min, acfg, model, ccfg)
        k = np.arange(steps)
        old = GuidingController(model, [PredicateChannel(p, f) for p, f in zip(preds, funnels)], ccfg)
        new = GuidingController(model, [PredicateChannel(p, f) for p, f in zip(preds, new_f)], ccfg)
        before = old(states[:steps], k) + np.cumsum(theta, axis=0)
        after = new(states[:steps], k) + np.cumsum(new_theta, axis=0)
        gap = max(gap, float(np.abs(after - before).max()))
        for f in new_f:
            order_bad += int(np.any(f.gamma < f.gamma_lim) or np.any(f.gamma > rho_min)
                             or np.any(f.Gamma < f.gamma + f.eps))

    ratio_err = 0.0
    for _ in range(50):
        beta = float(rng.uniform(0.1, 0.6))  # (1 - beta)**20 stays far above round-off
        acfg = AdaptationConfig(0.8, beta)
        f = Funnel.constant(-5.0, 0.2, -50.0, length=5)
        rho = rng.uniform(-3.0, -0.5, 5)
        errs = []
        for _ in range(21):
            errs.append(np.abs(xi(f, rho, slice(None)) - 0.8))
            f = f.with_bounds(*blend_and_clip(f, *adapt_targets(f, rho, acfg), rho_min, acfg))
        errs = np.array(errs)
        ratios = errs[-5:] / errs[-6:-1]
        ratio_err = max(ratio_err, float(np.abs(ratios / (1 - beta) - 1).max()))
    ok = gap <= 1e-10 and order_bad == 0 and ratio_err <= 0.05
    assert verdict(9, "funnel-adaptation invariance", ok,
                   f"max control gap {gap:.1e}, ordering violations {order_bad}, "
                   f"contraction ratio error {100 * ratio_err:.2f}%")


# 10 -----------------------------------------------------------------------------


def test_criterion_10_determinism(verdict, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scenario": "simple", "robot": "unicycle", "theta": 0.6, "noise": 0.04, "seed": 11,
                               "pi2": {"N": 20, "K": 5}}))
    for name in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--output", str(tmp_path / name)]) == 0
    sweep = ["sweep", "--config", str(cfg), "--thetas", "0.25", "1.2", "--seeds", "2", "-K", "2", "-N", "6"]
    assert main([*sweep, "--output", str(tmp_path / "sa")]) == 0
    assert main([*sweep, "--jobs", "2", "--output", str(tmp_path / "sb")]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_s = sorted(p.relative_to(tmp_path / "sa") for p in (tmp_path / "sa").rglob("*.csv"))
    same = all((tmp_path / "a" / p).read_bytes() == (tmp_path / "b" / p).read_bytes() for p in files)
    same &= all((tmp_path / "sa" / p).read_bytes() == (tmp_path / "sb" / p).read_bytes() for p in files_s)
    ok = same and len(files) == 4 and len(files_s) > 0
    assert verdict(10, "determinism", ok, f"{len(files) + len(files_s)} files compared, identical={same}")
