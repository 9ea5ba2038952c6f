"""Randomised property suites behind ``stlpi2 check``.

Each suite returns a list of :class:`PropertyResult`; a failing property keeps
up to a few counterexamples for the report.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import pi2
from .adaptation import AdaptationConfig, adapt
from .controllers import (
    ControllerConfig, GuidingController, PredicateChannel, improved_combination, individual_control,
    solve_combination,
)
from .dynamics import SingleIntegrator
from .funnels import Funnel
from .stl import oracle
from .stl.predicates import PredicateDef
from .stl.semantics import EmptyWindowError, evaluate
from .stl.syntax import Always, And, Eventually, Formula, Not, Or, Pred, TrueF, Until, to_text

MAX_EXAMPLES = 5
SUITES = ("stl", "controllers", "pi2", "adaptation")


@dataclass
class PropertyResult:
    name: str
    cases: int = 0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def fail(self, detail) -> None:
        if len(self.failures) < MAX_EXAMPLES:
            self.failures.append(detail)
        else:
            self.failures[-1] = detail

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


# -- random STL ------------------------------------------------------------------

PRED_NAMES = ("p", "q", "r")


def random_formula(rng: np.random.Generator, depth: int = 4) -> Formula:
    """Random formula of at most ``depth`` operator levels over ``PRED_NAMES``;
    interval bounds are integers so they fall on a unit grid."""
    if depth == 0 or rng.random() < 0.15:
        return TrueF() if rng.random() < 0.05 else Pred(str(rng.choice(PRED_NAMES)))
    op = int(rng.integers(6))
    a = int(rng.integers(0, 4))
    b = a + int(rng.integers(0, 6))
    sub = lambda: random_formula(rng, depth - 1)  # noqa: E731
    if op == 0:
        return Not(sub())
    if op == 1:
        return And(sub(), sub())
    if op == 2:
        return Or(sub(), sub())
    if op == 3:
        return Until(a, b, sub(), sub())
    unbounded = rng.random() < 0.25
    cls = Eventually if op == 4 else Always
    return cls(a, math.inf if unbounded else b, sub())


def random_signals(rng: np.random.Generator, length: int) -> dict:
    # a coarse value grid produces ties, which exercise min/max tie handling
    return {n: rng.integers(-8, 9, size=length) / 4.0 for n in PRED_NAMES}


def _oracle_signal(f, h, dt):
    out = []
    for t in range(len(h[PRED_NAMES[0]])):
        try:
            out.append(oracle.rho(f, h, dt, t))
        except EmptyWindowError:
            out.append(math.nan)
    return np.array(out)


def stl_suite(cases: int, rng: np.random.Generator) -> list[PropertyResult]:
    eq = PropertyResult("stl_oracle_equivalence")
    for _ in range(cases):
        f = random_formula(rng)
        h = random_signals(rng, int(rng.integers(1, 21)))
        got = evaluate(f, h, 1.0)
        want = _oracle_signal(f, h, 1.0)
        eq.cases += 1
        if not np.array_equal(got, want, equal_nan=True):
            eq.fail({"formula": to_text(f), "production": got.tolist(), "oracle": want.tolist()})
    return [eq]


# -- controllers -----------------------------------------------------------------


def controllers_suite(cases: int, rng: np.random.Generator) -> list[PropertyResult]:
    sm = PropertyResult("sherman_morrison_identity")
    res = PropertyResult("improved_combination_residual")
    single = PropertyResult("single_channel_equivalence")
    model = SingleIntegrator()
    cfg = ControllerConfig()
    for _ in range(cases):
        m = int(rng.integers(1, 5))
        v = rng.normal(size=m)
        delta = float(rng.uniform(1e-3, 2.0))
        K = float(rng.uniform(1.0, 10.0))
        lhs = np.linalg.solve((np.outer(v, v) + delta * np.eye(m)) / K, v)
        rhs = K / (v @ v + delta) * v
        sm.cases += 1
        if np.max(np.abs(lhs - rhs)) > 1e-10 * max(1.0, np.max(np.abs(rhs))):
            sm.fail({"v": v.tolist(), "delta": delta, "K": K})

        M = int(rng.integers(1, 8))
        alpha = rng.dirichlet(np.ones(M))
        V = rng.normal(size=(M, m))
        kp = rng.uniform(0, 3, size=M)
        u = solve_combination(alpha, kp, V, delta)
        A = np.einsum("k,ki,kj->ij", alpha, V, V) + delta * np.eye(m)
        r = np.linalg.norm(A @ u - (alpha * kp) @ V)
        res.cases += 1
        if r > 1e-9:
            res.fail({"residual": r})

        c = rng.uniform(-3, 3, size=2)
        x = rng.uniform(-3, 3, size=2)
        f = Funnel.constant(-4.0, 0.2, length=1)
        ch = PredicateChannel(PredicateDef("goal", "inside_ball", ((0, 2),), 0.5, tuple(c)), f)
        a = improved_combination(cfg, model, [ch], x, 0)
        b = individual_control(cfg, model, ch, x, 0)
        single.cases += 1
        if np.max(np.abs(a - b)) > 1e-10:
            single.fail({"x": x.tolist(), "center": c.tolist()})
    return [sm, res, single]


# -- pi2 -------------------------------------------------------------------------


def pi2_suite(cases: int, rng: np.random.Generator, weights: Callable = None) -> list[PropertyResult]:
    weights = weights or pi2.weights
    order = PropertyResult("weight_ordering")
    simplex = PropertyResult("weights_on_simplex")
    for _ in range(cases):
        N = int(rng.integers(2, 40))
        J = rng.normal(size=N) * rng.uniform(0.1, 100)
        w = weights(pi2.normalize_costs(J))
        order.cases += 1
        simplex.cases += 1
        idx = np.argsort(J)
        i, j = idx[[0, -1]]
        # strict between extremes; weakly monotone elsewhere since exp() may underflow
        if (J[i] < J[j] and not w[i] > w[j]) or np.any(np.diff(w[idx]) > 0):
            order.fail({"J": [J[i], J[j]], "w": [w[i], w[j]]})
        if abs(w.sum() - 1) > 1e-12 or np.any(w < 0):
            simplex.fail({"sum": float(w.sum())})
    return [order, simplex]


# -- adaptation --------------------------------------------------------------------


def random_funnel(rng: np.random.Generator, length: int, rho_min: float) -> Funnel:
    """Random adaptable funnel whose upper curve clears ``rho_min``.

    With ``Gamma <= rho_min`` a clipped adaptation can shrink the width to
    ``eps``; the gain then reaches ~1e6 and round-off alone exceeds 1e-10.
    """
    g = rng.uniform(-5, rho_min, length)
    G = np.maximum(g + rng.uniform(0.1, 2, length), rho_min + 0.05)
    return Funnel(g, G, g - rng.uniform(0, 3, length))


def adaptation_suite(cases: int, rng: np.random.Generator) -> list[PropertyResult]:
    inv = PropertyResult("policy_invariance")
    ordering = PropertyResult("funnel_ordering")
    model = SingleIntegrator()
    cfg = ControllerConfig()
    steps, rho_min = 30, 0.05
    for _ in range(cases):
        preds = [PredicateDef("a", "inside_ball", ((0, 2),), 0.3, tuple(rng.uniform(-2, 2, 2))),
                 PredicateDef("b", "outside_ball", ((0, 2),), 0.5, tuple(rng.uniform(-2, 2, 2)))]
        funnels = [random_funnel(rng, steps + 1, rho_min) for _ in preds]
        states = np.cumsum(rng.normal(scale=0.2, size=(steps + 1, 2)), axis=0)
        theta = rng.normal(scale=0.1, size=(steps, 2))
        acfg = AdaptationConfig(float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.05, 1.0)))
        new_f, new_theta = adapt(funnels, theta, states, preds, rho_min, acfg, model, cfg)

        def total(fs, th):
            law = [PredicateChannel(p, f) for p, f in zip(preds, fs)]
            return GuidingController(model, law, cfg)(states[:steps], np.arange(steps)) + np.cumsum(th, axis=0)

        before = total(funnels, theta)
        gap = float(np.max(np.abs(total(new_f, new_theta) - before)))
        inv.cases += 1
        if gap > 1e-10:
            inv.fail({"max_gap": gap})
        ordering.cases += 1
        for f in new_f:
            if np.any(f.Gamma < f.gamma + f.eps * (1 - 1e-9)) or np.any(f.gamma < f.gamma_lim) \
                    or np.any(f.gamma > rho_min):
                ordering.fail({"gamma_max": float(f.gamma.max())})
    return [inv, ordering]


# -- driver --------------------------------------------------------------------------


FAULTS = {
    # softmax of +Jbar: favours the worst samples
    "weight-sign": lambda Jbar: pi2.weights(-np.asarray(Jbar)),
}


def run_checks(suites=SUITES, cases: int = 200, seed: int = 0, fault: str | None = None) -> dict:
    """Run the named suites and return a JSON-ready report."""
    report = {"seed": seed, "cases": cases, "fault": fault, "suites": {}}
    for name in suites:
        rng = np.random.default_rng([seed, SUITES.index(name)])
        if name == "stl":
            results = stl_suite(cases, rng)
        elif name == "controllers":
            results = controllers_suite(cases, rng)
        elif name == "pi2":
            results = pi2_suite(cases, rng, FAULTS.get(fault) if fault else None)
        elif name == "adaptation":
            results = adaptation_suite(max(1, cases // 10), rng)
        else:
            raise ValueError(f"unknown suite {name!r}")
        report["suites"][name] = [r.to_dict() for r in results]
    report["failed"] = [r["name"] for rs in report["suites"].values() for r in rs if not r["passed"]]
    report["passed"] = not report["failed"]
    return report
