"""Guided PI2 with covariance adaptation, Nesterov lookahead and penalty annealing.

The policy is ``u(x, t) = base(x, t) + k(t)`` where the feedforward ``k`` is the
prefix sum of per-step increments ``theta`` of shape (steps, m).  All N
sampled rollouts of an iteration are simulated as one batch.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .adaptation import AdaptationConfig, adapt
from .dynamics import rollout_batch
from .stl.semantics import Trajectory, robustness_batch

log = logging.getLogger(__name__)


def substream(seed: int, k: int, i: int) -> np.random.Generator:
    """Counter-keyed generator for (seed, iteration, sample); order independent."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(k, i))))


# -- scalar pieces -------------------------------------------------------------


def penalty(rho, lam: float, rho_min: float):
    """Cubic constraint penalty ``lam * (rho_min - min(rho_min, rho))**3``."""
    gap = rho_min - np.minimum(rho_min, rho)
    return lam * gap**3


def lambda_schedule(k: int, K: int, lo: float = 0.5, hi: float = 5000.0) -> float:
    """Cosine ramp from ``lo`` at k=0 to ``hi`` at k=K."""
    if K <= 0:
        return hi
    if not 0 <= k <= K:
        raise ValueError(f"iteration {k} outside [0, {K}]")
    return lo + (hi - lo) * (1.0 - math.cos(math.pi * k / K)) / 2.0


def nearest_rank(values: np.ndarray, q: float) -> float:
    s = np.sort(values)
    return float(s[max(0, math.ceil(q * len(s)) - 1)])


def normalize_costs(J, eps_quantile: float = 0.5, h: float = 3.0) -> np.ndarray:
    """Map costs to ``h * (J - min J) / (J_eps - min J)``; J_eps is the
    nearest-rank ``eps_quantile`` of the batch.

    When J_eps ties with the minimum the smallest larger cost serves as the
    reference, so distinct costs never collapse to equal weights.  All-equal
    costs give zeros.
    """
    J = np.asarray(J, dtype=float)
    if len(J) < 2:
        raise ValueError("need at least two costs to normalise")
    if not np.all(np.isfinite(J)):
        raise ValueError("non-finite trajectory cost")
    lo = J.min()
    ref = nearest_rank(J, eps_quantile)
    if ref == lo:
        above = J[J > lo]
        if above.size == 0:
            return np.zeros_like(J)
        ref = above.min()
    with np.errstate(over="ignore"):  # subnormal spreads; inf still sorts last
        return h * (J - lo) / (ref - lo)


def weights(Jbar) -> np.ndarray:
    """Softmax of ``-Jbar``: lower normalised cost gets more weight."""
    Jbar = np.asarray(Jbar, dtype=float)
    e = np.exp(-(Jbar - Jbar.min()))
    return e / e.sum()


# -- exploration -----------------------------------------------------------------


@dataclass
class ExplorationState:
    cov: np.ndarray  # (steps, m, m)
    cov_min: np.ndarray  # (m, m)
    nesterov_alpha: float = 1.0
    theta_prev: Optional[np.ndarray] = None
    theta_hat: Optional[np.ndarray] = None

    @classmethod
    def initial(cls, theta: np.ndarray, init_scale: float, min_scale: float) -> "ExplorationState":
        steps, m = theta.shape
        cov = np.broadcast_to(init_scale * np.eye(m), (steps, m, m)).copy()
        return cls(cov, min_scale * np.eye(m), 1.0, theta.copy(), theta.copy())


def _factor(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        scale = np.max(np.abs(vals), axis=-1, keepdims=True)
        if np.any(vals < -1e-12 * np.maximum(scale, 1e-300)):
            raise
        return vecs * np.sqrt(np.clip(vals, 0.0, None))[..., None, :]


def sample_params(theta_hat: np.ndarray, cov: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw ``theta_t ~ N(theta_hat_t, cov_t)`` independently for every step."""
    L = _factor(cov)
    z = rng.standard_normal(theta_hat.shape)
    return theta_hat + np.einsum("tij,tj->ti", L, z)


def update(samples: np.ndarray, w: np.ndarray, cov_min: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Probability-weighted mean and scatter of sampled parameters (N, steps, m)."""
    theta = np.einsum("i,itm->tm", w, samples)
    d = samples - theta
    cov = cov_min + np.einsum("i,itm,itn->tmn", w, d, d)
    return theta, 0.5 * (cov + np.swapaxes(cov, -1, -2))


def nesterov_step(alpha_prev: float, theta_k: np.ndarray, theta_km1: np.ndarray) -> tuple[float, np.ndarray]:
    alpha = (1.0 + math.sqrt(4.0 * alpha_prev**2 + 1.0)) / 2.0
    theta_hat = theta_k + (alpha_prev - 1.0) * (theta_k - theta_km1) / alpha
    return alpha, theta_hat


# -- the loop --------------------------------------------------------------------


@dataclass(frozen=True)
class Pi2Config:
    N: int = 100
    K: int = 50
    eps_quantile: float = 0.5
    h: float = 3.0
    rho_min: Optional[float] = None  # None: use the scenario's value
    lambda_start: float = 0.5
    lambda_end: float = 5000.0
    cov_init_scale: float = 2e-4
    cov_min_scale: float = 2e-7
    adapt_funnels: bool = True
    convergence_tol: Optional[float] = None

    def __post_init__(self):
        if self.N < 2 or self.K < 0:
            raise ValueError("need N >= 2 and K >= 0")
        if not 0 < self.eps_quantile <= 1 or not self.h > 0:
            raise ValueError("need 0 < eps_quantile <= 1 and h > 0")


@dataclass
class IterationRecord:
    k: int
    lam: float
    best_C: float
    best_rho: float
    median_J: float
    mean_C: float = math.nan
    mean_rho: float = math.nan
    funnels: list = field(default_factory=list, repr=False)


@dataclass
class RunResult:
    history: list
    theta: np.ndarray
    funnels: list
    solution: Trajectory
    C: float
    rho: float
    J: float
    seed: int

    def summary(self) -> dict:
        return {"C": self.C, "rho": self.rho, "J": self.J, "seed": self.seed,
                "iterations": len(self.history)}


def _evaluate(scenario, states, inputs, rho_min, lam):
    C = scenario.cost(states, inputs)
    rho = robustness_batch(scenario.formula, scenario.registry, states, scenario.dt)
    return C, rho, C + penalty(rho, lam, rho_min)


def _rollouts(scenario, funnels, thetas, noise):
    base = scenario.controller(funnels)
    kff = np.cumsum(thetas, axis=1)

    def policy(x, k):
        return base(x, k) + kff[:, k]

    return rollout_batch(scenario.model, policy, scenario.x0, scenario.steps, scenario.dt,
                         noise, batch=len(thetas))


def _noise(scenario, seed, k, indices):
    if not scenario.noise.enabled:
        return None
    return np.stack([scenario.noise.sample(substream(seed, k, i), scenario.steps, scenario.model.n)
                     for i in indices])


def _adapt(scenario, funnels, theta, expl, states, rho_min, acfg):
    new_funnels, new_theta = adapt(funnels, theta, states, scenario.predicates, rho_min, acfg,
                                   scenario.model, scenario.controller_cfg)
    shift = new_theta - theta
    expl.theta_prev = expl.theta_prev + shift
    expl.theta_hat = expl.theta_hat + shift
    return new_funnels, new_theta


def run(scenario, cfg: Pi2Config = Pi2Config(), seed: int = 0,
        adaptation: Optional[AdaptationConfig] = None) -> RunResult:
    """Run the guided learning loop on ``scenario`` and return its history and solution."""
    rho_min = scenario.rho_min if cfg.rho_min is None else cfg.rho_min
    acfg = adaptation or scenario.adaptation
    funnels = list(scenario.funnels)
    theta = np.zeros((scenario.steps, scenario.model.m))
    expl = ExplorationState.initial(theta, cfg.cov_init_scale, cfg.cov_min_scale)

    if cfg.adapt_funnels and cfg.K > 0:
        states, _ = _rollouts(scenario, funnels, theta[None], _noise(scenario, seed, 0, [0]))
        funnels, theta = _adapt(scenario, funnels, theta, expl, states[0], rho_min, acfg)

    history: list[IterationRecord] = []
    N = cfg.N
    for k in range(1, cfg.K + 1):
        lam = lambda_schedule(k - 1, cfg.K, cfg.lambda_start, cfg.lambda_end)
        samples = np.stack([sample_params(expl.theta_hat, expl.cov, substream(seed, k, i)) for i in range(N)])
        # the current mean rides along as row N: it scores the previous iteration
        batch = np.concatenate([samples, theta[None]])
        try:
            states, inputs = _rollouts(scenario, funnels, batch, _noise(scenario, seed, k, range(N + 1)))
            C, rho, J = _evaluate(scenario, states, inputs, rho_min, lam)
            Jbar = normalize_costs(J[:N], cfg.eps_quantile, cfg.h)
        except (FloatingPointError, ValueError) as exc:
            raise RuntimeError(f"PI2 iteration {k} failed: {exc}") from exc
        if history:
            history[-1].mean_C, history[-1].mean_rho = float(C[N]), float(rho[N])

        w = weights(Jbar)
        best = int(np.argmin(J[:N]))
        theta_old = theta
        theta, expl.cov = update(samples, w, expl.cov_min)
        expl.nesterov_alpha, expl.theta_hat = nesterov_step(expl.nesterov_alpha, theta, expl.theta_prev)
        expl.theta_prev = theta.copy()

        if cfg.adapt_funnels:
            funnels, theta = _adapt(scenario, funnels, theta, expl, states[best], rho_min, acfg)
        history.append(IterationRecord(
            k=k, lam=lam, best_C=float(C[best]), best_rho=float(rho[best]),
            median_J=float(np.median(J[:N])),
            funnels=[(f.gamma.copy(), f.Gamma.copy()) for f in funnels],
        ))
        log.debug("iter %d lambda=%.3g best C=%.4f rho=%.4f", k, lam, C[best], rho[best])
        if cfg.convergence_tol is not None:
            change = np.linalg.norm(theta - theta_old) / max(np.linalg.norm(theta), 1e-300)
            if change <= cfg.convergence_tol:
                break

    noise = _noise(scenario, seed, cfg.K + 1, [0])
    states, inputs = _rollouts(scenario, funnels, theta[None], noise)
    lam_final = lambda_schedule(cfg.K, cfg.K, cfg.lambda_start, cfg.lambda_end)
    C, rho, J = _evaluate(scenario, states, inputs, rho_min, lam_final)
    if history:
        history[-1].mean_C, history[-1].mean_rho = float(C[0]), float(rho[0])
    solution = Trajectory(scenario.dt, states[0], inputs[0])
    return RunResult(history, theta, funnels, solution, float(C[0]), float(rho[0]), float(J[0]), seed)
