"""Funnel adaptation with feedforward compensation.

Funnels are re-targeted so that a candidate trajectory sits at normalised
violation ``xi_target`` inside them; the feedforward is then shifted so the
total (pre-saturation) control along the candidate does not change.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .controllers import ControllerConfig, GuidingController, PredicateChannel
from .funnels import AdaptMode, Funnel
from .stl.semantics import Trajectory


@dataclass(frozen=True)
class AdaptationConfig:
    xi_target: float = 0.8
    beta: float = 0.2

    def __post_init__(self):
        if not 0 < self.xi_target < 1:
            raise ValueError("xi_target must lie in (0, 1)")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")


def adapt_targets(f: Funnel, rho, cfg: AdaptationConfig, t_index=slice(None)):
    """Bounds ``(gamma~, Gamma~)`` for which ``rho`` has normalised violation ``xi_target``."""
    if f.adapt_mode is AdaptMode.FROZEN:
        raise ValueError("frozen funnels have no adaptation target")
    rho = np.asarray(rho, dtype=float)
    G = f.Gamma[t_index]
    if f.adapt_mode is AdaptMode.FIXED_UPPER:
        G_t = np.broadcast_to(G, np.broadcast(G, rho).shape).astype(float)
        return G_t - (G_t - rho) / cfg.xi_target, G_t
    W = G - f.gamma[t_index]
    G_t = rho + cfg.xi_target * W
    return G_t - W, G_t


def _blend(cur, target, b):
    # a target equal to the current value leaves it bit-exact
    target = np.broadcast_to(target, cur.shape)
    return np.where(target == cur, cur, b * target + (1 - b) * cur)


def blend_and_clip(f: Funnel, gamma_tilde, Gamma_tilde, rho_min: float, cfg: AdaptationConfig):
    """Move a fraction ``beta`` toward the targets, keep ``gamma`` within
    ``[gamma_lim, rho_min]`` and restore the ``eps`` separation."""
    g = _blend(f.gamma, gamma_tilde, cfg.beta)
    G = _blend(f.Gamma, Gamma_tilde, cfg.beta)
    g = np.maximum(np.minimum(g, rho_min), f.gamma_lim)
    G = np.maximum(G, g + f.eps)
    return g, G


def compensate_feedforward(theta: np.ndarray, base_old: Callable, base_new: Callable, states: np.ndarray) -> np.ndarray:
    """Increments ``theta'`` with ``base_new + k' == base_old + k`` at every candidate state.

    The base laws are called once as ``law(states, steps_index)``.
    """
    steps = theta.shape[0]
    x = np.asarray(states)[:steps]
    k = np.arange(steps)
    delta = base_old(x, k) - base_new(x, k)
    out = theta.copy()
    out[0] += delta[0]
    out[1:] += delta[1:] - delta[:-1]
    return out


def _states_of(candidate) -> np.ndarray:
    return candidate.states if isinstance(candidate, Trajectory) else np.asarray(candidate)


def adapt(funnels: Sequence[Funnel], theta: np.ndarray, candidate, predicates, rho_min: float,
          cfg: AdaptationConfig, model, controller_cfg: ControllerConfig) -> tuple[list, np.ndarray]:
    """One adaptation pass against ``candidate`` (a Trajectory or its state array).

    ``predicates`` is ordered like ``funnels``; frozen funnels are returned as is.
    """
    states = _states_of(candidate)
    new = []
    for f, p in zip(funnels, predicates):
        if f.adapt_mode is AdaptMode.FROZEN:
            new.append(f)
            continue
        rho = p.value(states[: len(f)])
        g_t, G_t = adapt_targets(f, rho, cfg)
        new.append(f.with_bounds(*blend_and_clip(f, g_t, G_t, rho_min, cfg)))
    if all(a is b for a, b in zip(new, funnels)):
        return list(funnels), theta.copy()
    old_law = GuidingController(model, [PredicateChannel(p, f) for p, f in zip(predicates, funnels)], controller_cfg)
    new_law = GuidingController(model, [PredicateChannel(p, f) for p, f in zip(predicates, new)], controller_cfg)
    return new, compensate_feedforward(theta, old_law, new_law, states)
