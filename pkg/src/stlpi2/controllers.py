"""Guiding control laws derived from robustness funnels.

All functions accept a single state ``(n,)`` or a batch ``(N, n)``; the
returned inputs carry the same leading shape.  The unknown drift of the plant
is never used here: only the input matrix ``g(x)`` enters through the
coefficient ``v(x) = g(x)^T grad rho(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import ConsensusNetwork, SingleIntegrator, SystemModel, Unicycle
from .funnels import Funnel, GainParams, kappa, xi
from .stl.predicates import PredicateDef


@dataclass(frozen=True)
class ControllerConfig:
    K: float = 1.0
    delta: float = 0.05
    gains: GainParams = field(default_factory=GainParams)
    nu: float = 5.0
    combiner: str = "improved"

    def __post_init__(self):
        if self.K < 1 or not self.delta > 0 or self.nu < 0:
            raise ValueError("controller config needs K >= 1, delta > 0, nu >= 0")
        if self.combiner not in ("simple", "improved"):
            raise ValueError(f"unknown combiner {self.combiner!r}")


@dataclass(frozen=True)
class PredicateChannel:
    predicate: PredicateDef
    funnel: Funnel


def _position_gradient(model: SystemModel, pred: PredicateDef, x: np.ndarray):
    grad, singular = pred.gradient(x)
    if isinstance(model, Unicycle):
        return grad[..., :2], singular
    return grad, singular


def v_vector(model: SystemModel, pred: PredicateDef, x) -> tuple[np.ndarray, np.ndarray]:
    """Input coefficient of the robustness derivative and its singular flag.

    For the unicycle this is the scalar first-stage coefficient built from the
    heading direction only.
    """
    x = np.asarray(x, dtype=float)
    grad, singular = _position_gradient(model, pred, x)
    if isinstance(model, Unicycle):
        th = x[..., 2]
        return grad[..., 0] * np.cos(th) + grad[..., 1] * np.sin(th), singular
    if isinstance(model, (SingleIntegrator, ConsensusNetwork)):
        return grad, singular
    return np.einsum("...ij,...i->...j", model.input_matrix(x), grad), singular


def _channel_terms(cfg: ControllerConfig, model, channel: PredicateChannel, x, t_index):
    rho = channel.predicate.value(x)
    v, _ = v_vector(model, channel.predicate, x)
    z = xi(channel.funnel, rho, t_index)
    return v, z, kappa(cfg.gains, z)


def individual_control(cfg: ControllerConfig, model: SystemModel, channel: PredicateChannel, x, t_index: int):
    """``kappa(xi) * K / (|v|^2 + delta) * v``, zero in the uncontrolled region."""
    v, _, k = _channel_terms(cfg, model, channel, x, t_index)
    v = np.atleast_1d(v) if np.ndim(v) == 0 else v
    vv = np.sum(v * v, axis=-1, keepdims=True)
    return (np.asarray(k)[..., None] * cfg.K / (vv + cfg.delta)) * v


def normalized_weights(raw: np.ndarray) -> np.ndarray:
    """Normalise non-negative weights along the last axis; all-zero rows stay zero."""
    total = raw.sum(axis=-1, keepdims=True)
    return np.where(total > 0, raw / np.where(total > 0, total, 1.0), 0.0)


def combination_weights(channels: Sequence[PredicateChannel], x, t_index: int) -> np.ndarray:
    """``max(0, xi_i)`` normalised to sum to one (or all zero)."""
    x = np.asarray(x, dtype=float)
    raw = np.stack([np.maximum(0.0, xi(c.funnel, c.predicate.value(x), t_index)) for c in channels], axis=-1)
    return normalized_weights(raw)


def _stack_terms(cfg, model, channels, x, t_index):
    terms = [_channel_terms(cfg, model, c, x, t_index) for c in channels]
    V = np.stack([t[0] for t in terms], axis=-2)  # (..., M, m)
    Z = np.stack([np.asarray(t[1]) for t in terms], axis=-1)
    Kp = np.stack([np.asarray(t[2]) for t in terms], axis=-1)
    return V, Z, Kp


def simple_combination(cfg: ControllerConfig, model: SystemModel, channels: Sequence[PredicateChannel], x, t_index: int):
    """Weighted sum of individual laws with unnormalised weights ``max(0, xi)``."""
    V, Z, Kp = _stack_terms(cfg, model, channels, np.asarray(x, dtype=float), t_index)
    return simple_from_terms(cfg, V, Z, Kp)


def simple_from_terms(cfg, V, Z, Kp):
    alpha = np.maximum(0.0, Z)
    vv = np.sum(V * V, axis=-1)
    coef = alpha * Kp / (vv + cfg.delta)  # per-channel K = 1
    return np.einsum("...k,...ki->...i", coef, V)


def solve_combination(alpha: np.ndarray, Kp: np.ndarray, V: np.ndarray, delta: float) -> np.ndarray:
    """Solve ``(sum a v v^T + delta I) u = sum a kappa v`` for every batch row."""
    m = V.shape[-1]
    A = np.einsum("...k,...ki,...kj->...ij", alpha, V, V) + delta * np.eye(m)
    b = np.einsum("...k,...ki->...i", alpha * Kp, V)
    if m == 1:
        return b / A[..., 0]
    return np.linalg.solve(A, b[..., None])[..., 0]


def improved_combination(cfg: ControllerConfig, model: SystemModel, channels: Sequence[PredicateChannel], x, t_index: int):
    """Regularised least-squares blend of the individual laws."""
    V, Z, Kp = _stack_terms(cfg, model, channels, np.asarray(x, dtype=float), t_index)
    return solve_combination(normalized_weights(np.maximum(0.0, Z)), Kp, V, cfg.delta)


def unicycle_guidance(cfg: ControllerConfig, model: Unicycle, channels: Sequence[PredicateChannel], x, t_index: int):
    """Two-stage law: speed from the heading-projected gradients, then steering
    from the sensitivity of that projection to the heading."""
    x = np.asarray(x, dtype=float)
    th = x[..., 2]
    c, s = np.cos(th), np.sin(th)
    grads, Z = [], []
    for ch in channels:
        g, _ = _position_gradient(model, ch.predicate, x)
        grads.append(g)
        Z.append(xi(ch.funnel, ch.predicate.value(x), t_index))
    G = np.stack(grads, axis=-2)  # (..., M, 2)
    Z = np.stack(Z, axis=-1)
    return unicycle_from_terms(cfg, model, G, Z, c, s)


def unicycle_from_terms(cfg, model, G, Z, c, s):
    Kp = kappa(cfg.gains, Z)
    active = np.maximum(0.0, Z)
    v1 = G[..., 0] * c[..., None] + G[..., 1] * s[..., None]
    dv1 = -G[..., 0] * s[..., None] + G[..., 1] * c[..., None]

    a1 = normalized_weights(active)
    u1 = np.sum(a1 * Kp * v1, axis=-1) / (np.sum(a1 * v1 * v1, axis=-1) + cfg.delta)

    v2 = u1[..., None] * dv1 * model.steer_gain
    expo = -cfg.nu * u1[..., None] * v1
    expo = np.where(active > 0, expo, -np.inf)
    top = np.max(expo, axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    a2 = normalized_weights(np.exp(expo - top) * active)
    u2 = np.sum(a2 * Kp * v2, axis=-1) / (np.sum(a2 * v2 * v2, axis=-1) + cfg.delta)
    return np.stack([u1, u2], axis=-1)


class GuidingController:
    """Base law for a fixed set of channels, callable as ``u = law(x, k)``."""

    def __init__(self, model: SystemModel, channels: Sequence[PredicateChannel], cfg: ControllerConfig):
        self.model = model
        self.channels = list(channels)
        self.cfg = cfg
        # time-major (L, M) so that k may be a step index or an array of them
        self._gamma = np.stack([c.funnel.gamma for c in self.channels], axis=-1)
        self._Gamma = np.stack([c.funnel.Gamma for c in self.channels], axis=-1)

    def _terms(self, x, k):
        rhos, grads = [], []
        for ch in self.channels:
            rhos.append(ch.predicate.value(x))
            grads.append(_position_gradient(self.model, ch.predicate, x)[0])
        R = np.stack(rhos, axis=-1)
        Gk = self._Gamma[k]
        Z = (Gk - R) / (Gk - self._gamma[k])
        return np.stack(grads, axis=-2), Z

    def __call__(self, x: np.ndarray, k) -> np.ndarray:
        """``k`` is a step index, or an integer array aligned with the rows of ``x``."""
        x = np.asarray(x, dtype=float)
        grads, Z = self._terms(x, k)
        if isinstance(self.model, Unicycle):
            th = x[..., 2]
            return unicycle_from_terms(self.cfg, self.model, grads, Z, np.cos(th), np.sin(th))
        if isinstance(self.model, (SingleIntegrator, ConsensusNetwork)):
            V = grads
        else:
            V = np.einsum("...ij,...ki->...kj", self.model.input_matrix(x), grads)
        Kp = kappa(self.cfg.gains, Z)
        if self.cfg.combiner == "simple":
            return simple_from_terms(self.cfg, V, Z, Kp)
        return solve_combination(normalized_weights(np.maximum(0.0, Z)), Kp, V, self.cfg.delta)
