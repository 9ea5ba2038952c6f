"""Robustness funnels ``gamma(t) <= rho(x(t))`` and the linear-sigmoid gain."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.special import expit

SEPARATION_EPS = 1e-6


class AdaptMode(str, Enum):
    FROZEN = "frozen"
    FIXED_UPPER = "gamma_only_fixed_upper"
    CONSTANT_WIDTH = "constant_width"


@dataclass(frozen=True, eq=False)
class Funnel:
    """Lower bound ``gamma``, upper reference ``Gamma`` and adaptation floor,
    each sampled on the simulation grid."""

    gamma: np.ndarray
    Gamma: np.ndarray
    gamma_lim: np.ndarray
    adapt_mode: AdaptMode = AdaptMode.FIXED_UPPER
    eps: float = SEPARATION_EPS

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        G = np.asarray(self.Gamma, dtype=float)
        lim = np.asarray(self.gamma_lim, dtype=float)
        g, G, lim = np.broadcast_arrays(g, G, lim)
        for name, arr in (("gamma", g), ("Gamma", G), ("gamma_lim", lim)):
            arr = np.array(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "adapt_mode", AdaptMode(self.adapt_mode))
        if np.any(self.Gamma < self.gamma + self.eps * (1 - 1e-9)):
            raise ValueError("funnel requires Gamma(t) >= gamma(t) + eps everywhere")
        if np.any(self.gamma_lim > self.gamma):
            raise ValueError("funnel requires gamma_lim(t) <= gamma(t) everywhere")

    @classmethod
    def constant(cls, gamma: float, Gamma: float, gamma_lim: float | None = None, *,
                 length: int, adapt_mode=AdaptMode.FIXED_UPPER) -> "Funnel":
        lim = gamma if gamma_lim is None else gamma_lim
        return cls(np.full(length, float(gamma)), np.full(length, float(Gamma)),
                   np.full(length, float(lim)), adapt_mode)

    def __len__(self) -> int:
        return len(self.gamma)

    def with_bounds(self, gamma: np.ndarray, Gamma: np.ndarray) -> "Funnel":
        return replace(self, gamma=gamma, Gamma=Gamma)


def xi(f: Funnel, rho, t_index) -> np.ndarray | float:
    """Normalised violation ``(Gamma - rho) / (Gamma - gamma)`` at ``t_index``.

    Equal to 1 on the lower bound, 0 on the upper reference; above 1 the
    specification ``rho >= gamma`` is violated.
    """
    G = f.Gamma[t_index]
    return (G - rho) / (G - f.gamma[t_index])


@dataclass(frozen=True)
class GainParams:
    """``kappa(xi) = slope*xi + height / (1 + exp(-steepness*(xi - 1)))`` for xi > 0."""

    slope: float = 0.8
    height: float = 2.4
    steepness: float = 24.0

    def __post_init__(self):
        if self.slope < 0 or self.height < 0 or not self.steepness > 0:
            raise ValueError("gain parameters need slope >= 0, height >= 0, steepness > 0")


def kappa(p: GainParams, xi_value):
    """Linear-sigmoid gain; exactly zero in the uncontrolled region ``xi <= 0``."""
    x = np.asarray(xi_value, dtype=float)
    k = p.slope * x + p.height * expit(p.steepness * (x - 1.0))
    out = np.where(x > 0, k, 0.0)
    return float(out) if out.ndim == 0 else out
