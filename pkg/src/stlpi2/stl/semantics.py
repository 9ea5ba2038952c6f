"""Quantitative (spatial robustness) semantics on a uniform time grid.

The evaluator computes the whole robustness signal of each subformula
bottom-up, with an optional leading batch axis, so a batch of sampled
trajectories is scored in one pass.  Grid points whose evaluation window is
empty after clamping to the end of the signal are marked invalid (NaN);
asking for the robustness at such a point raises :class:`EmptyWindowError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .predicates import Registry
from .syntax import Always, And, Eventually, Formula, Not, Or, Pred, TrueF, Until

# slack for interval endpoints that are integer multiples of dt up to rounding
_GRID_TOL = 1e-9


class EmptyWindowError(ValueError):
    """A temporal window contains no grid point (formula outruns the signal)."""


@dataclass(frozen=True)
class Trajectory:
    """States ``(steps + 1, n)`` and inputs ``(steps, m)`` sampled every ``dt``."""

    dt: float
    states: np.ndarray
    inputs: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs.reshape(len(inputs), -1 if len(inputs) else 0)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)
        if states.ndim != 2 or inputs.ndim != 2:
            raise ValueError("states and inputs must be 2-D arrays")
        if states.shape[0] != inputs.shape[0] + 1:
            raise ValueError("states must have exactly one more row than inputs")
        if not (np.all(np.isfinite(states)) and np.all(np.isfinite(inputs))):
            raise ValueError("trajectory contains non-finite values")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def steps(self) -> int:
        return self.inputs.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.states.shape[0])


def window_offsets(a: float, b: float, dt: float) -> tuple[int, int | None]:
    """Grid offsets ``ceil(a/dt) .. floor(b/dt)``; ``None`` for an unbounded end."""
    lo = math.ceil(a / dt - _GRID_TOL)
    hi = None if math.isinf(b) else math.floor(b / dt + _GRID_TOL)
    if hi is not None and hi < lo:
        raise EmptyWindowError(f"interval [{a}, {b}] contains no grid point for dt={dt}")
    return lo, hi


def _valid_after_window(vc: int, lo: int, hi: int | None, L: int) -> np.ndarray:
    i = np.arange(L)
    last = np.full(L, L - 1) if hi is None else np.minimum(i + hi, L - 1)
    return (i + lo <= L - 1) & (last < vc)


def _window_reduce(x: np.ndarray, lo: int, hi: int | None, take_max: bool) -> np.ndarray:
    """out[..., i] = reduce(x[..., i+lo : i+hi+1]) with the window clipped at the end."""
    L = x.shape[-1]
    neutral = -np.inf if take_max else np.inf
    if hi is None or hi >= L - 1:
        op = np.maximum if take_max else np.minimum
        red = op.accumulate(x[..., ::-1], axis=-1)[..., ::-1]
    else:
        w = hi - lo + 1
        filt = maximum_filter1d if take_max else minimum_filter1d
        red = filt(x, size=w, axis=-1, mode="constant", cval=neutral, origin=-(w // 2))
    out = np.full_like(x, neutral)
    if lo < L:
        out[..., : L - lo] = red[..., lo:]
    return out


def _until(r1: np.ndarray, r2: np.ndarray, lo: int, hi: int) -> np.ndarray:
    L = r1.shape[-1]
    out = np.full(np.broadcast_shapes(r1.shape, r2.shape), -np.inf)
    running = np.broadcast_to(r1, out.shape).copy()
    for j in range(0, min(hi, L - 1) + 1):
        n = L - j
        if j > 0:
            running[..., :n] = np.minimum(running[..., :n], r1[..., j:])
        if j >= lo:
            cand = np.minimum(r2[..., j:], running[..., :n])
            out[..., :n] = np.maximum(out[..., :n], cand)
    return out


def _eval(f: Formula, h: dict, dt: float, L: int, shape) -> tuple[np.ndarray, int]:
    """Return (signal, number of leading valid grid points)."""
    if isinstance(f, TrueF):
        return np.full(shape + (L,), np.inf), L
    if isinstance(f, Pred):
        try:
            return h[f.name], L
        except KeyError:
            raise ValueError(f"predicate {f.name!r} is not in the registry") from None
    if isinstance(f, Not):
        s, v = _eval(f.child, h, dt, L, shape)
        return -s, v
    if isinstance(f, (And, Or)):
        s1, v1 = _eval(f.left, h, dt, L, shape)
        s2, v2 = _eval(f.right, h, dt, L, shape)
        op = np.minimum if isinstance(f, And) else np.maximum
        return op(s1, s2), min(v1, v2)
    lo, hi = window_offsets(f.a, f.b, dt)
    if isinstance(f, Until):
        s1, v1 = _eval(f.left, h, dt, L, shape)
        s2, v2 = _eval(f.right, h, dt, L, shape)
        vc = min(v1, v2)
        out = _until(_clean(s1, vc), _clean(s2, vc), lo, hi)
    else:
        s, vc = _eval(f.child, h, dt, L, shape)
        out = _window_reduce(_clean(s, vc), lo, hi, take_max=isinstance(f, Eventually))
    valid = _valid_after_window(vc, lo, hi, L)
    v = int(np.argmin(valid)) if not valid.all() else L
    out[..., v:] = np.nan
    return out, v


def _clean(s: np.ndarray, v: int) -> np.ndarray:
    if v == s.shape[-1]:
        return s
    s = s.copy()
    s[..., v:] = 0.0
    return s


def evaluate(f: Formula, h_signals: dict, dt: float) -> np.ndarray:
    """Robustness signal of ``f`` from predicate signals ``{name: (..., L)}``.

    Invalid grid points (empty windows) are NaN.
    """
    arrays = {k: np.asarray(v, dtype=float) for k, v in h_signals.items()}
    if not arrays:
        raise ValueError("no predicate signals given")
    first = next(iter(arrays.values()))
    L = first.shape[-1]
    shape = first.shape[:-1]
    out, _ = _eval(f, arrays, dt, L, shape)
    return np.broadcast_to(out, shape + (L,)).copy()


def predicate_signals(reg: Registry, states: np.ndarray, names=None) -> dict:
    """Evaluate each registered predicate along ``states`` of shape (..., L, n)."""
    names = reg.keys() if names is None else names
    return {n: reg[n].value(states) for n in names}


def robustness_signal(f: Formula, reg: Registry, states: np.ndarray, dt: float) -> np.ndarray:
    from .syntax import predicate_names

    names = predicate_names(f)
    missing = names - set(reg)
    if missing:
        raise ValueError(f"unregistered predicates: {sorted(missing)}")
    states = np.asarray(states, dtype=float)
    if names:
        return evaluate(f, predicate_signals(reg, states, names), dt)
    # predicate-free formula: only the grid matters
    return evaluate(f, {"__grid__": np.zeros(states.shape[:-1])}, dt)


def robustness(f: Formula, reg: Registry, tr: Trajectory, t_index: int = 0) -> float:
    """Spatial robustness of ``f`` on trajectory ``tr`` at grid index ``t_index``."""
    L = tr.states.shape[0]
    if not 0 <= t_index < L:
        raise IndexError(f"t_index {t_index} outside the trajectory grid [0, {L - 1}]")
    value = robustness_signal(f, reg, tr.states, tr.dt)[t_index]
    if np.isnan(value):
        raise EmptyWindowError(f"formula horizon exceeds the trajectory at t_index={t_index}")
    return float(value)


def robustness_batch(f: Formula, reg: Registry, states: np.ndarray, dt: float, t_index: int = 0) -> np.ndarray:
    """Robustness at ``t_index`` for a batch of state sequences ``(N, L, n)``."""
    values = robustness_signal(f, reg, states, dt)[..., t_index]
    if np.any(np.isnan(values)):
        raise EmptyWindowError(f"formula horizon exceeds the trajectory at t_index={t_index}")
    return values
