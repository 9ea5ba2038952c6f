"""Direct recursive evaluators used to cross-check :mod:`.semantics`.

Nothing here is shared with the production evaluator: each call re-evaluates
its subformulas point by point, and grid windows are enumerated explicitly.
"""

from __future__ import annotations

import math

from .semantics import EmptyWindowError
from .syntax import Always, And, Eventually, Formula, Not, Or, Pred, TrueF, Until


def _indices(a: float, b: float, dt: float, t: int, L: int) -> range:
    first = t + math.ceil(a / dt - 1e-9)
    last = L - 1 if math.isinf(b) else min(t + math.floor(b / dt + 1e-9), L - 1)
    if first > last:
        raise EmptyWindowError(f"empty window at t={t}")
    return range(first, last + 1)


def rho(f: Formula, h: dict, dt: float, t: int) -> float:
    """Robustness of ``f`` at grid index ``t`` from 1-D predicate samples ``h``."""
    L = len(next(iter(h.values())))
    if isinstance(f, TrueF):
        return math.inf
    if isinstance(f, Pred):
        return float(h[f.name][t])
    if isinstance(f, Not):
        return -rho(f.child, h, dt, t)
    if isinstance(f, And):
        return min(rho(f.left, h, dt, t), rho(f.right, h, dt, t))
    if isinstance(f, Or):
        return max(rho(f.left, h, dt, t), rho(f.right, h, dt, t))
    idx = _indices(f.a, f.b, dt, t, L)
    if isinstance(f, Eventually):
        return max(rho(f.child, h, dt, k) for k in idx)
    if isinstance(f, Always):
        return min(rho(f.child, h, dt, k) for k in idx)
    best = -math.inf
    for t1 in idx:
        hold = min(rho(f.left, h, dt, t2) for t2 in range(t, t1 + 1))
        best = max(best, min(rho(f.right, h, dt, t1), hold))
    return best


def holds(f: Formula, h: dict, dt: float, t: int) -> bool:
    """Boolean satisfaction on the grid (predicate true iff h >= 0)."""
    L = len(next(iter(h.values())))
    if isinstance(f, TrueF):
        return True
    if isinstance(f, Pred):
        return bool(h[f.name][t] >= 0)
    if isinstance(f, Not):
        return not holds(f.child, h, dt, t)
    if isinstance(f, And):
        return holds(f.left, h, dt, t) and holds(f.right, h, dt, t)
    if isinstance(f, Or):
        return holds(f.left, h, dt, t) or holds(f.right, h, dt, t)
    idx = _indices(f.a, f.b, dt, t, L)
    if isinstance(f, Eventually):
        return any(holds(f.child, h, dt, k) for k in idx)
    if isinstance(f, Always):
        return all(holds(f.child, h, dt, k) for k in idx)
    return any(
        holds(f.right, h, dt, t1) and all(holds(f.left, h, dt, t2) for t2 in range(t, t1 + 1))
        for t1 in idx
    )
