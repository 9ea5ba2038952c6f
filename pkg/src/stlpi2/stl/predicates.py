"""Atomic predicates over the state vector.

Every predicate is a signed distance ``h(x)`` built from Euclidean norms, so
its gradient has unit norm on the active coordinates and is undefined only
where the norm vanishes (the singular point).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

SINGULAR_TOL = 1e-9

SHAPES = ("inside_ball", "outside_ball", "pair_distance_max", "pair_distance_min", "midpoint_ball")


def _as_slice(sel) -> slice:
    if isinstance(sel, slice):
        return sel
    start, stop = sel
    return slice(int(start), int(stop))


@dataclass(frozen=True)
class PredicateDef:
    """A named predicate ``h(x) >= 0``.

    ``selectors`` are ``(start, stop)`` index ranges into the state. Shapes:

    - ``inside_ball``:       r - |x[A] - c|
    - ``outside_ball``:      |x[A] - c| - r
    - ``pair_distance_max``: r - |x[A] - x[B]|
    - ``pair_distance_min``: |x[A] - x[B]| - r
    - ``midpoint_ball``:     r - |(x[A] + x[B]) / 2 - x[C]|
    """

    name: str
    shape: str
    selectors: tuple
    radius: float
    center: tuple = field(default=())

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown predicate shape {self.shape!r}")
        if not self.radius > 0:
            raise ValueError(f"predicate {self.name!r}: radius must be positive")
        need = {"inside_ball": 1, "outside_ball": 1, "pair_distance_max": 2,
                "pair_distance_min": 2, "midpoint_ball": 3}[self.shape]
        if len(self.selectors) != need:
            raise ValueError(f"predicate {self.name!r}: {self.shape} needs {need} selectors")
        sel = [_as_slice(s) for s in self.selectors]
        widths = {s.stop - s.start for s in sel}
        if len(widths) != 1:
            raise ValueError(f"predicate {self.name!r}: selectors differ in width")
        if self.shape in ("inside_ball", "outside_ball") and len(self.center) != widths.pop():
            raise ValueError(f"predicate {self.name!r}: center dimension mismatch")

    @property
    def _slices(self) -> list[slice]:
        return [_as_slice(s) for s in self.selectors]

    def _offset(self, x: np.ndarray) -> np.ndarray:
        s = self._slices
        if self.shape in ("inside_ball", "outside_ball"):
            return x[..., s[0]] - np.asarray(self.center, dtype=float)
        if self.shape == "midpoint_ball":
            return 0.5 * (x[..., s[0]] + x[..., s[1]]) - x[..., s[2]]
        return x[..., s[0]] - x[..., s[1]]

    @property
    def _sign(self) -> float:
        # +1 when h grows with the distance
        return 1.0 if self.shape in ("outside_ball", "pair_distance_min") else -1.0

    def value(self, x: np.ndarray) -> np.ndarray:
        """h(x) for states of shape (..., n)."""
        d = np.linalg.norm(self._offset(np.asarray(x, dtype=float)), axis=-1)
        return self._sign * d - self._sign * self.radius

    def gradient(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(dh/dx, singular)``; singular rows get a zero gradient."""
        x = np.asarray(x, dtype=float)
        off = self._offset(x)
        d = np.linalg.norm(off, axis=-1)
        singular = d < SINGULAR_TOL
        unit = off / np.where(singular, 1.0, d)[..., None]
        unit = np.where(singular[..., None], 0.0, unit) * self._sign
        grad = np.zeros_like(x)
        s = self._slices
        if self.shape in ("inside_ball", "outside_ball"):
            grad[..., s[0]] = unit
        elif self.shape == "midpoint_ball":
            grad[..., s[0]] += 0.5 * unit
            grad[..., s[1]] += 0.5 * unit
            grad[..., s[2]] -= unit
        else:
            grad[..., s[0]] += unit
            grad[..., s[1]] -= unit
        return grad, singular

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "shape": self.shape,
            "selectors": [list(_sel_tuple(s)) for s in self.selectors],
            "radius": self.radius,
            "center": list(self.center),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PredicateDef":
        return cls(
            name=d["name"],
            shape=d["shape"],
            selectors=tuple(tuple(s) for s in d["selectors"]),
            radius=float(d["radius"]),
            center=tuple(float(c) for c in d.get("center", ())),
        )


def _sel_tuple(s) -> tuple[int, int]:
    s = _as_slice(s)
    return s.start, s.stop


Registry = Mapping[str, PredicateDef]


def make_registry(preds) -> dict[str, PredicateDef]:
    reg: dict[str, PredicateDef] = {}
    for p in preds:
        if p.name in reg:
            raise ValueError(f"duplicate predicate {p.name!r}")
        reg[p.name] = p
    return reg
