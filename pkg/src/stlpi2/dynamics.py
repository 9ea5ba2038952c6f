"""Control-affine plants ``xdot = f(x) + g(x) u + w`` with Euler integration.

Only ``g`` (``input_matrix``) is meant to be used by controllers; ``drift`` is
the simulator's private knowledge of ``f``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .stl.semantics import Trajectory


class DivergenceError(FloatingPointError):
    """The integrated state became non-finite."""


# -- input constraints ---------------------------------------------------------


@dataclass(frozen=True)
class NormBall:
    r: float = 1.0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("norm-ball radius must be positive")


@dataclass(frozen=True)
class Box:
    limits: tuple

    def __post_init__(self):
        if any(not lim > 0 for lim in self.limits):
            raise ValueError("box limits must be positive")


@dataclass(frozen=True)
class BlockNormBall:
    block: int
    r: float = 1.0

    def __post_init__(self):
        if self.block < 1 or not self.r > 0:
            raise ValueError("block size must be >= 1 and radius positive")


InputConstraint = NormBall | Box | BlockNormBall


def _project_ball(u: np.ndarray, r: float) -> np.ndarray:
    norm = np.linalg.norm(u, axis=-1, keepdims=True)
    # a projected vector may come out a few ulps long; leave it alone so that
    # saturation is idempotent
    outside = norm > r * (1 + 8 * np.finfo(float).eps)
    scale = np.where(outside, r / np.where(norm > 0, norm, 1.0), 1.0)
    return u * scale


def saturate(u: np.ndarray, c: InputConstraint) -> np.ndarray:
    """Euclidean projection of ``u`` (shape (..., m)) onto the constraint set."""
    u = np.asarray(u, dtype=float)
    if isinstance(c, NormBall):
        return _project_ball(u, c.r)
    if isinstance(c, Box):
        lim = np.asarray(c.limits, dtype=float)
        return np.clip(u, -lim, lim)
    if isinstance(c, BlockNormBall):
        m = u.shape[-1]
        if m % c.block:
            raise ValueError(f"input dimension {m} is not a multiple of block {c.block}")
        blocks = u.reshape(u.shape[:-1] + (m // c.block, c.block))
        return _project_ball(blocks, c.r).reshape(u.shape)
    raise TypeError(f"unknown constraint {c!r}")


def constraint_violation(u: np.ndarray, c: InputConstraint) -> float:
    """Largest amount by which ``u`` leaves the constraint set (0 if inside)."""
    u = np.asarray(u, dtype=float)
    if isinstance(c, NormBall):
        excess = np.linalg.norm(u, axis=-1) - c.r
    elif isinstance(c, Box):
        excess = np.abs(u) - np.asarray(c.limits, dtype=float)
    else:
        m = u.shape[-1]
        blocks = u.reshape(u.shape[:-1] + (m // c.block, c.block))
        excess = np.linalg.norm(blocks, axis=-1) - c.r
    return float(max(0.0, np.max(excess, initial=0.0)))


def constraint_to_dict(c: InputConstraint) -> dict:
    if isinstance(c, NormBall):
        return {"kind": "norm_ball", "r": c.r}
    if isinstance(c, Box):
        return {"kind": "box", "limits": list(c.limits)}
    return {"kind": "block_norm_ball", "block": c.block, "r": c.r}


def constraint_from_dict(d: dict) -> InputConstraint:
    kind = d["kind"]
    if kind == "norm_ball":
        return NormBall(float(d["r"]))
    if kind == "box":
        return Box(tuple(float(v) for v in d["limits"]))
    if kind == "block_norm_ball":
        return BlockNormBall(int(d["block"]), float(d["r"]))
    raise ValueError(f"unknown constraint kind {kind!r}")


# -- noise ---------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """IID Gaussian disturbance with per-dimension variance; 0 disables it."""

    variance: float | tuple = 0.0

    def __post_init__(self):
        if np.any(np.asarray(self.variance, dtype=float) < 0):
            raise ValueError("noise variance must be non-negative")

    @property
    def enabled(self) -> bool:
        return bool(np.any(np.asarray(self.variance, dtype=float) > 0))

    def sample(self, rng: np.random.Generator, steps: int, n: int) -> np.ndarray:
        """One draw per integration step, shape (steps, n)."""
        if not self.enabled:
            return np.zeros((steps, n))
        std = np.sqrt(np.broadcast_to(np.asarray(self.variance, dtype=float), (n,)))
        return rng.standard_normal((steps, n)) * std


# -- plants --------------------------------------------------------------------


class SystemModel:
    """Base class; subclasses set ``n``, ``m`` and ``constraint``."""

    n: int
    m: int
    constraint: InputConstraint
    kind: str

    def drift(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def input_matrix(self, x: np.ndarray) -> np.ndarray:
        """g(x) with shape (..., n, m)."""
        raise NotImplementedError

    def input_effect(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.einsum("...ij,...j->...i", self.input_matrix(x), u)

    def xdot(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.drift(x) + self.input_effect(x, u)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class SingleIntegrator(SystemModel):
    dim: int = 2
    constraint: InputConstraint = field(default_factory=lambda: NormBall(1.0))
    kind = "single_integrator"

    @property
    def n(self) -> int:
        return self.dim

    @property
    def m(self) -> int:
        return self.dim

    def drift(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def input_matrix(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(self.dim), x.shape[:-1] + (self.dim, self.dim))

    def input_effect(self, x, u):
        return np.asarray(u, dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim, "constraint": constraint_to_dict(self.constraint)}


@dataclass(frozen=True)
class Unicycle(SystemModel):
    """State (x, y, heading), input (v, omega); heading rate is ``steer_gain * omega``."""

    steer_gain: float = 5.0
    constraint: InputConstraint = field(default_factory=lambda: Box((1.0, 1.0)))
    kind = "unicycle"
    n = 3
    m = 2

    def drift(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def input_matrix(self, x):
        x = np.asarray(x, dtype=float)
        th = x[..., 2]
        g = np.zeros(x.shape[:-1] + (3, 2))
        g[..., 0, 0] = np.cos(th)
        g[..., 1, 0] = np.sin(th)
        g[..., 2, 1] = self.steer_gain
        return g

    def input_effect(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        th = x[..., 2]
        return np.stack(
            [u[..., 0] * np.cos(th), u[..., 0] * np.sin(th), self.steer_gain * u[..., 1]], axis=-1
        )

    def to_dict(self):
        return {"kind": self.kind, "steer_gain": self.steer_gain,
                "constraint": constraint_to_dict(self.constraint)}


COMPLETE_GRAPH_LAPLACIAN_3 = ((2.0, -1.0, -1.0), (-1.0, 2.0, -1.0), (-1.0, -1.0, 2.0))


@dataclass(frozen=True)
class ConsensusNetwork(SystemModel):
    """Planar agents with drift ``-coupling * (L kron I) x`` and ``g = I``."""

    laplacian: tuple = COMPLETE_GRAPH_LAPLACIAN_3
    coupling: float = 0.1
    agent_dim: int = 2
    constraint: InputConstraint = field(default_factory=lambda: BlockNormBall(2, 1.0))
    kind = "consensus_network"

    def __post_init__(self):
        lap = np.asarray(self.laplacian, dtype=float)
        if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
            raise ValueError("laplacian must be square")
        object.__setattr__(self, "_drift_matrix", -self.coupling * np.kron(lap, np.eye(self.agent_dim)))

    @property
    def agents(self) -> int:
        return len(self.laplacian)

    @property
    def n(self) -> int:
        return self.agents * self.agent_dim

    @property
    def m(self) -> int:
        return self.n

    def drift(self, x):
        return np.asarray(x, dtype=float) @ self._drift_matrix.T

    def input_matrix(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(self.n), x.shape[:-1] + (self.n, self.n))

    def input_effect(self, x, u):
        return np.asarray(u, dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "laplacian": [list(r) for r in self.laplacian],
                "coupling": self.coupling, "agent_dim": self.agent_dim,
                "constraint": constraint_to_dict(self.constraint)}


def model_from_dict(d: dict) -> SystemModel:
    kind = d["kind"]
    c = constraint_from_dict(d["constraint"]) if "constraint" in d else None
    kw = {} if c is None else {"constraint": c}
    if kind == "single_integrator":
        return SingleIntegrator(dim=int(d.get("dim", 2)), **kw)
    if kind == "unicycle":
        return Unicycle(steer_gain=float(d.get("steer_gain", 5.0)), **kw)
    if kind == "consensus_network":
        return ConsensusNetwork(
            laplacian=tuple(tuple(float(v) for v in row) for row in d["laplacian"]),
            coupling=float(d.get("coupling", 0.1)),
            agent_dim=int(d.get("agent_dim", 2)),
            **kw,
        )
    raise ValueError(f"unknown model kind {kind!r}")


# -- integration -----------------------------------------------------------------


def step(model: SystemModel, x: np.ndarray, u: np.ndarray, w: np.ndarray | float, dt: float) -> np.ndarray:
    """One explicit Euler step; ``u`` must already be saturated."""
    x = np.asarray(x, dtype=float)
    x_next = x + (model.drift(x) + model.input_effect(x, u) + w) * dt
    if not np.all(np.isfinite(x_next)):
        raise DivergenceError("state became non-finite during integration")
    return x_next


BatchPolicy = Callable[[np.ndarray, int], np.ndarray]


def rollout_batch(
    model: SystemModel,
    policy: BatchPolicy,
    x0: np.ndarray,
    steps: int,
    dt: float,
    noise: Optional[np.ndarray] = None,
    batch: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate ``batch`` trajectories at once.

    ``policy(x, k)`` maps states (batch, n) at step ``k`` to raw inputs
    (batch, m); they are saturated before being applied and recorded.
    ``noise`` holds per-step disturbances (batch, steps, n).
    Returns states (batch, steps + 1, n) and inputs (batch, steps, m).
    """
    x = np.broadcast_to(np.asarray(x0, dtype=float), (batch, model.n)).copy()
    states = np.empty((batch, steps + 1, model.n))
    inputs = np.empty((batch, steps, model.m))
    states[:, 0] = x
    for k in range(steps):
        u = saturate(policy(x, k), model.constraint)
        w = 0.0 if noise is None else noise[:, k]
        x = step(model, x, u, w, dt)
        states[:, k + 1] = x
        inputs[:, k] = u
    return states, inputs


def rollout(
    model: SystemModel,
    policy: Callable[[np.ndarray, int], np.ndarray],
    x0: np.ndarray,
    T: float,
    dt: float,
    noise: NoiseModel = NoiseModel(),
    rng: Optional[np.random.Generator] = None,
) -> Trajectory:
    """Single closed-loop trajectory; ``policy(x, k)`` takes one state (n,)."""
    steps = round(T / dt)
    if abs(steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    draws = None
    if noise.enabled:
        if rng is None:
            raise ValueError("a random generator is required for noisy rollouts")
        draws = noise.sample(rng, steps, model.n)[None]
    states, inputs = rollout_batch(
        model, lambda x, k: np.asarray(policy(x[0], k), dtype=float)[None], x0, steps, dt, draws
    )
    return Trajectory(dt, states[0], inputs[0])
