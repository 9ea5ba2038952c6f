"""The two navigation case studies, their trajectory costs and the analytic
optimum of the single-robot task."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .adaptation import AdaptationConfig
from .controllers import ControllerConfig, GuidingController, PredicateChannel
from .dynamics import ConsensusNetwork, NoiseModel, SingleIntegrator, SystemModel, Unicycle
from .funnels import AdaptMode, Funnel
from .stl.predicates import PredicateDef, make_registry
from .stl.syntax import Formula, parse_formula, predicate_names

ROBOTS = ("integrator", "unicycle")
DEFAULT_NOISE_VARIANCE = 0.04


@dataclass(frozen=True)
class CostSpec:
    """``reach_and_effort``: theta * T* + int v^2 dt.  ``input_energy``: int u^T u dt."""

    kind: str
    theta: float = 0.0
    goal: str = ""

    def __post_init__(self):
        if self.kind not in ("reach_and_effort", "input_energy"):
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.kind == "reach_and_effort" and not (self.theta > 0 and self.goal):
            raise ValueError("reach_and_effort needs theta > 0 and a goal predicate")


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    model: SystemModel
    x0: np.ndarray
    predicates: tuple  # PredicateDef, ordered like ``funnels``
    formula: Formula
    funnels: tuple
    cost_spec: CostSpec
    T: float
    dt: float
    rho_min: float
    controller_cfg: ControllerConfig = field(default_factory=ControllerConfig)
    adaptation: AdaptationConfig = field(default_factory=AdaptationConfig)
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        if self.x0.shape != (self.model.n,):
            raise ValueError("x0 does not match the model state dimension")
        missing = predicate_names(self.formula) - set(self.registry)
        if missing:
            raise ValueError(f"formula uses unregistered predicates {sorted(missing)}")
        if len(self.funnels) != len(self.predicates):
            raise ValueError("one funnel per predicate is required")
        if any(len(f) != self.steps + 1 for f in self.funnels):
            raise ValueError("funnels must be sampled on the simulation grid")

    @property
    def steps(self) -> int:
        n = round(self.T / self.dt)
        if abs(n * self.dt - self.T) > 1e-9 * max(1.0, self.T):
            raise ValueError(f"T={self.T} is not an integer multiple of dt={self.dt}")
        return n

    @property
    def registry(self) -> dict:
        return make_registry(self.predicates)

    def controller(self, funnels=None) -> GuidingController:
        funnels = self.funnels if funnels is None else funnels
        chans = [PredicateChannel(p, f) for p, f in zip(self.predicates, funnels)]
        return GuidingController(self.model, chans, self.controller_cfg)

    def cost(self, states: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        """Trajectory cost for a batch (N, L, n) / (N, L-1, m) or a single trajectory."""
        return trajectory_cost(self.cost_spec, states, inputs, self.registry.get(self.cost_spec.goal),
                               self.dt, speed_channel=isinstance(self.model, Unicycle))


def _funnel(gamma, Gamma, lim, length, mode=AdaptMode.FIXED_UPPER) -> Funnel:
    return Funnel.constant(gamma, Gamma, lim, length=length, adapt_mode=mode)


def simple_scenario(theta: float = 0.25, robot: str = "integrator", noise: float = 0.0,
                    beta: float = 0.2, **overrides) -> Scenario:
    """Single robot: reach the goal disk and stay there while avoiding one obstacle.

    ``overrides`` replace Scenario fields (e.g. ``T``, ``dt``, ``x0``, ``rho_min``).
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    if robot not in ROBOTS:
        raise ValueError(f"robot must be one of {ROBOTS}")
    T, dt = overrides.pop("T", 10.0), overrides.pop("dt", 0.02)
    rho_min = overrides.pop("rho_min", 0.05)
    L = round(T / dt) + 1
    if robot == "integrator":
        model, pos, x0 = SingleIntegrator(), (0, 2), [3.5, 0.3]
    else:
        model, pos, x0 = Unicycle(), (0, 2), [3.5, 0.3, 0.0]
    preds = (
        PredicateDef("mu1", "inside_ball", (pos,), 0.2, (1.0, 3.5)),
        PredicateDef("mu2", "outside_ball", (pos,), 1.2, (2.5, 2.0)),
    )
    funnels = (
        _funnel(-5.0, 0.2, -7.0, L),
        _funnel(rho_min, 0.5, rho_min, L, AdaptMode.FROZEN),
    )
    fields = dict(
        name=f"simple-{robot}", model=model, x0=x0, predicates=preds,
        formula=parse_formula("F[0,10] G[0,inf] mu1 & G[0,inf] mu2"), funnels=funnels,
        cost_spec=CostSpec("reach_and_effort", theta, "mu1"), T=T, dt=dt, rho_min=rho_min,
        adaptation=AdaptationConfig(0.8, beta), noise=NoiseModel(noise),
    )
    fields.update(overrides)
    return Scenario(**fields)


def complex_scenario(noise: float = 0.0, beta: float = 0.8, combiner: str = "improved", **overrides) -> Scenario:
    """Two ground robots and a drone under a consensus coupling."""
    T, dt = overrides.pop("T", 10.0), overrides.pop("dt", 0.01)
    rho_min = overrides.pop("rho_min", 0.02)
    L = round(T / dt) + 1
    r1, r2, r3 = (0, 2), (2, 4), (4, 6)
    preds = (
        PredicateDef("mu1", "inside_ball", (r1,), 0.1, (2.0, 4.2)),
        PredicateDef("mu2", "inside_ball", (r2,), 0.1, (3.0, 4.2)),
        PredicateDef("mu3", "pair_distance_max", (r1, r2), 1.1),
        PredicateDef("mu4", "pair_distance_min", (r1, r2), 0.9),
        PredicateDef("mu5", "outside_ball", (r1,), 1.2, (2.5, 2.5)),
        PredicateDef("mu6", "outside_ball", (r2,), 1.2, (2.5, 2.5)),
        PredicateDef("mu7", "midpoint_ball", (r1, r2, r3), 0.1),
    )
    goal, dist, obst = (-4.0, 0.1, -7.0), (0.0, 0.1, 0.0), (0.0, 0.5, 0.0)
    drone = (-2.0, 0.1, -4.0)
    funnels = tuple(_funnel(*b, L) for b in (goal, goal, dist, dist, obst, obst, drone))
    text = ("F[0,7] G[0,inf] mu1 & F[0,7] G[0,inf] mu2 & G[0,inf] mu3 & G[0,inf] mu4"
            " & G[0,inf] mu5 & G[0,inf] mu6 & F[0,3] G[0,inf] mu7")
    fields = dict(
        name="complex", model=ConsensusNetwork(), x0=[3.0, 0.8, 2.0, 0.8, 1.2, 0.7], predicates=preds,
        formula=parse_formula(text), funnels=funnels, cost_spec=CostSpec("input_energy"),
        T=T, dt=dt, rho_min=rho_min, controller_cfg=ControllerConfig(combiner=combiner),
        adaptation=AdaptationConfig(0.8, beta), noise=NoiseModel(noise),
    )
    fields.update(overrides)
    return Scenario(**fields)


def with_overrides(s: Scenario, **kw) -> Scenario:
    return replace(s, **kw)


# -- costs -----------------------------------------------------------------------


def reach_time(goal_rho: np.ndarray, dt: float) -> np.ndarray:
    """``dt * t*`` where ``t*`` is the first index after which ``goal_rho >= 0``
    holds to the end; the full horizon when the last sample is outside."""
    ok = np.asarray(goal_rho) >= 0
    L = ok.shape[-1]
    bad_rev = ~ok[..., ::-1]
    any_bad = bad_rev.any(axis=-1)
    last_bad = L - 1 - np.argmax(bad_rev, axis=-1)
    t_star = np.where(any_bad, last_bad + 1, 0)
    return np.minimum(t_star, L - 1) * dt


def trajectory_cost(spec: CostSpec, states: np.ndarray, inputs: np.ndarray, goal: Optional[PredicateDef],
                    dt: float, speed_channel: bool = False):
    """Cost of recorded (saturated) inputs; batched over leading axes.

    With ``speed_channel`` the effort is the first input squared (unicycle
    speed), otherwise ``|u|^2``.
    """
    inputs = np.asarray(inputs, dtype=float)
    if spec.kind == "input_energy":
        out = np.sum(inputs * inputs, axis=(-2, -1)) * dt
    else:
        if goal is None:
            raise ValueError(f"goal predicate {spec.goal!r} is not registered")
        v2 = inputs[..., 0] ** 2 if speed_channel else np.sum(inputs * inputs, axis=-1)
        out = spec.theta * reach_time(goal.value(states), dt) + np.sum(v2, axis=-1) * dt
    return float(out) if np.ndim(out) == 0 else out


# -- analytic optimum --------------------------------------------------------------


def geodesic_around_circle(a, b, center, radius: float) -> float:
    """Shortest path length from ``a`` to ``b`` avoiding the open disk."""
    a, b, c = (np.asarray(p, dtype=float) for p in (a, b, center))
    da, db = np.linalg.norm(a - c), np.linalg.norm(b - c)
    if da < radius or db < radius:
        raise ValueError("endpoint lies inside the circle")
    ab = b - a
    s = np.clip(np.dot(c - a, ab) / max(np.dot(ab, ab), 1e-300), 0.0, 1.0)
    if np.linalg.norm(a + s * ab - c) >= radius:
        return float(np.linalg.norm(ab))
    phi = math.acos(np.clip(np.dot(a - c, b - c) / (da * db), -1.0, 1.0))
    arc = phi - math.acos(radius / da) - math.acos(radius / db)
    return math.sqrt(da**2 - radius**2) + math.sqrt(db**2 - radius**2) + radius * arc


def shortest_path_length(start=(3.5, 0.3), obstacle=(2.5, 2.0), r_o: float = 1.2,
                         goal=(1.0, 3.5), r_g: float = 0.2, margin: float = 0.05) -> float:
    """Distance from ``start`` to the goal disk boundary around the obstacle circle.

    ``margin`` widens the obstacle clearance: a trajectory with robustness
    ``rho_min`` keeps ``r_o + rho_min`` from the centre, whereas the reach time
    only needs the goal boundary itself.
    """
    r_o = r_o + margin
    if np.linalg.norm(np.subtract(start, obstacle)) < r_o:
        raise ValueError("start lies inside the obstacle clearance circle")
    if np.linalg.norm(np.subtract(goal, obstacle)) < r_o + r_g:
        raise ValueError("goal region overlaps the obstacle clearance circle")
    # the last leg enters the disk along a straight segment, so the centre
    # distance shortens by exactly r_g
    return geodesic_around_circle(start, goal, obstacle, r_o) - r_g


def _segments_clear(p: np.ndarray, q: np.ndarray, c: np.ndarray, r: float) -> np.ndarray:
    d = q - p
    dd = np.maximum(np.sum(d * d, axis=-1), 1e-300)
    s = np.clip(np.sum((c - p) * d, axis=-1) / dd, 0.0, 1.0)
    closest = p + s[..., None] * d
    return np.linalg.norm(closest - c, axis=-1) >= r * (1 - 1e-9)


def visibility_graph_length(start, obstacle, r_o: float, goal, r_g: float,
                            vertices: int = 360, targets: int = 64) -> float:
    """Independent check of ``shortest_path_length``: Dijkstra on a visibility
    graph over a circumscribed polygon, ending at sampled goal-boundary points."""
    c = np.asarray(obstacle, dtype=float)
    ang = np.linspace(0, 2 * np.pi, vertices, endpoint=False)
    poly = c + (r_o / math.cos(math.pi / vertices)) * np.stack([np.cos(ang), np.sin(ang)], -1)
    tang = np.linspace(0, 2 * np.pi, targets, endpoint=False)
    tgt = np.asarray(goal, dtype=float) + r_g * np.stack([np.cos(tang), np.sin(tang)], -1)
    nodes = np.vstack([np.asarray(start, dtype=float)[None], poly, tgt])
    P, Q = nodes[:, None, :], nodes[None, :, :]
    w = np.linalg.norm(P - Q, axis=-1)
    clear = _segments_clear(np.broadcast_to(P, w.shape + (2,)), np.broadcast_to(Q, w.shape + (2,)), c, r_o)
    w = np.where(clear, w, 0.0)
    np.fill_diagonal(w, 0.0)
    dist = dijkstra(w, directed=False, indices=0)
    return float(dist[-targets:].min())


def analytic_optimum(theta: float, D: float, T: float) -> tuple[float, float]:
    """``v = clip(sqrt(theta), D/T, 1)`` minimises ``theta*D/v + D*v`` on ``[D/T, 1]``."""
    if not theta > 0 or not D > 0 or not T > 0:
        raise ValueError("theta, D and T must be positive")
    v = min(1.0, max(D / T, math.sqrt(theta)))
    return v, theta * D / v + D * v
