"""Robustness of a reach-and-avoid specification along a hand-made path.

A robot drives in a straight line from (3.5, 0.3) to (1.0, 3.5).  That line
cuts through the obstacle disk, so the avoid part of the formula is violated
even though the goal is reached.
"""

import numpy as np

from stlpi2.stl import PredicateDef, Trajectory, make_registry, parse_formula, robustness, robustness_signal, to_text

dt = 0.1
t = np.arange(0, 10 + dt / 2, dt)
start, goal = np.array([3.5, 0.3]), np.array([1.0, 3.5])
# reach the goal after 6 s and then stay put
s = np.clip(t / 6.0, 0, 1)[:, None]
states = start + s * (goal - start)
path = Trajectory(dt, states, np.diff(states, axis=0) / dt)

registry = make_registry([
    PredicateDef("goal", "inside_ball", ((0, 2),), 0.2, tuple(goal)),
    PredicateDef("clear", "outside_ball", ((0, 2),), 1.2, (2.5, 2.0)),
])

for text in ("F[0,10] G[0,inf] goal", "G[0,inf] clear", "F[0,10] G[0,inf] goal & G[0,inf] clear"):
    f = parse_formula(text)
    print(f"{to_text(f):45s} rho = {robustness(f, registry, path):+.3f}")

# the robustness signal shows when the obstacle is closest
sig = robustness_signal(parse_formula("clear"), registry, path.states, dt)
k = int(np.argmin(sig))
print(f"deepest obstacle penetration {-sig[k]:.3f} m at t = {t[k]:.1f} s")
