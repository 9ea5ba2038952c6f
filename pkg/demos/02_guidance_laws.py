"""Two ways of merging per-predicate guidance into one input.

Two ground robots have to reach their goals, keep a distance band, avoid an
obstacle and steer a drone to their midpoint.  Without any learned
feedforward, the weighted least-squares combination handles the competing
channels better than plain weighted summation.
"""

from stlpi2.dynamics import rollout_batch
from stlpi2.scenarios import complex_scenario
from stlpi2.stl import robustness_batch

for combiner in ("simple", "improved"):
    sc = complex_scenario(combiner=combiner)
    states, inputs = rollout_batch(sc.model, sc.controller(), sc.x0, sc.steps, sc.dt)
    rho = robustness_batch(sc.formula, sc.registry, states, sc.dt)[0]
    energy = sc.cost(states, inputs)[0]
    print(f"{combiner:9s} combination: rho = {rho:+.3f}, input energy = {energy:.2f}")
    at7 = round(7.0 / sc.dt)
    print("    predicate values at the 7 s goal deadline:",
          " ".join(f"{p.name} {p.value(states[0, at7]):+.2f}" for p in sc.predicates))
