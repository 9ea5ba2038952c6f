"""Learn a feedforward for the single-robot task and compare with the optimum.

The cost trades reach time against effort, C = theta * T* + int v^2 dt.
For a fixed path length D the best constant speed is sqrt(theta) clipped to
[D/T, 1], which gives a closed-form lower bound to compare against.

Usage: python demos/03_learn_simple_task.py [theta] [iterations]
"""

import sys

from stlpi2 import Pi2Config, analytic_optimum, run, shortest_path_length, simple_scenario

theta = float(sys.argv[1]) if len(sys.argv) > 1 else 0.6
K = int(sys.argv[2]) if len(sys.argv) > 2 else 20

sc = simple_scenario(theta)
D = shortest_path_length()
v_opt, c_opt = analytic_optimum(theta, D, sc.T)
print(f"path length D = {D:.3f} m, optimal speed {v_opt:.3f}, optimal cost {c_opt:.3f}")

result = run(sc, Pi2Config(K=K), seed=0)
for rec in result.history[:: max(1, K // 10)]:
    print(f"iter {rec.k:3d}  lambda {rec.lam:8.2f}  best C {rec.best_C:7.3f}  best rho {rec.best_rho:+.3f}"
          f"  mean-policy C {rec.mean_C:7.3f}")
print(f"final: C = {result.C:.3f}, rho = {result.rho:+.3f}, J = {result.J:.3f} "
      f"({100 * (result.J / c_opt - 1):+.1f}% vs optimum)")
