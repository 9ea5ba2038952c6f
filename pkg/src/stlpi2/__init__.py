"""Funnel-guided PI2 policy search for signal temporal logic tasks."""

from .adaptation import AdaptationConfig, adapt
from .controllers import ControllerConfig, GuidingController, PredicateChannel
from .dynamics import ConsensusNetwork, NoiseModel, SingleIntegrator, Unicycle, rollout
from .funnels import AdaptMode, Funnel, GainParams, kappa, xi
from .pi2 import Pi2Config, RunResult, run
from .scenarios import Scenario, analytic_optimum, complex_scenario, shortest_path_length, simple_scenario
from .stl import Trajectory, parse_formula, robustness

__all__ = [
    "AdaptMode", "AdaptationConfig", "ConsensusNetwork", "ControllerConfig", "Funnel", "GainParams",
    "GuidingController", "NoiseModel", "Pi2Config", "PredicateChannel", "RunResult", "Scenario",
    "SingleIntegrator", "Trajectory", "Unicycle", "adapt", "analytic_optimum", "complex_scenario",
    "kappa", "parse_formula", "robustness", "rollout", "run", "shortest_path_length",
    "simple_scenario", "xi",
]
