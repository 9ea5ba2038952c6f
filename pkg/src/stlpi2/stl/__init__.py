"""Signal temporal logic: syntax, predicates and robustness semantics."""

from .predicates import PredicateDef, make_registry
from .semantics import (
    EmptyWindowError,
    Trajectory,
    evaluate,
    robustness,
    robustness_batch,
    robustness_signal,
    window_offsets,
)
from .syntax import (
    Always,
    And,
    Eventually,
    Formula,
    FormulaSyntaxError,
    Not,
    Or,
    Pred,
    TrueF,
    Until,
    depth,
    horizon,
    parse_formula,
    predicate_names,
    to_text,
)

__all__ = [
    "Always", "And", "EmptyWindowError", "Eventually", "Formula", "FormulaSyntaxError",
    "Not", "Or", "Pred", "PredicateDef", "Trajectory", "TrueF", "Until", "depth",
    "evaluate", "horizon", "make_registry", "parse_formula", "predicate_names",
    "robustness", "robustness_batch", "robustness_signal", "to_text", "window_offsets",
]
