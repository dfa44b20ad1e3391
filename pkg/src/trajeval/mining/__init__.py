"""Interaction mining: atomic predicates, composable queries, pair annotation."""

from trajeval.mining.expr import (
    And,
    Atom,
    Binding,
    ExpressionError,
    Not,
    Or,
    UnboundNegationError,
    Var,
    atom,
    evaluate_predicate,
    parse_expression,
)
from trajeval.mining.interactions import (
    InteractionLabel,
    RulesConfig,
    annotate_interactive_pair,
    mine_interactive_pairs,
)
from trajeval.mining.predicates import (
    Crossing,
    LaneChange,
    NoLanesError,
    close_proximity,
    crossed_paths,
    detect_lane_change,
    high_acceleration,
)

__all__ = [
    "And",
    "Atom",
    "Binding",
    "Crossing",
    "ExpressionError",
    "InteractionLabel",
    "LaneChange",
    "NoLanesError",
    "Not",
    "Or",
    "RulesConfig",
    "UnboundNegationError",
    "Var",
    "annotate_interactive_pair",
    "atom",
    "close_proximity",
    "crossed_paths",
    "detect_lane_change",
    "evaluate_predicate",
    "high_acceleration",
    "mine_interactive_pairs",
    "parse_expression",
]
