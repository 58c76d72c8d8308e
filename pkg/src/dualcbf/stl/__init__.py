"""STL fragment: syntax, parser, normalisation, smooth and exact semantics."""
from .monitor import Trajectory, TrajectoryTooShort, group_robustness, monitor, subtask_robustness, window
from .normalize import normalize
from .parser import parse_inner, parse_spec, tokenize
from .smooth import DEFAULT_BETA, smooth_max, smooth_max_grad, smooth_min, smooth_min_grad, smooth_robustness
from .syntax import (
    And,
    EmptySetError,
    FragmentError,
    InnerFormula,
    NegationError,
    NonCompactError,
    Not,
    OpKind,
    Or,
    Predicate,
    SpecError,
    SpecSyntaxError,
    SpecTree,
    Subtask,
    TemporalOp,
    clause_set,
    horizon,
)

__all__ = [name for name in dir() if not name.startswith("_")]
