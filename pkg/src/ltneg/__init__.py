"""Local-timed negotiations: exact semantics and reachability engines."""

from .model import (
    Constraint,
    Entry,
    Fragment,
    Location,
    Negotiation,
    Violation,
    classify,
    make_negotiation,
    max_constant,
    reference_clock,
    validate,
)
from .semantics import (
    Configuration,
    ExhaustedUnknown,
    Infeasible,
    NotEnabled,
    Reachable,
    Run,
    SmallStep,
    Unknown,
    Unreachable,
    apply_delay,
    fire,
    initial_configuration,
    replay,
)

__version__ = "0.1.0"
