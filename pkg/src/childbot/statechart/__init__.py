"""Statechart DSL and interpreter."""
from .engine import (
    MAX_DEPTH,
    DialogEngine,
    EngineError,
    Frame,
    MachineState,
    NoTransition,
    StackOverflow,
    UnboundParam,
    UnknownTimer,
    advance_clock,
    call_action_state,
    handle_timeout,
    start,
    step,
    store_hash,
)
from .expr import Expr, ExprError
from .model import (
    ActionState,
    CallEdge,
    Effect,
    Param,
    ParseError,
    StateNode,
    StatechartDoc,
    Transition,
    ValidationError,
)
from .parser import format_statechart, load_statechart, parse_statechart, validate

__all__ = [
    "MAX_DEPTH", "DialogEngine", "EngineError", "Frame", "MachineState", "NoTransition",
    "StackOverflow", "UnboundParam", "UnknownTimer", "advance_clock", "call_action_state",
    "handle_timeout", "start", "step", "store_hash", "Expr", "ExprError", "ActionState",
    "CallEdge", "Effect", "Param", "ParseError", "StateNode", "StatechartDoc", "Transition",
    "ValidationError", "format_statechart", "load_statechart", "parse_statechart", "validate",
]
