"""Parsed statechart document types."""
from __future__ import annotations

from dataclasses import dataclass, field

from .expr import Expr

PARAM_TYPES = {
    "any": object, "str": str, "int": int, "float": (int, float), "bool": bool, "list": list,
}

EFFECT_KINDS = ("emit", "set", "start", "cancel", "call", "return")


class ParseError(Exception):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ValidationError(Exception):
    pass


@dataclass(frozen=True)
class Param:
    name: str
    type: str = "any"

    def accepts(self, value) -> bool:
        if self.type == "any":
            return True
        if self.type in ("int", "float") and isinstance(value, bool):
            return False
        return isinstance(value, PARAM_TYPES[self.type])


@dataclass(frozen=True)
class Effect:
    """``emit``/``call`` use ``name`` + ``args``; ``set`` uses ``name`` + ``value``;
    ``start``/``cancel`` use ``name``; ``return`` uses nothing."""

    kind: str
    name: str = ""
    args: tuple[tuple[str, Expr], ...] = ()
    value: Expr | None = None

    @property
    def arg_map(self) -> dict[str, Expr]:
        return dict(self.args)


@dataclass(frozen=True)
class Transition:
    trigger: str
    target: str
    guard: Expr | None = None
    args: tuple[tuple[str, Expr], ...] = ()
    line: int = field(default=0, compare=False)

    @property
    def is_completion(self) -> bool:
        return self.trigger == "done"


@dataclass
class StateNode:
    id: str
    params: tuple[Param, ...] = ()
    entry: list[Effect] = field(default_factory=list)
    exit: list[Effect] = field(default_factory=list)
    transitions: list[Transition] = field(default_factory=list)
    timers: dict[str, float] = field(default_factory=dict)
    children: list[StateNode] = field(default_factory=list)
    initial: str | None = None
    final: bool = False
    parent: str | None = field(default=None, compare=False, repr=False)

    @property
    def default_child(self) -> str | None:
        if self.initial:
            return self.initial
        return self.children[0].id if self.children else None


@dataclass
class ActionState:
    """A robot-parameterised mediator: emits one action event and waits for ``done``."""

    id: str
    params: tuple[Param, ...]
    event: str
    args: tuple[tuple[str, Expr], ...]
    done: str
    robot_param: str = "robot"


@dataclass
class CallEdge:
    caller: str
    callee: str
    args: dict[str, Expr]


@dataclass
class StatechartDoc:
    states: list[StateNode]
    initial: str
    actions: dict[str, ActionState] = field(default_factory=dict)
    variables: dict[str, Expr] = field(default_factory=dict)
    index: dict[str, StateNode] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.index:
            self.reindex()

    def reindex(self):
        self.index = {}

        def walk(node, parent):
            node.parent = parent
            self.index[node.id] = node
            for c in node.children:
                walk(c, node.id)

        for s in self.states:
            walk(s, None)

    def node(self, state_id) -> StateNode:
        return self.index[state_id]

    def path(self, state_id) -> tuple[str, ...]:
        """Root-to-node ids."""
        out = []
        cur = state_id
        while cur is not None:
            out.append(cur)
            cur = self.index[cur].parent
        return tuple(reversed(out))

    def default_path(self, state_id) -> tuple[str, ...]:
        """Path to ``state_id`` extended through default children to a leaf."""
        path = list(self.path(state_id))
        node = self.index[state_id]
        while node.default_child:
            node = self.index[node.default_child]
            path.append(node.id)
        return tuple(path)

    def call_edges(self) -> list[CallEdge]:
        edges = []
        for node in self.index.values():
            for eff in list(node.entry) + list(node.exit):
                if eff.kind == "call":
                    edges.append(CallEdge(node.id, eff.name, eff.arg_map))
        return edges

    def params_of(self, state_id) -> tuple[Param, ...]:
        if state_id in self.actions:
            return self.actions[state_id].params
        return self.index[state_id].params

    def exists(self, state_id) -> bool:
        return state_id in self.index or state_id in self.actions
