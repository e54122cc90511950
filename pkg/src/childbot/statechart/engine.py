"""Deterministic interpreter for parsed statecharts.

Semantics in brief:

* The configuration is one root-to-leaf path of nested states, or a single
  action-state id while waiting for an actuator to report completion.
* On an event, transitions are searched from the innermost active state
  outwards; inside a state the first enabled transition in document order
  wins.  At most one transition fires per event.
* Firing exits states below the least common ancestor (innermost first,
  running exit effects and cancelling their timers), then enters the
  target's default path (outermost first, running entry effects).
* ``call X(...)`` suspends the remaining entry effects on the call stack.
  ``return`` (as an effect, or a transition to ``return``) restores the
  caller configuration and resumes those effects.  An action state returns
  when its completion monitor event arrives.
* ``on done`` transitions fire once the entry effects of a freshly entered
  state have all run.
* Timers are logical and advance only through :func:`advance_clock`.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field, replace
from types import MappingProxyType

from ..events.model import Event, EventClass, match_pattern
from .expr import ExprError
from .model import StatechartDoc

MAX_DEPTH = 64
MAX_SETTLE = 1000


class EngineError(Exception):
    pass


class NoTransition(EngineError):
    """Raised only in strict mode: the event was consumed without effect."""


class StackOverflow(EngineError):
    pass


class UnboundParam(EngineError):
    pass


class UnknownTimer(EngineError):
    pass


@dataclass
class Frame:
    caller: tuple[str, ...]
    bindings: dict
    pending: list
    entered: list
    callee: str


@dataclass
class MachineState:
    configuration: tuple[str, ...]
    variables: dict
    bindings: dict = field(default_factory=dict)
    stack: list = field(default_factory=list)
    timers: dict = field(default_factory=dict)
    clock: float = 0.0
    emitted: int = 0
    finished: bool = False
    sender: str = "dialog"

    @property
    def leaf(self) -> str:
        return self.configuration[-1]

    @property
    def depth(self) -> int:
        return len(self.stack)

    def snapshot(self) -> dict:
        return {
            "configuration": list(self.configuration),
            "variables": self.variables,
            "stack": [f.callee for f in self.stack],
            "timers": {k: v[0] for k, v in sorted(self.timers.items())},
        }


def store_hash(machine: MachineState) -> str:
    blob = json.dumps(machine.variables, sort_keys=True, default=repr)
    return hashlib.sha256(blob.encode()).hexdigest()


class _Run:
    """Mutable working copy for one macro step."""

    def __init__(self, machine, doc, functions, event):
        self.m = copy.deepcopy(machine)
        self.doc = doc
        self.functions = functions or {}
        self.event = event
        self.out: list[Event] = []
        self.settled = 0

    # scope / evaluation
    def scope(self, state_id=None):
        scope = dict(self.m.variables)
        path = self.m.configuration if state_id is None else self._path(state_id)
        for sid in path:
            scope.update(self.m.bindings.get(sid, {}))
        return scope

    def _path(self, sid):
        if sid in self.doc.actions:
            return (sid,)
        return self.doc.path(sid)

    def evaluate(self, expr, state_id=None, readonly=False):
        scope = self.scope(state_id)
        if readonly:
            scope = MappingProxyType(scope)
        try:
            return expr.evaluate(scope, self.event, self.functions)
        except ExprError as exc:
            raise EngineError(f"{expr.source!r}: {exc}") from None

    def emit(self, name, params):
        self.m.emitted += 1
        ev = Event(EventClass(name.split(".")[0]), name, params, self.m.sender,
                   self.m.emitted, int(round(self.m.clock * 1000)))
        self.out.append(ev)

    # binding
    def bind(self, target, args, state_id):
        values = {k: self.evaluate(v, state_id) for k, v in args}
        params = self.doc.params_of(target)
        bound = {}
        for p in params:
            if p.name not in values or values[p.name] is None:
                raise UnboundParam(f"{target}: parameter {p.name!r} is unbound")
            if not p.accepts(values[p.name]):
                raise EngineError(f"{target}: {p.name}={values[p.name]!r} is not {p.type}")
            bound[p.name] = values[p.name]
        return bound

    # effects
    def run_effects(self, queue, entered):
        """Run ``queue`` (list of (state_id, Effect)); returns False if suspended."""
        while queue:
            sid, eff = queue.pop(0)
            kind = eff.kind
            if kind == "emit":
                self.emit(eff.name, {k: self.evaluate(v, sid) for k, v in eff.args})
            elif kind == "set":
                self.m.variables[eff.name] = self.evaluate(eff.value, sid)
            elif kind == "start":
                owner = self._timer_owner(sid, eff.name)
                secs = self.doc.node(owner).timers[eff.name]
                self.m.timers[eff.name] = (self.m.clock + secs, owner)
            elif kind == "cancel":
                self.m.timers.pop(eff.name, None)
            elif kind == "call":
                self.call(eff.name, self.bind(eff.name, eff.args, sid), queue, entered)
                return False
            elif kind == "return":
                self.do_return()
                return False
        return True

    def _timer_owner(self, sid, name):
        for s in reversed(self.doc.path(sid)):
            if name in self.doc.node(s).timers:
                return s
        raise UnknownTimer(name)

    def call(self, callee, bound, pending, entered):
        if len(self.m.stack) >= MAX_DEPTH:
            raise StackOverflow(f"call depth would exceed {MAX_DEPTH}")
        self.m.stack.append(Frame(self.m.configuration, copy.deepcopy(self.m.bindings),
                                  list(pending), list(entered), callee))
        if callee in self.doc.actions:
            action = self.doc.actions[callee]
            self.m.configuration = (callee,)
            self.m.bindings = {callee: bound}
            params = {k: self.evaluate(v, callee) for k, v in action.args}
            params.setdefault(action.robot_param, bound[action.robot_param])
            self.emit(action.event, params)
            return
        path = self.doc.default_path(callee)
        start = len(self.doc.path(callee)) - 1
        self.m.configuration = path
        self.m.bindings = {callee: bound}
        self.enter(path[start:])

    def do_return(self):
        if not self.m.stack:
            raise EngineError("return with an empty call stack")
        self.exit_states(list(self.m.configuration))
        frame = self.m.stack.pop()
        self.m.configuration = frame.caller
        self.m.bindings = frame.bindings
        if self.run_effects(frame.pending, frame.entered):
            self.settle(frame.entered)

    # entering / exiting
    def exit_states(self, states):
        for sid in reversed(states):
            if sid in self.doc.actions:
                continue
            node = self.doc.node(sid)
            for eff in node.exit:
                self.run_effects([(sid, eff)], [])
            for name in [n for n, (_, owner) in self.m.timers.items() if owner == sid]:
                del self.m.timers[name]
            self.m.bindings.pop(sid, None)

    def enter(self, states):
        queue = []
        for sid in states:
            node = self.doc.node(sid)
            if node.params and sid not in self.m.bindings:
                raise UnboundParam(f"{sid}: entered without arguments")
            queue.extend((sid, eff) for eff in node.entry)
        if self.run_effects(queue, list(states)):
            self.settle(list(states))

    def fire(self, owner, transition):
        if transition.target == "return":
            self.do_return()
            return
        bound = self.bind(transition.target, transition.args, owner)
        src = self.doc.path(owner)
        dst = self.doc.path(transition.target)
        common = 0
        while common < min(len(src), len(dst)) and src[common] == dst[common]:
            common += 1
        if common == min(len(src), len(dst)):
            common -= 1
        self.exit_states(list(self.m.configuration[common:]))
        new_path = self.doc.default_path(transition.target)
        self.m.configuration = new_path
        if bound or self.doc.params_of(transition.target):
            self.m.bindings[transition.target] = bound
        self.enter(new_path[common:])

    def settle(self, entered):
        """Fire the first completion transition of a freshly entered state."""
        if self.m.configuration[0] in self.doc.actions:
            return
        leaf = self.doc.node(self.m.configuration[-1])
        if leaf.final and leaf.parent is None and not self.m.stack:
            self.m.finished = True
        for sid in reversed(self.m.configuration):
            if sid not in entered:
                continue
            for t in self.doc.node(sid).transitions:
                if t.is_completion and (t.guard is None or self.evaluate(t.guard, sid, True)):
                    self.settled += 1
                    if self.settled > MAX_SETTLE:
                        raise EngineError("completion transitions did not settle")
                    self.fire(sid, t)
                    return

    # dispatch
    def dispatch(self) -> bool:
        ev = self.event
        conf = self.m.configuration
        if conf[0] in self.doc.actions:
            action = self.doc.actions[conf[0]]
            if not match_pattern(action.done, ev.name):
                return False
            robot = ev.params.get(action.robot_param)
            if robot is not None and robot != self.m.bindings[conf[0]][action.robot_param]:
                return False
            self.do_return()
            return True
        for sid in reversed(conf):
            for t in self.doc.node(sid).transitions:
                if t.is_completion or not match_pattern(t.trigger, ev.name):
                    continue
                if t.guard is not None and not self.evaluate(t.guard, sid, readonly=True):
                    continue
                self.fire(sid, t)
                return True
        return False


def start(doc: StatechartDoc, functions=None, sender="dialog", variables=None):
    """Initial machine plus the emissions of the initial entry sequence."""
    init = {k: v.evaluate({}, None, functions or {}) for k, v in doc.variables.items()}
    if variables:
        init.update(variables)
    path = doc.default_path(doc.initial)
    m = MachineState(configuration=path, variables=init, sender=sender)
    run = _Run(m, doc, functions, None)
    run.enter(list(path))
    return run.m, run.out


def step(machine: MachineState, doc: StatechartDoc, event: Event, functions=None, strict=False):
    """Deliver one event; returns ``(machine, emitted)``.

    With no enabled transition the input machine is returned unchanged with an
    empty list (or :class:`NoTransition` is raised when ``strict``).
    """
    run = _Run(machine, doc, functions, event)
    if not run.dispatch():
        if strict:
            raise NoTransition(event.name)
        return machine, []
    return run.m, run.out


def call_action_state(machine: MachineState, doc: StatechartDoc, callee: str, args: dict,
                      functions=None):
    """Call ``callee`` directly with literal ``args`` from the current configuration."""
    if not doc.exists(callee):
        raise EngineError(f"unknown callee {callee!r}")
    run = _Run(machine, doc, functions, None)
    bound = {}
    for p in doc.params_of(callee):
        if args.get(p.name) is None:
            raise UnboundParam(f"{callee}: parameter {p.name!r} is unbound")
        bound[p.name] = args[p.name]
    run.call(callee, bound, [], [])
    return run.m, run.out


def handle_timeout(machine: MachineState, doc: StatechartDoc, timer: str, functions=None):
    """Expire ``timer`` now and deliver its ``timer.NAME`` event."""
    if timer not in machine.timers:
        raise UnknownTimer(timer)
    m = replace(machine, timers={k: v for k, v in machine.timers.items() if k != timer})
    ev = Event(EventClass.MONITOR, f"timer.{timer}", {}, machine.sender, 0,
               int(round(machine.clock * 1000)))
    new, out = step(m, doc, ev, functions)
    return new, out


def advance_clock(machine: MachineState, doc: StatechartDoc, now: float, functions=None):
    """Move logical time to ``now``, expiring due timers in deadline order."""
    emitted = []
    while True:
        due = [(d, name) for name, (d, _) in machine.timers.items() if d <= now + 1e-12]
        if not due:
            break
        deadline, name = min(due)
        machine = replace(machine, clock=max(machine.clock, deadline))
        machine, out = handle_timeout(machine, doc, name, functions)
        emitted.extend(out)
    if now > machine.clock:
        machine = replace(machine, clock=now)
    return machine, emitted


class DialogEngine:
    """Stateful wrapper that records a replayable trace."""

    def __init__(self, doc: StatechartDoc, functions=None, sender="dialog", variables=None):
        self.doc = doc
        self.functions = functions or {}
        self.trace: list[dict] = []
        self.machine, out = start(doc, self.functions, sender, variables)
        self._record(None, out)
        self.initial_emissions = out

    def _record(self, event, out):
        self.trace.append({
            "event": event.to_wire() if event is not None else None,
            "configuration": list(self.machine.configuration),
            "emissions": [e.to_wire() for e in out],
        })

    def feed(self, event: Event) -> list[Event]:
        self.machine, out = step(self.machine, self.doc, event, self.functions)
        self._record(event, out)
        return out

    def advance(self, now: float) -> list[Event]:
        self.machine, out = advance_clock(self.machine, self.doc, now, self.functions)
        if out:
            self._record(Event(EventClass.MONITOR, "monitor.clock", {"now": now}, "clock", 0,
                               int(round(now * 1000))), out)
        return out

    @property
    def configuration(self):
        return self.machine.configuration

    @property
    def variables(self):
        return self.machine.variables

    @property
    def finished(self):
        return self.machine.finished
