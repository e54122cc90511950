"""Line/indentation statechart DSL: parser, validator and pretty-printer.

Format (UTF-8, LF line endings, two-space indentation)::

    # full-line comment
    var retries = 0
    initial idle

    action speak(robot: str, text: str):
      emit action.speak(robot=robot, text=text)
      done monitor.speak.done

    state idle:
      on sense.speech.rec if event.text != "" -> greet(name=event.text)

    state greet(name: str):
      timer silence 5.0
      entry: call speak(robot="furhat", text="hello " + name)
      entry: start silence
      on timer.silence -> idle
      on done if retries > 3 -> bye
      state inner:
        on sense.touch.* -> return

    final state bye:

Effects: ``emit EVENT(k=expr, ...)``, ``set VAR = expr``, ``start TIMER``,
``cancel TIMER``, ``call STATE(k=expr, ...)``, ``return``.  A transition
trigger is a dotted event pattern, ``timer.NAME`` for a timer, or ``done``
for the completion of a state's entry effects.  The target ``return`` ends
the current call.
"""
from __future__ import annotations

import ast
import re

from .expr import Expr, ExprError
from .model import (
    PARAM_TYPES,
    ActionState,
    Effect,
    Param,
    ParseError,
    StateNode,
    StatechartDoc,
    Transition,
    ValidationError,
)
from ..events.model import valid_pattern

IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_STATE_RE = re.compile(rf"(final\s+)?state\s+({IDENT})\s*(?:\((.*)\))?\s*:\s*$")
_ACTION_RE = re.compile(rf"action\s+({IDENT})\s*\((.*)\)\s*:\s*$")
_VAR_RE = re.compile(rf"var\s+({IDENT})\s*=\s*(.+)$")
_TIMER_RE = re.compile(rf"timer\s+({IDENT})\s+([0-9]*\.?[0-9]+)\s*$")
_CALLISH_RE = re.compile(rf"({IDENT}(?:\.{IDENT})*)\s*(\(.*\))?\s*$")
EVENT_CLASSES = ("sense", "action", "monitor")
_SET_RE = re.compile(rf"set\s+({IDENT})\s*=\s*(.+)$")


def _find_unquoted(text, needle):
    quote = None
    i = 0
    while i < len(text):
        ch = text[i]
        if quote:
            if ch == "\\":
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif text.startswith(needle, i):
            return i
        i += 1
    return -1


def _parse_params(text, lineno) -> tuple[Param, ...]:
    params = []
    if not text or not text.strip():
        return ()
    for chunk in text.split(","):
        chunk = chunk.strip()
        name, _, typ = chunk.partition(":")
        name, typ = name.strip(), (typ.strip() or "any")
        if not re.fullmatch(IDENT, name):
            raise ParseError(lineno, f"bad parameter {chunk!r}")
        if typ not in PARAM_TYPES:
            raise ParseError(lineno, f"unknown parameter type {typ!r}")
        if any(p.name == name for p in params):
            raise ParseError(lineno, f"duplicate parameter {name!r}")
        params.append(Param(name, typ))
    return tuple(params)


def _parse_args(text, lineno) -> tuple[tuple[str, Expr], ...]:
    if not text:
        return ()
    try:
        call = ast.parse("_" + text, mode="eval").body
    except SyntaxError as exc:
        raise ParseError(lineno, f"bad argument list {text!r}: {exc.msg}") from None
    if not isinstance(call, ast.Call) or call.args:
        raise ParseError(lineno, "arguments must be keyword=expression pairs")
    out = []
    for kw in call.keywords:
        if kw.arg is None:
            raise ParseError(lineno, "** arguments are not supported")
        try:
            out.append((kw.arg, Expr.from_node(kw.value)))
        except ExprError as exc:
            raise ParseError(lineno, str(exc)) from None
    return tuple(out)


def _expr(text, lineno) -> Expr:
    try:
        return Expr(text)
    except ExprError as exc:
        raise ParseError(lineno, str(exc)) from None


def _parse_effect(text, lineno) -> Effect:
    text = text.strip()
    if text == "return":
        return Effect("return")
    head, _, rest = text.partition(" ")
    rest = rest.strip()
    if head == "set":
        m = _SET_RE.match(text)
        if not m:
            raise ParseError(lineno, f"bad set effect {text!r}")
        return Effect("set", m.group(1), value=_expr(m.group(2), lineno))
    if head in ("start", "cancel"):
        if not re.fullmatch(IDENT, rest):
            raise ParseError(lineno, f"bad timer name {rest!r}")
        return Effect(head, rest)
    if head in ("emit", "call"):
        m = _CALLISH_RE.match(rest)
        if not m:
            raise ParseError(lineno, f"bad {head} effect {text!r}")
        name = m.group(1)
        if head == "call" and not re.fullmatch(IDENT, name):
            raise ParseError(lineno, f"bad call target {name!r}")
        if head == "emit" and (not valid_pattern(name) or "*" in name
                               or name.split(".")[0] not in EVENT_CLASSES):
            raise ParseError(lineno, f"bad event name {name!r}")
        return Effect(head, name, _parse_args(m.group(2), lineno))
    raise ParseError(lineno, f"unknown effect {head!r}")


def _parse_transition(text, lineno) -> Transition:
    body = text[len("on "):].strip()
    trigger, _, rest = body.partition(" ")
    rest = rest.strip()
    if trigger != "done" and not valid_pattern(trigger):
        raise ParseError(lineno, f"bad trigger {trigger!r}")
    arrow = _find_unquoted(rest, "->")
    if arrow < 0:
        raise ParseError(lineno, "transition needs '-> TARGET'")
    cond, target_text = rest[:arrow].strip(), rest[arrow + 2:].strip()
    guard = None
    if cond:
        if not cond.startswith("if "):
            raise ParseError(lineno, f"expected 'if GUARD', got {cond!r}")
        guard = _expr(cond[3:], lineno)
    m = _CALLISH_RE.match(target_text)
    if not m or not re.fullmatch(IDENT, m.group(1)):
        raise ParseError(lineno, f"bad target {target_text!r}")
    return Transition(trigger, m.group(1), guard, _parse_args(m.group(2), lineno), line=lineno)


def parse_statechart(text: str) -> StatechartDoc:
    """Parse and validate a ``.chart`` document."""
    variables: dict[str, Expr] = {}
    states: list[StateNode] = []
    actions: dict[str, ActionState] = {}
    initial = None
    # stack of (indent, StateNode | _ActionBuilder)
    stack: list[tuple[int, object]] = []

    for lineno, raw in enumerate(text.split("\n"), start=1):
        if "\t" in raw[: len(raw) - len(raw.lstrip())]:
            raise ParseError(lineno, "tabs are not allowed in indentation")
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        indent = len(raw) - len(raw.lstrip(" "))
        if indent % 2:
            raise ParseError(lineno, "indentation must be a multiple of two spaces")
        while stack and stack[-1][0] >= indent:
            stack.pop()
        if stack and indent != stack[-1][0] + 2:
            raise ParseError(lineno, "unexpected indentation")
        parent = stack[-1][1] if stack else None
        if parent is None and indent:
            raise ParseError(lineno, "unexpected indentation")

        m = _STATE_RE.match(stripped)
        if m:
            if isinstance(parent, _ActionBuilder):
                raise ParseError(lineno, "states cannot be nested in an action")
            node = StateNode(m.group(2), _parse_params(m.group(3), lineno), final=bool(m.group(1)))
            (parent.children if parent else states).append(node)
            stack.append((indent, node))
            continue
        m = _ACTION_RE.match(stripped)
        if m:
            if parent is not None:
                raise ParseError(lineno, "actions must be declared at top level")
            builder = _ActionBuilder(m.group(1), _parse_params(m.group(2), lineno), lineno)
            if m.group(1) in actions or any(b.id == m.group(1) for _, b in stack):
                raise ValidationError(f"duplicate id {m.group(1)!r}")
            actions[m.group(1)] = builder
            stack.append((indent, builder))
            continue

        if parent is None:
            mv = _VAR_RE.match(stripped)
            if mv:
                if mv.group(1) in variables:
                    raise ParseError(lineno, f"duplicate variable {mv.group(1)!r}")
                variables[mv.group(1)] = _expr(mv.group(2), lineno)
            elif stripped.startswith("initial "):
                if initial is not None:
                    raise ParseError(lineno, "duplicate initial declaration")
                initial = stripped[len("initial "):].strip()
            else:
                raise ParseError(lineno, f"unexpected top-level line {stripped!r}")
            continue

        if isinstance(parent, _ActionBuilder):
            parent.add(stripped, lineno)
            continue

        node = parent
        if stripped.startswith("on "):
            node.transitions.append(_parse_transition(stripped, lineno))
        elif stripped.startswith("entry:"):
            node.entry.append(_parse_effect(stripped[len("entry:"):], lineno))
        elif stripped.startswith("exit:"):
            node.exit.append(_parse_effect(stripped[len("exit:"):], lineno))
        elif stripped.startswith("timer "):
            mt = _TIMER_RE.match(stripped)
            if not mt:
                raise ParseError(lineno, f"bad timer declaration {stripped!r}")
            if mt.group(1) in node.timers:
                raise ParseError(lineno, f"duplicate timer {mt.group(1)!r}")
            node.timers[mt.group(1)] = float(mt.group(2))
        elif stripped.startswith("initial "):
            if node.initial is not None:
                raise ParseError(lineno, "duplicate initial declaration")
            node.initial = stripped[len("initial "):].strip()
        else:
            raise ParseError(lineno, f"unexpected line {stripped!r}")

    if not states:
        raise ParseError(0, "document declares no states")
    built = {k: b.build() for k, b in actions.items()}
    doc = StatechartDoc(states, initial or states[0].id, built, variables)
    validate(doc)
    return doc


class _ActionBuilder:
    def __init__(self, id, params, line):
        self.id = id
        self.params = params
        self.line = line
        self.event = None
        self.args = ()
        self.done = None

    def add(self, text, lineno):
        if text.startswith("emit "):
            if self.event is not None:
                raise ParseError(lineno, "an action emits exactly one event")
            eff = _parse_effect(text, lineno)
            self.event, self.args = eff.name, eff.args
        elif text.startswith("done "):
            pat = text[len("done "):].strip()
            if not valid_pattern(pat):
                raise ParseError(lineno, f"bad completion pattern {pat!r}")
            self.done = pat
        else:
            raise ParseError(lineno, f"unexpected line in action: {text!r}")

    def build(self) -> ActionState:
        if self.event is None or self.done is None:
            raise ParseError(self.line, f"action {self.id!r} needs 'emit' and 'done' lines")
        if not any(p.name == "robot" for p in self.params):
            raise ValidationError(f"action {self.id!r} must take a robot parameter")
        return ActionState(self.id, self.params, self.event, self.args, self.done)


def validate(doc: StatechartDoc):
    """Referential checks; raises :class:`ValidationError`."""
    seen = set()
    for sid in _all_ids(doc.states):
        if sid in seen:
            raise ValidationError(f"duplicate state id {sid!r}")
        seen.add(sid)
    for aid in doc.actions:
        if aid in seen:
            raise ValidationError(f"duplicate id {aid!r}")
    doc.reindex()
    if doc.initial not in doc.index:
        raise ValidationError(f"initial state {doc.initial!r} does not exist")
    for node in doc.index.values():
        if node.initial is not None and node.initial not in {c.id for c in node.children}:
            raise ValidationError(f"initial {node.initial!r} is not a child of {node.id!r}")
        for t in node.transitions:
            if t.target == "return":
                if t.args:
                    raise ValidationError("return takes no arguments")
                continue
            if t.target not in doc.index:
                raise ValidationError(f"unknown transition target {t.target!r} in {node.id!r}")
            _check_arg_names(doc, t.target, t.args, node.id)
        for eff in node.exit:
            if eff.kind in ("call", "return"):
                raise ValidationError(f"{eff.kind} is not allowed in exit effects of {node.id!r}")
        for eff in node.entry + node.exit:
            if eff.kind == "call":
                if not doc.exists(eff.name):
                    raise ValidationError(f"unbound call to {eff.name!r} in {node.id!r}")
                _check_arg_names(doc, eff.name, eff.args, node.id)
            elif eff.kind in ("start", "cancel"):
                if _timer_owner(doc, node.id, eff.name) is None:
                    raise ValidationError(f"timer {eff.name!r} not declared for {node.id!r}")
            elif eff.kind == "set" and eff.name not in doc.variables:
                raise ValidationError(f"set of undeclared variable {eff.name!r} in {node.id!r}")


def _check_arg_names(doc, target, args, where):
    names = {p.name for p in doc.params_of(target)}
    for k, _ in args:
        if k not in names:
            raise ValidationError(f"{target!r} has no parameter {k!r} (from {where!r})")


def _timer_owner(doc, state_id, timer):
    for sid in reversed(doc.path(state_id)):
        if timer in doc.index[sid].timers:
            return sid
    return None


def _all_ids(states):
    for s in states:
        yield s.id
        yield from _all_ids(s.children)


def _fmt_args(args):
    return "(" + ", ".join(f"{k}={v.source}" for k, v in args) + ")"


def _fmt_params(params):
    return ", ".join(p.name if p.type == "any" else f"{p.name}: {p.type}" for p in params)


def _fmt_effect(eff: Effect) -> str:
    if eff.kind == "return":
        return "return"
    if eff.kind == "set":
        return f"set {eff.name} = {eff.value.source}"
    if eff.kind in ("start", "cancel"):
        return f"{eff.kind} {eff.name}"
    return f"{eff.kind} {eff.name}{_fmt_args(eff.args)}"


def format_statechart(doc: StatechartDoc) -> str:
    """Canonical text; ``parse_statechart(format_statechart(d)) == d``."""
    lines = []
    for name, value in doc.variables.items():
        lines.append(f"var {name} = {value.source}")
    lines.append(f"initial {doc.initial}")
    for action in doc.actions.values():
        lines.append("")
        lines.append(f"action {action.id}({_fmt_params(action.params)}):")
        lines.append(f"  emit {action.event}{_fmt_args(action.args)}")
        lines.append(f"  done {action.done}")

    def emit_state(node, depth):
        pad = "  " * depth
        head = "final state" if node.final else "state"
        params = f"({_fmt_params(node.params)})" if node.params else ""
        lines.append(f"{pad}{head} {node.id}{params}:")
        inner = pad + "  "
        if node.initial:
            lines.append(f"{inner}initial {node.initial}")
        for name, secs in node.timers.items():
            lines.append(f"{inner}timer {name} {secs!r}")
        for eff in node.entry:
            lines.append(f"{inner}entry: {_fmt_effect(eff)}")
        for eff in node.exit:
            lines.append(f"{inner}exit: {_fmt_effect(eff)}")
        for t in node.transitions:
            guard = f" if {t.guard.source}" if t.guard else ""
            args = _fmt_args(t.args) if t.args else ""
            lines.append(f"{inner}on {t.trigger}{guard} -> {t.target}{args}")
        for child in node.children:
            emit_state(child, depth + 1)

    for node in doc.states:
        lines.append("")
        emit_state(node, 0)
    return "\n".join(lines) + "\n"


def load_statechart(path) -> StatechartDoc:
    with open(path, encoding="utf-8") as fh:
        return parse_statechart(fh.read())
