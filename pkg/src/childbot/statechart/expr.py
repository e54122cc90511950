"""Side-effect-free expressions used in guards, ``set`` effects and call/emit arguments.

Expressions use Python syntax restricted to literals, names, ``event.<param>``,
arithmetic, comparisons, boolean operators, conditional expressions,
subscripts and calls to a whitelist of functions.  They are interpreted by
walking the AST, never passed to ``eval``.
"""
from __future__ import annotations

import ast
import operator
from collections.abc import Mapping

_BINOPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.FloorDiv: operator.floordiv, ast.Mod: operator.mod,
}
_CMPOPS = {
    ast.Eq: operator.eq, ast.NotEq: operator.ne, ast.Lt: operator.lt, ast.LtE: operator.le,
    ast.Gt: operator.gt, ast.GtE: operator.ge,
    ast.In: lambda a, b: a in b, ast.NotIn: lambda a, b: a not in b,
}
BUILTINS = {"len": len, "min": min, "max": max, "abs": abs, "str": str, "int": int, "float": float}


class ExprError(Exception):
    pass


def _check(node, src):
    for sub in ast.walk(node):
        if isinstance(sub, (ast.Expression, ast.Load, ast.BoolOp, ast.And, ast.Or, ast.UnaryOp,
                            ast.Not, ast.USub, ast.UAdd, ast.BinOp, ast.Compare, ast.IfExp,
                            ast.Name, ast.List, ast.Tuple, ast.Subscript, ast.keyword)):
            continue
        if isinstance(sub, tuple(_BINOPS)) or isinstance(sub, tuple(_CMPOPS)):
            continue
        if isinstance(sub, ast.Constant):
            if not isinstance(sub.value, (str, int, float, bool, type(None))):
                raise ExprError(f"unsupported literal in {src!r}")
            continue
        if isinstance(sub, ast.Attribute):
            if not (isinstance(sub.value, ast.Name) and sub.value.id == "event"):
                raise ExprError(f"only event.<param> attributes are allowed: {src!r}")
            continue
        if isinstance(sub, ast.Call):
            if not isinstance(sub.func, ast.Name) or sub.keywords:
                raise ExprError(f"only plain positional calls are allowed: {src!r}")
            continue
        if isinstance(sub, ast.Slice):
            raise ExprError(f"slices are not supported: {src!r}")
        raise ExprError(f"unsupported syntax {type(sub).__name__} in {src!r}")


class Expr:
    """A compiled expression; equality is by normalised source text."""

    __slots__ = ("source", "_tree")

    def __init__(self, source: str):
        try:
            tree = ast.parse(source.strip(), mode="eval")
        except SyntaxError as exc:
            raise ExprError(f"bad expression {source!r}: {exc.msg}") from None
        _check(tree, source)
        self._tree = tree.body
        self.source = ast.unparse(tree.body)

    @classmethod
    def from_node(cls, node):
        return cls(ast.unparse(node))

    def __eq__(self, other):
        return isinstance(other, Expr) and other.source == self.source

    def __hash__(self):
        return hash(self.source)

    def __repr__(self):
        return f"Expr({self.source!r})"

    @property
    def is_constant(self) -> bool:
        try:
            ast.literal_eval(self._tree)
        except ValueError:
            return False
        return True

    @property
    def value(self):
        """Literal value of a constant expression."""
        return ast.literal_eval(self._tree)

    def names(self) -> set[str]:
        return {n.id for n in ast.walk(self._tree) if isinstance(n, ast.Name)} - {"event"}

    def evaluate(self, scope: Mapping, event=None, functions: Mapping | None = None):
        return _Eval(scope, event, functions or {}).visit(self._tree)


class _Eval:
    def __init__(self, scope, event, functions):
        self.scope = scope
        self.event = event
        self.functions = functions

    def visit(self, node):
        method = getattr(self, "eval_" + type(node).__name__)
        return method(node)

    def eval_Constant(self, node):
        return node.value

    def eval_Name(self, node):
        if node.id in self.scope:
            return self.scope[node.id]
        if node.id in ("true", "false"):
            return node.id == "true"
        raise ExprError(f"unbound name {node.id!r}")

    def eval_Attribute(self, node):
        if self.event is None:
            raise ExprError(f"event.{node.attr} used outside an event context")
        return self.event.params.get(node.attr)

    def eval_List(self, node):
        return [self.visit(e) for e in node.elts]

    eval_Tuple = eval_List

    def eval_BoolOp(self, node):
        if isinstance(node.op, ast.And):
            result = True
            for v in node.values:
                result = self.visit(v)
                if not result:
                    return result
            return result
        result = False
        for v in node.values:
            result = self.visit(v)
            if result:
                return result
        return result

    def eval_UnaryOp(self, node):
        v = self.visit(node.operand)
        if isinstance(node.op, ast.Not):
            return not v
        if isinstance(node.op, ast.USub):
            return -v
        return +v

    def eval_BinOp(self, node):
        try:
            return _BINOPS[type(node.op)](self.visit(node.left), self.visit(node.right))
        except (TypeError, ZeroDivisionError) as exc:
            raise ExprError(str(exc)) from None

    def eval_Compare(self, node):
        left = self.visit(node.left)
        for op, comp in zip(node.ops, node.comparators):
            right = self.visit(comp)
            try:
                ok = _CMPOPS[type(op)](left, right)
            except TypeError as exc:
                raise ExprError(str(exc)) from None
            if not ok:
                return False
            left = right
        return True

    def eval_IfExp(self, node):
        return self.visit(node.body) if self.visit(node.test) else self.visit(node.orelse)

    def eval_Subscript(self, node):
        container = self.visit(node.value)
        index = self.visit(node.slice)
        try:
            return container[index]
        except (IndexError, KeyError, TypeError) as exc:
            raise ExprError(f"bad subscript: {exc}") from None

    def eval_Call(self, node):
        name = node.func.id
        fn = self.functions.get(name) or BUILTINS.get(name)
        if fn is None:
            raise ExprError(f"unknown function {name!r}")
        return fn(*[self.visit(a) for a in node.args])
