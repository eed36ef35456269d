"""A small arithmetic expression language for coefficient fields.

Grammar: numbers, the variables ``t``, ``x1``, ``x2``, the constant ``pi``
(or ``π``), binary ``+ - * /``, unary ``+ -`` and the functions ``sin``,
``cos`` and ``abs``.  Expressions are parsed with :mod:`ast` and every node
outside that whitelist is rejected.
"""

from __future__ import annotations

import ast

import numpy as np

VARIABLES = ("t", "x1", "x2")
FUNCTIONS = {"sin": np.sin, "cos": np.cos, "abs": np.abs}
CONSTANTS = {"pi": np.pi}

_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply, ast.Div: np.divide}
_UNARY = {ast.USub: np.negative, ast.UAdd: np.positive}


class ExpressionError(ValueError):
    pass


class Expression:
    def __init__(self, source: str):
        self.source = source
        text = source.replace("π", "pi")
        try:
            tree = ast.parse(text.strip(), mode="eval")
        except SyntaxError as exc:
            col = (exc.offset or 0)
            raise ExpressionError(f"cannot parse {source!r} at column {col}: {exc.msg}") from None
        self._tree = tree.body
        self.names = set()
        self._check(self._tree)

    @property
    def uses_time(self) -> bool:
        return "t" in self.names

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ExpressionError(f"{self.source!r}: only numeric literals are allowed")
        elif isinstance(node, ast.Name):
            if node.id not in VARIABLES and node.id not in CONSTANTS:
                raise ExpressionError(f"{self.source!r}: unknown name {node.id!r}")
            self.names.add(node.id)
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ExpressionError(f"{self.source!r}: operator {type(node.op).__name__} not allowed")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNARY:
                raise ExpressionError(f"{self.source!r}: operator {type(node.op).__name__} not allowed")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                raise ExpressionError(f"{self.source!r}: only sin, cos and abs may be called")
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"{self.source!r}: {node.func.id} takes exactly one argument")
            self._check(node.args[0])
        else:
            raise ExpressionError(f"{self.source!r}: unsupported syntax {type(node).__name__}")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else CONSTANTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, env))
        return FUNCTIONS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, t, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        val = self._eval(self._tree, {"t": float(t) if np.isscalar(t) else t, "x1": x1, "x2": np.asarray(x2, float)})
        return np.broadcast_to(np.asarray(val, dtype=float), np.broadcast(x1, np.asarray(x2)).shape)

    def __repr__(self):
        return f"Expression({self.source!r})"


def scalar_field(source: str, freeze: bool = False):
    from .assembly import CoefficientField

    e = Expression(source)
    field = CoefficientField(e, time_dependent=e.uses_time)
    return field.frozen(0.0) if freeze and e.uses_time else field


def vector_field(sources, freeze: bool = False):
    from .assembly import CoefficientField

    if len(sources) != 2:
        raise ExpressionError("a vector field needs exactly two component expressions")
    e1, e2 = Expression(sources[0]), Expression(sources[1])
    field = CoefficientField(lambda t, x1, x2: (e1(t, x1, x2), e2(t, x1, x2)),
                             time_dependent=e1.uses_time or e2.uses_time, vector=True)
    return field.frozen(0.0) if freeze and field.time_dependent else field


def spatial_function(source: str):
    """Expression in x1, x2 only, as a function of (x1, x2)."""
    e = Expression(source)
    if e.uses_time:
        raise ExpressionError(f"{source!r}: initial state may not depend on t")
    return lambda x1, x2: e(0.0, x1, x2)
