"""A tiny, side-effect-free expression language for spatial coefficients.

Expressions are arithmetic over the coordinates ``x`` and ``y``, numeric
literals, the constants ``pi`` and ``e``, and the functions ``sin``, ``cos``,
``exp`` and ``tanh``. They are parsed once with :mod:`ast` and evaluated with
numpy, so they broadcast over coordinate arrays.
"""

from __future__ import annotations

import ast
import math

import numpy as np

from .errors import ConfigError

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "tanh": np.tanh}
_CONSTANTS = {"pi": math.pi, "e": math.e}
_VARIABLES = ("x", "y")

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}
_UNARY = {ast.UAdd: np.positive, ast.USub: np.negative}


class Expression:
    """Compiled coefficient expression.

    >>> Expression("2 + sin(2*pi*x)")(0.25)
    3.0
    """

    def __init__(self, source: str):
        self.source = source.strip()
        try:
            tree = ast.parse(self.source, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {source!r}: {exc.msg}") from None
        self._check(tree.body)
        self._tree = tree.body
        self.variables = frozenset(
            node.id for node in ast.walk(tree) if isinstance(node, ast.Name) and node.id in _VARIABLES
        )

    def _check(self, node):
        if isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ConfigError(f"operator {type(node.op).__name__} not allowed in {self.source!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNARY:
                raise ConfigError(f"operator {type(node.op).__name__} not allowed in {self.source!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
                raise ConfigError(f"unknown function in {self.source!r}")
            if len(node.args) != 1 or node.keywords:
                raise ConfigError(f"functions take exactly one argument in {self.source!r}")
            self._check(node.args[0])
        elif isinstance(node, ast.Name):
            if node.id not in _VARIABLES and node.id not in _CONSTANTS:
                raise ConfigError(f"unknown name {node.id!r} in {self.source!r}")
        elif isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ConfigError(f"non-numeric literal in {self.source!r}")
        else:
            raise ConfigError(f"construct {type(node).__name__} not allowed in {self.source!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, env))
        if isinstance(node, ast.Call):
            return _FUNCTIONS[node.func.id](self._eval(node.args[0], env))
        if isinstance(node, ast.Name):
            if node.id in _CONSTANTS:
                return _CONSTANTS[node.id]
            return env[node.id]
        return float(node.value)

    def __call__(self, x, y=None):
        x = np.asarray(x, dtype=float)
        if y is None:
            y = np.zeros_like(x)
        y = np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, {"x": x, "y": y})
        out = np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape)
        return out.item() if out.ndim == 0 else np.array(out)

    def __eq__(self, other):
        return isinstance(other, Expression) and other.source == self.source

    def __hash__(self):
        return hash(self.source)

    def __repr__(self):
        return f"Expression({self.source!r})"
