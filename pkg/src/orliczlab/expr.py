"""A tiny closed grammar for exterior data: numbers, x, y, + - * / **,
abs, min and max.  Expressions are parsed with :mod:`ast` and evaluated
on numpy arrays; nothing else is callable."""
from __future__ import annotations

import ast
import operator

import numpy as np

from .errors import ConfigurationError

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _min(*args):
    out = args[0]
    for a in args[1:]:
        out = np.minimum(out, a)
    return out


def _max(*args):
    out = args[0]
    for a in args[1:]:
        out = np.maximum(out, a)
    return out


_FUNCS = {"abs": (np.abs, 1, 1), "min": (_min, 2, None), "max": (_max, 2, None)}


class Expression:
    """Compiled exterior-data expression; call with an (N, dim) array."""

    def __init__(self, text: str, dim: int = 2):
        self.text = text
        self.dim = dim
        try:
            tree = ast.parse(text.strip(), mode="eval")
        except SyntaxError as exc:
            raise ConfigurationError(f"cannot parse expression {text!r}: {exc.msg}") from None
        self._names = ("x", "y")[:dim]
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            self._check(node.operand)
        elif isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ConfigurationError(f"only numeric literals are allowed in {self.text!r}")
        elif isinstance(node, ast.Name):
            if node.id not in self._names:
                raise ConfigurationError(
                    f"unknown name {node.id!r} in {self.text!r}; allowed: {self._names}"
                )
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or node.keywords:
                raise ConfigurationError(f"only abs, min and max may be called in {self.text!r}")
            _, lo, hi = _FUNCS[node.func.id]
            if len(node.args) < lo or (hi is not None and len(node.args) > hi):
                raise ConfigurationError(f"wrong number of arguments to {node.func.id}")
            for a in node.args:
                self._check(a)
        else:
            raise ConfigurationError(
                f"construct {type(node).__name__} is not allowed in {self.text!r}"
            )

    def _eval(self, node, env):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, env))
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id]
        fn = _FUNCS[node.func.id][0]
        return fn(*(self._eval(a, env) for a in node.args))

    def __call__(self, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        env = {name: coords[:, i] for i, name in enumerate(self._names)}
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), (coords.shape[0],)).copy()


def compile_expression(text: str, dim: int = 2) -> Expression:
    return Expression(text, dim)
