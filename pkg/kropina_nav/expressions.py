"""
Coordinate formulas for user-supplied manifold specs.

Formulas are read with sympy over the variables ``x1 .. xn``, the constant
``pi`` and the functions ``sin cos exp sqrt``; ``^`` is a power. Compiled
formulas are lambdified to numpy and evaluate on arrays of shape ``(..., n)``.
Derivatives are taken symbolically, so formula manifolds carry exact jets.
"""

import ast
import logging
import re
from typing import Callable, List, Sequence, Tuple

import numpy as np
import sympy
from sympy import SympifyError, lambdify

from .exceptions import ExpressionError

logger = logging.getLogger(__name__)

FUNCTIONS = {
    'sin': sympy.sin,
    'cos': sympy.cos,
    'exp': sympy.exp,
    'sqrt': sympy.sqrt,
}

_TOKEN_RE = re.compile(r"(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)")
_ALLOWED_CHARS = set('0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_.+-*/^() \t\n')


def _line_col(text: str, offset: int) -> Tuple[int, int]:
    line = text.count('\n', 0, offset) + 1
    last_newline = text.rfind('\n', 0, offset)
    return line, offset - last_newline


class ExpressionParser:
    """
    Formula reader producing numpy-evaluable closures.

    Args:
        dim: number of coordinate variables ``x1 .. x{dim}``
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.symbols = sympy.symbols(f'x1:{dim + 1}')
        self.namespace = {str(symbol): symbol for symbol in self.symbols}
        self.namespace.update(FUNCTIONS)
        self.namespace['pi'] = sympy.pi

    def _fail(self, text: str, offset: int, message: str):
        line, column = _line_col(text, offset)
        raise ExpressionError(message, line=line, column=column, operation='parse_expression')

    def _check_tokens(self, text: str):
        for offset, char in enumerate(text):
            if char not in _ALLOWED_CHARS:
                self._fail(text, offset, f"invalid character '{char}'")
        for match in _TOKEN_RE.finditer(text):
            name = match.group('name')
            if name is not None and name not in self.namespace:
                self._fail(text, match.start(), f"unknown name '{name}'")

    def _check_syntax(self, text: str):
        flat = text.replace('\n', ' ').replace('\t', ' ')
        body = flat.lstrip()
        if not body:
            self._fail(text, len(text), 'unexpected end of expression')
        lead = len(flat) - len(body)
        try:
            ast.parse(body, mode='eval')
        except SyntaxError as e:
            offset = lead + min(max(e.offset or 1, 1), len(body) + 1) - 1
            self._fail(text, offset, f"syntax error: {e.msg}")

    def parse_expr(self, text: str) -> sympy.Expr:
        """
        Read a formula into a sympy expression in ``x1 .. x{dim}``.

        Raises:
            ExpressionError: citing the line and column of the offending token
        """
        self._check_tokens(text)
        self._check_syntax(text)
        try:
            expr = sympy.sympify(text.replace('\n', ' ').strip(), locals=self.namespace, convert_xor=True)
        except (SympifyError, TypeError) as e:
            raise ExpressionError(f"cannot interpret formula: {e}", line=1, column=1, operation='parse_expression')
        if not isinstance(expr, sympy.Expr):
            self._fail(text, 0, 'formula does not evaluate to a number')
        unsupported = [f for f in expr.atoms(sympy.Function) if type(f) not in (sympy.sin, sympy.cos, sympy.exp)]
        if unsupported:
            self._fail(text, 0, f"unsupported operation '{type(unsupported[0]).__name__}'")
        if expr.has(sympy.zoo, sympy.nan, sympy.oo, -sympy.oo):
            self._fail(text, 0, 'formula is not finite')
        return expr

    def lambdify(self, expr: sympy.Expr) -> Callable[[np.ndarray], np.ndarray]:
        """Numpy closure ``f(x)`` for ``x`` of shape ``(..., dim)``."""
        func = lambdify(self.symbols, expr, 'numpy')

        def evaluate(x):
            x = np.asarray(x, dtype=float)
            return func(*np.moveaxis(x, -1, 0)) + np.zeros(x.shape[:-1])

        return evaluate

    def parse(self, text: str) -> Callable[[np.ndarray], np.ndarray]:
        """Parse a formula into a callable ``f(x)`` with ``x`` of shape ``(..., dim)``."""
        return self.lambdify(self.parse_expr(text))


def _compile(parser: ExpressionParser, exprs: Sequence[sympy.Expr],
             shape: Tuple[int, ...]) -> Callable[[np.ndarray], np.ndarray]:
    """Closure evaluating ``exprs`` (row-major) into arrays of shape ``(..., *shape)``."""
    funcs = [parser.lambdify(expr) for expr in exprs]

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        values = np.stack([f(x) for f in funcs], axis=-1)
        return values.reshape(x.shape[:-1] + shape)

    return evaluate


def compile_vector(formulas: List[str], dim: int) -> Callable[[np.ndarray], np.ndarray]:
    """Compile a list of formulas into ``x -> array (..., len(formulas))``."""
    parser = ExpressionParser(dim)
    return _compile(parser, [parser.parse_expr(text) for text in formulas], (len(formulas),))


def compile_matrix(formulas: List[List[str]], dim: int) -> Callable[[np.ndarray], np.ndarray]:
    """Compile a square table of formulas into ``x -> array (..., n, n)``."""
    parser = ExpressionParser(dim)
    exprs = [parser.parse_expr(text) for row in formulas for text in row]
    return _compile(parser, exprs, (len(formulas), len(formulas)))


def compile_vector_jet(formulas: List[str], dim: int) -> Callable[[np.ndarray], np.ndarray]:
    """Exact first derivatives of a formula list, ``out[..., k, i] = d_k f_i``."""
    parser = ExpressionParser(dim)
    exprs = [parser.parse_expr(text) for text in formulas]
    derivatives = [sympy.diff(expr, symbol) for symbol in parser.symbols for expr in exprs]
    return _compile(parser, derivatives, (dim, len(formulas)))


def compile_matrix_jet(formulas: List[List[str]], dim: int) -> Callable[[np.ndarray], np.ndarray]:
    """Exact first derivatives of a formula table, ``out[..., k, i, j] = d_k f_ij``."""
    parser = ExpressionParser(dim)
    n = len(formulas)
    exprs = [parser.parse_expr(text) for row in formulas for text in row]
    derivatives = [sympy.diff(expr, symbol) for symbol in parser.symbols for expr in exprs]
    return _compile(parser, derivatives, (dim, n, n))
