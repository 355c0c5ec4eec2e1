import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orliczlab.errors import ConfigurationError
from orliczlab.expr import compile_expression

PTS1 = np.array([[-1.5], [-0.25], [0.0], [2.0]])
PTS2 = np.array([[-1.0, 2.0], [0.5, -0.5], [3.0, 0.0]])


def test_arithmetic_and_functions():
    x = PTS1[:, 0]
    assert np.allclose(compile_expression("1 + 2*x - x**2/4", 1)(PTS1), 1 + 2 * x - x ** 2 / 4)
    assert np.allclose(compile_expression("abs(x)", 1)(PTS1), np.abs(x))
    assert np.allclose(compile_expression("min(x, 0.5, 1)", 1)(PTS1), np.minimum(x, 0.5))
    assert np.allclose(compile_expression("max(-x, x)", 1)(PTS1), np.abs(x))
    assert np.allclose(compile_expression("-(+x)", 1)(PTS1), -x)


def test_two_dimensional_names():
    X, Y = PTS2.T
    assert np.allclose(compile_expression("x*y + y", 2)(PTS2), X * Y + Y)


def test_constant_broadcasts():
    out = compile_expression("3", 1)(PTS1)
    assert out.shape == (4,) and np.all(out == 3.0)


def test_step_expression_from_docs():
    out = compile_expression("(1 + x/abs(x))/2", 1)(np.array([[-2.0], [3.0]]))
    assert out.tolist() == [0.0, 1.0]


@pytest.mark.parametrize("text", [
    "__import__('os')", "x.real", "x[0]", "lambda: 1", "y", "open('f')", "sin(x)",
    "abs(x, 1)", "min(x)", "abs(x=1)", "'a'", "True", "x if x else 1", "x < 1", "1 +",
])
def test_rejected_constructs(text):
    with pytest.raises(ConfigurationError):
        compile_expression(text, 1)


@given(a=st.floats(-10, 10), b=st.floats(-10, 10))
def test_linear_expressions_match_numpy(a, b):
    f = compile_expression(f"({a!r})*x + ({b!r})", 1)
    assert np.allclose(f(PTS1), a * PTS1[:, 0] + b, rtol=1e-14, atol=1e-14)
