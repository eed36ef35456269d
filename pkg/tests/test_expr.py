import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deltastab import benchmark
from deltastab.expr import Expression, ExpressionError, scalar_field, spatial_function, vector_field

A_SRC = "1 + (-3 - (2 - x1)*cos(pi*x2) - 2*abs(sin(t + x2)))"
B_SRC = ["(t + 2)/(t + 1)*x1*(x1 - 1)*x2", "-cos(t)*(x1 - 1/2)*x2*(x2 - 1)"]


def test_benchmark_expressions_match_module():
    x1, x2 = np.meshgrid(np.linspace(0, 1, 7), np.linspace(0, 1, 5))
    for t in (0.0, 0.37, 4.0):
        assert np.allclose(Expression(A_SRC)(t, x1, x2), benchmark._a(t, x1, x2), atol=1e-14)
        b = vector_field(B_SRC).func(t, x1, x2)
        ref = benchmark._b(t, x1, x2)
        assert np.allclose(b[0], ref[0], atol=1e-14) and np.allclose(b[1], ref[1], atol=1e-14)
    assert np.allclose(spatial_function("x1*(1 + sin(2*x2))")(x1, x2), benchmark.initial_state(x1, x2))


def test_unicode_pi_and_unary():
    e = Expression("-π + +x1")
    assert e(0, 1.0, 0.0) == pytest.approx(1 - np.pi)


def test_freeze():
    a = scalar_field(A_SRC, freeze=True)
    assert not a.time_dependent
    x1, x2 = np.array([0.3]), np.array([0.8])
    assert a.func(3.0, x1, x2) == pytest.approx(benchmark._a_frozen(0.0, x1, x2))
    assert scalar_field("x1 + 2").time_dependent is False
    assert scalar_field("t*x1").time_dependent is True
    assert vector_field(B_SRC, freeze=True).time_dependent is False


def test_constant_broadcasts():
    x = np.zeros((3, 4))
    assert Expression("2.5")(0.0, x, x).shape == (3, 4)


@pytest.mark.parametrize("src, fragment", [
    ("sin(", "column"),
    ("x1 ** 2", "Pow"),
    ("exp(x1)", "only sin, cos and abs"),
    ("y + 1", "unknown name"),
    ("sin(x1, x2)", "exactly one"),
    ("x1 if t else x2", "unsupported"),
    ("'a'", "numeric"),
    ("__import__('os')", "only sin"),
])
def test_rejected(src, fragment):
    with pytest.raises(ExpressionError, match=fragment):
        Expression(src)


def test_initial_state_without_time():
    with pytest.raises(ExpressionError):
        spatial_function("t + x1")
    with pytest.raises(ExpressionError):
        vector_field(["x1"])


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), c=st.floats(-10, 10))
def test_arithmetic_agrees_with_python(a, b, c):
    e = Expression(f"({a!r})*x1 - ({b!r})/(1 + abs(x2)) + cos({c!r}*t)")
    got = float(e(0.5, 1.5, -2.0))
    assert got == pytest.approx(a * 1.5 - b / 3.0 + np.cos(c * 0.5), rel=1e-12, abs=1e-12)
