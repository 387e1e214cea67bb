import numpy as np
import pytest
from hypothesis import given, strategies as st

from osclab import expr as ex


def test_parse_product_structure():
    assert ex.parse("x*y") == ex.Mul(ex.Var("x"), ex.Var("y"))


def test_constant_power_evaluates():
    assert ex.evaluate(ex.parse("2^3"), {}) == 8.0


def test_syntax_error_offset():
    with pytest.raises(ex.ParseError) as err:
        ex.parse("x*(")
    assert err.value.offset == 3


def test_unknown_function():
    with pytest.raises(ex.ParseError):
        ex.parse("tan(x)")


def test_precedence():
    assert ex.evaluate(ex.parse("2 + 3*4"), {}) == 14.0
    assert ex.evaluate(ex.parse("2*3^2"), {}) == 18.0
    # '^' binds tighter than unary minus
    assert ex.evaluate(ex.parse("-x^2"), {"x": 2.0}) == -4.0
    # unary minus binds tighter than '*'
    assert ex.parse("-x*y") == ex.Mul(ex.Neg(ex.Var("x")), ex.Var("y"))
    assert ex.evaluate(ex.parse("1 - 2 + 3"), {}) == 2.0


def test_power_chain_is_rejected():
    with pytest.raises(ex.ParseError):
        ex.parse("x^2^3")


def test_fractional_exponent_rejected():
    with pytest.raises(ex.ParseError):
        ex.parse("x^2.5")


def test_number_formats():
    assert ex.evaluate(ex.parse("1.5e-3 + .5 + 2."), {}) == pytest.approx(2.5015)


def test_diff_examples():
    assert ex.diff(ex.parse("x*y"), "x") == ex.Var("y")
    assert ex.to_string(ex.diff(ex.parse("sin(x)"), "x")) == "cos(x)"
    assert ex.diff(ex.parse("3"), "x") == ex.Const(0.0)


def test_diff_quotient_and_sqrt():
    d = ex.diff(ex.parse("1/x"), "x")
    assert ex.evaluate(d, {"x": 2.0}) == pytest.approx(-0.25)
    d = ex.diff(ex.parse("sqrt(x)"), "x")
    assert ex.evaluate(d, {"x": 4.0}) == pytest.approx(0.25)


def test_eval_examples():
    assert ex.evaluate(ex.parse("x*y"), {"x": 2.0, "y": 3.0}) == 6.0
    assert ex.evaluate(ex.parse("sqrt(x)"), {"x": 4.0}) == 2.0
    with pytest.raises(ex.DomainError):
        ex.evaluate(ex.parse("1/x"), {"x": 0.0})
    with pytest.raises(ex.DomainError):
        ex.evaluate(ex.parse("sqrt(x)"), {"x": -1.0})
    with pytest.raises(ex.UnboundVariable):
        ex.evaluate(ex.parse("x + y"), {"x": 1.0})


def test_eval_broadcasts_arrays():
    v = ex.evaluate(ex.parse("x^2 + 1"), {"x": np.array([1.0, 2.0, 3.0])})
    assert np.allclose(v, [2.0, 5.0, 10.0])


# -- random finite-difference agreement -------------------------------------


def _random_expr(rng, depth):
    roll = rng.random()
    if depth == 0 or roll < 0.25:
        if rng.random() < 0.6:
            return ex.Var("x")
        return ex.Const(round(rng.uniform(-2.0, 2.0), 3))
    if roll < 0.45:
        return ex.Add(_random_expr(rng, depth - 1), _random_expr(rng, depth - 1))
    if roll < 0.65:
        return ex.Mul(_random_expr(rng, depth - 1), _random_expr(rng, depth - 1))
    if roll < 0.75:
        # keep denominators away from zero
        return ex.Div(_random_expr(rng, depth - 1),
                      ex.Add(ex.Const(2.0), ex.Pow(ex.Var("x"), 2)))
    if roll < 0.83:
        return ex.Pow(_random_expr(rng, depth - 1), int(rng.integers(0, 4)))
    func = ("sin", "cos", "exp", "sqrt")[rng.integers(0, 4)]
    inner = _random_expr(rng, depth - 1)
    if func == "sqrt":
        inner = ex.Add(ex.Const(1.5), ex.Mul(ex.Call("sin", inner), ex.Const(1.0)))
    if func == "exp":
        inner = ex.Call("sin", inner)
    return ex.Call(func, inner)


def test_derivative_matches_central_difference():
    rng = np.random.default_rng(12345)
    checked = 0
    while checked < 100:
        e = _random_expr(rng, 3)
        a = float(rng.uniform(0.2, 1.8))
        d = ex.diff(e, "x")
        try:
            exact = ex.evaluate(d, {"x": a})
            h = 1e-6 * (1.0 + abs(a))
            fd = (ex.evaluate(e, {"x": a + h}) - ex.evaluate(e, {"x": a - h})) / (2 * h)
        except ex.DomainError:
            continue
        if not np.isfinite(exact) or not np.isfinite(fd) or abs(exact) > 1e3:
            continue
        assert abs(fd - exact) <= 1e-6 * (1.0 + abs(exact)), ex.to_string(e)
        checked += 1


# -- pretty-print round trip -------------------------------------------------

_exprs = st.deferred(
    lambda: st.one_of(
        st.floats(min_value=-5, max_value=5, allow_nan=False).map(
            lambda v: ex.Const(round(v, 4))),
        st.sampled_from(["x", "y", "z"]).map(ex.Var),
        st.tuples(_exprs, _exprs).map(lambda p: ex.Add(*p)),
        st.tuples(_exprs, _exprs).map(lambda p: ex.Mul(*p)),
        st.tuples(_exprs, _exprs).map(lambda p: ex.Div(*p)),
        st.tuples(_exprs, st.integers(0, 4)).map(lambda p: ex.Pow(*p)),
        _exprs.map(ex.Neg),
        st.tuples(st.sampled_from(ex.FUNCTIONS), _exprs).map(
            lambda p: ex.Call(*p)),
    )
)


@given(_exprs)
def test_print_parse_print_fixed_point(e):
    s1 = ex.to_string(e)
    s2 = ex.to_string(ex.parse(s1))
    assert s1 == s2
    assert ex.to_string(ex.parse(s2)) == s2


@given(_exprs)
def test_reparse_preserves_value(e):
    back = ex.parse(ex.to_string(e))
    env = {"x": 0.73, "y": -0.41, "z": 1.21}
    try:
        v1 = ex.evaluate(e, env)
    except ex.DomainError:
        return
    v2 = ex.evaluate(back, env)
    if np.isfinite(v1):
        assert v2 == pytest.approx(v1, rel=1e-12, abs=1e-12)


def test_roundtrip_fixed_point_on_scene_strings():
    for text in ["x*y", "sqrt(1 - x^2 - y^2)", "-x/sqrt(1 - x^2 - y^2)",
                 "2*x - 2*y", "x^2 - y^3", "sin(u + t)", "1 - 2 + 3",
                 "-(x + y)^2/(1 + x^2)"]:
        s1 = ex.to_string(ex.parse(text))
        assert ex.to_string(ex.parse(s1)) == s1


def test_negative_exponent_rejected():
    with pytest.raises(ex.ParseError) as err:
        ex.parse("x^-2")
    assert err.value.offset == 2


def test_number_then_identifier_is_trailing_garbage():
    with pytest.raises(ex.ParseError):
        ex.parse("2e")
