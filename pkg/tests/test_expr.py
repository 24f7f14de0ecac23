import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geomap.errors import ExprDomainError, ExprSyntaxError, VariableRangeError
from geomap.expr import (
    Binary,
    Const,
    Expr,
    Pow,
    Unary,
    Var,
    compile_exprs,
    eval_jet,
    parse_expr,
    run_program,
    to_source,
)

from exprgen import fd_grad, fd_hess, random_expr


def value(src, x):
    e = parse_expr(src, len(x))
    return eval_jet(e, x).value


def test_parse_examples():
    e = parse_expr("x1^2 + sin(x2)", 2)
    assert e.dimension == 2
    assert isinstance(e.root, Binary) and e.root.op == "+"
    assert isinstance(parse_expr("1/(1+x1^2+x2^2)", 2).root, Binary)


def test_variable_out_of_range():
    with pytest.raises(VariableRangeError):
        parse_expr("x3", 2)
    with pytest.raises(VariableRangeError):
        parse_expr("x0", 2)


@pytest.mark.parametrize("src", ["x1 +", "sin x1", "(x1", "x1 ^ x2", "2 ** 3", "foo(x1)", "x1 $ 2", ""])
def test_syntax_errors(src):
    with pytest.raises(ExprSyntaxError) as info:
        parse_expr(src, 2)
    assert info.value.position >= 0


def test_syntax_error_position():
    with pytest.raises(ExprSyntaxError) as info:
        parse_expr("x1 + $", 1)
    assert info.value.position == 5


def test_unary_minus_and_power():
    assert value("-x1^2", [3.0]) == -9.0
    assert value("(-x1)^2", [3.0]) == 9.0
    assert value("x1^-2", [2.0]) == 0.25
    assert value("1e-1*x1", [10.0]) == pytest.approx(1.0)
    assert value(".5 + 2.", [0.0]) == 2.5


def test_static_zero_division_parses_and_fails_on_evaluation():
    e = parse_expr("x1/0", 1)
    with pytest.raises(ExprDomainError) as info:
        eval_jet(e, [1.0])
    assert "x1" in str(info.value)


def test_bilinear_jet(each_backend):
    j = eval_jet(parse_expr("x1*x2", 2), [3.0, 5.0])
    assert j.value == 15.0
    np.testing.assert_array_equal(j.grad, [5.0, 3.0])
    np.testing.assert_array_equal(j.hess, [[0.0, 1.0], [1.0, 0.0]])


def test_sin_at_zero(each_backend):
    j = eval_jet(parse_expr("sin(x1)", 1), [0.0])
    assert (j.value, j.grad[0], j.hess[0, 0]) == (0.0, 1.0, 0.0)


def test_rational_gradient_matches_fd(each_backend):
    e = parse_expr("1/(1+x1^2)", 1)
    f = lambda x: eval_jet(e, x).value
    g = eval_jet(e, [1.0]).grad
    fd = fd_grad(f, np.array([1.0]))
    assert abs(g[0] - fd[0]) / abs(g[0]) < 1e-8
    assert g[0] == pytest.approx(-0.5)


def test_constant_expression_has_zero_derivatives():
    j = eval_jet(parse_expr("3 + sin(2)", 2), [0.3, -0.1])
    assert not j.grad.any() and not j.hess.any()


@pytest.mark.parametrize(
    "src, x, msg",
    [
        ("ln(x1)", [-1.0], "ln"),
        ("sqrt(x1 - 2)", [1.0], "sqrt"),
        ("1/(x1 - x1)", [1.0], "division"),
        ("x1^-1", [0.0], "zero"),
    ],
)
def test_domain_errors_report_subexpression(each_backend, src, x, msg):
    with pytest.raises(ExprDomainError) as info:
        eval_jet(parse_expr(src, len(x)), x)
    assert msg in str(info.value)
    assert info.value.subexpr


def test_abs_at_zero_is_flagged():
    j = eval_jet(parse_expr("abs(x1)", 1), [0.0])
    assert j.grad[0] == 0.0
    assert j.nondifferentiable
    assert not eval_jet(parse_expr("abs(x1)", 1), [0.5]).nondifferentiable


def test_hessian_symmetric_storage():
    j = eval_jet(parse_expr("exp(x1*x2)*sin(x3)", 3), [0.3, -0.7, 1.1])
    assert j.hess_packed.shape == (6,)
    np.testing.assert_array_equal(j.hess, j.hess.T)


def test_sum_and_product_rules(rng):
    for _ in range(50):
        a, b = random_expr(rng, 2), random_expr(rng, 2)
        x = rng.uniform(-1, 1, 2)
        ja = eval_jet(parse_expr(a, 2), x)
        jb = eval_jet(parse_expr(b, 2), x)
        js = eval_jet(parse_expr(f"({a}) + ({b})", 2), x)
        jp = eval_jet(parse_expr(f"({a}) * ({b})", 2), x)
        np.testing.assert_allclose(js.grad, ja.grad + jb.grad, rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(js.hess, ja.hess + jb.hess, rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(jp.grad, ja.value * jb.grad + jb.value * ja.grad, rtol=1e-12, atol=1e-12)
        hp = (ja.value * jb.hess + jb.value * ja.hess + np.outer(ja.grad, jb.grad)
              + np.outer(jb.grad, ja.grad))
        np.testing.assert_allclose(jp.hess, hp, rtol=1e-12, atol=1e-12)


def test_random_gradients_and_hessians_against_fd(rng):
    for _ in range(200):
        n = int(rng.integers(1, 4))
        e = parse_expr(random_expr(rng, n), n)
        x = rng.uniform(-1, 1, n)
        f = lambda y: eval_jet(e, y).value
        j = eval_jet(e, x)
        scale = max(1.0, abs(j.value), np.max(np.abs(j.grad)))
        assert np.max(np.abs(j.grad - fd_grad(f, x))) / scale < 1e-6
        hscale = max(1.0, abs(j.value), np.max(np.abs(j.hess)))
        assert np.max(np.abs(j.hess - fd_hess(f, x))) / hscale < 1e-4


def test_program_shares_repeated_subtrees():
    shared = compile_exprs([parse_expr("(1+x1^2)*(1+x1^2)", 1)])
    plain = compile_exprs([parse_expr("(1+x1^2)*(2+x1^2)", 1)])
    assert len(shared.ops) < len(plain.ops)


def test_run_program_batches_outputs():
    prog = compile_exprs([parse_expr("x1", 2), parse_expr("x1*x2", 2)])
    val, grad, hess, flags = run_program(prog, [[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(val, [[1, 2], [3, 12]])
    np.testing.assert_array_equal(grad[1, 1], [4, 3])
    assert hess.shape == (2, 2, 2, 2)
    assert not flags.any()


def test_printer_is_fully_parenthesized():
    e = parse_expr("-x1^2 + 3*x2", 2)
    assert to_source(e.root) == "((-(x1)^2) + (3.0 * x2))"
    assert parse_expr(to_source(e.root), 2) == e


def test_ast_is_immutable():
    e = parse_expr("x1", 1)
    with pytest.raises(AttributeError):
        e.root.index = 2


def _ast_strategy(n):
    leaves = st.one_of(
        st.integers(1, n).map(Var),
        st.floats(-5, 5, allow_nan=False, allow_infinity=False).map(Const),
    )

    def extend(children):
        return st.one_of(
            st.tuples(st.sampled_from(["sin", "cos", "neg"]), children).map(lambda t: Unary(*t)),
            st.tuples(st.sampled_from(["+", "-", "*"]), children, children).map(lambda t: Binary(*t)),
            st.tuples(children, st.integers(0, 3)).map(lambda t: Pow(*t)),
        )

    return st.recursive(leaves, extend, max_leaves=8)


@settings(max_examples=100, derandomize=True, deadline=None)
@given(_ast_strategy(2))
def test_print_parse_roundtrip(root):
    src = to_source(root)
    again = parse_expr(src, 2)
    pts = np.random.default_rng(7).uniform(-1, 1, (100, 2))
    a = run_program(compile_exprs([Expr(root, 2)]), pts, 0)[0]
    b = run_program(compile_exprs([again]), pts, 0)[0]
    np.testing.assert_array_equal(a, b)
    # printing is idempotent after one round (negative literals come back as negations)
    assert to_source(parse_expr(to_source(again.root), 2).root) == to_source(again.root)


def test_roundtrip_random_sources(rng):
    pts = rng.uniform(-1, 1, (100, 3))
    for _ in range(100):
        e = parse_expr(random_expr(rng, 3), 3)
        e2 = parse_expr(to_source(e.root), 3)
        v1 = run_program(compile_exprs([e]), pts, 0)[0]
        v2 = run_program(compile_exprs([e2]), pts, 0)[0]
        np.testing.assert_array_equal(v1, v2)


def test_math_constants_precision():
    assert value("sin(x1)", [math.pi / 6]) == pytest.approx(0.5, abs=1e-15)
