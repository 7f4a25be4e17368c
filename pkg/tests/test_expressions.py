import math

import numpy as np
import pytest

from modalkit.expressions import Expr, ExprError, parse_expression


def test_spring_term_zero_at_rest():
    e = parse_expression("0.5*k*(q2-pi/2)^2", ["q1", "q2"], {"k": 10.0})
    assert e.evaluate([0.3, math.pi / 2]) == pytest.approx(0.0, abs=1e-14)


def test_gravity_term_value_at_origin():
    # hand evaluation: -1 * 0.4 * 9.81 * (2 + 1) = -11.772
    e = parse_expression("-d*m*g*(2*cos(q1)+cos(q1+q2))", ["q1", "q2"],
                         {"d": 1.0, "m": 0.4, "g": 9.81})
    assert e.evaluate([0.0, 0.0]) == pytest.approx(-11.772, abs=1e-9)


def test_syntax_error_carries_offset():
    with pytest.raises(ExprError) as err:
        parse_expression("q1+", ["q1"])
    assert err.value.position == 3


def test_unknown_identifier_rejected():
    with pytest.raises(ExprError, match="unknown identifier"):
        parse_expression("q1 + bogus", ["q1"])


def test_function_arity_enforced():
    with pytest.raises(ExprError, match="requires one argument"):
        parse_expression("sin + 1", ["q1"])
    with pytest.raises(ExprError, match="unknown function"):
        parse_expression("sinc(q1)", ["q1"])


def test_empty_source_rejected():
    with pytest.raises(ExprError, match="empty"):
        parse_expression("   ", ["q1"])


ROUND_TRIP_SOURCES = [
    "q1",
    "1+2*q1",
    "-q1^2",
    "(-q1)^2",
    "q1-(q2-q3)",
    "q1/(q2/q3)",
    "q1^q2^2",
    "(q1^2)^3",
    "-(q1*q2)",
    "sin(cos(q1))+exp(q2)-sqrt(abs(q3))",
    "0.5*k*(q2-pi/2)^2",
    "2^-q1",
    "-d*m*g*(2*cos(q1)+cos(q1+q2))",
]


@pytest.mark.parametrize("source", ROUND_TRIP_SOURCES)
def test_unparse_round_trip(source):
    vars_ = ["q1", "q2", "q3"]
    params = {"k": 10.0, "d": 1.0, "m": 0.4, "g": 9.81}
    tree = parse_expression(source, vars_, params)
    text = tree.unparse()
    again = parse_expression(text, vars_, params)
    assert again.root == tree.root
    assert again.unparse() == text


def _random_tree_source(rng, depth=0):
    if depth > 3 or rng.random() < 0.3:
        return rng.choice(["q1", "q2", "1.5", "2", "0.25", "k"])
    kind = rng.choice(["bin", "neg", "call"])
    if kind == "bin":
        op = rng.choice(["+", "-", "*", "/", "^"])
        left = _random_tree_source(rng, depth + 1)
        right = (rng.choice(["2", "3", "0.5"]) if op == "^"
                 else _random_tree_source(rng, depth + 1))
        return f"({left}){op}({right})"
    if kind == "neg":
        return f"-({_random_tree_source(rng, depth + 1)})"
    fn = rng.choice(["sin", "cos", "exp", "sqrt"])
    return f"{fn}({_random_tree_source(rng, depth + 1)})"


def test_round_trip_random_trees():
    rng = np.random.default_rng(0)
    for _ in range(200):
        src = _random_tree_source(rng)
        tree = parse_expression(src, ["q1", "q2"], {"k": 3.0})
        again = parse_expression(tree.unparse(), ["q1", "q2"], {"k": 3.0})
        assert again.root == tree.root


def _fd(e: Expr, q, i, h=1e-6):
    qp = list(q)
    qm = list(q)
    qp[i] += h
    qm[i] -= h
    return (e.evaluate(qp) - e.evaluate(qm)) / (2 * h)


@pytest.mark.parametrize("source", [
    "sin(q1)*cos(q2)",
    "exp(q1/2) + sqrt(q2+3)",
    "q1^3 - 2*q1*q2 + q2^2",
    "1/(1+q1^2)",
    "2^q1",
    "0.5*k*(q2-pi/2)^2",
])
def test_symbolic_derivative_matches_finite_difference(source):
    e = parse_expression(source, ["q1", "q2"], {"k": 10.0})
    rng = np.random.default_rng(1)
    for _ in range(20):
        q = rng.uniform(0.1, 1.2, size=2)
        for i, var in enumerate(["q1", "q2"]):
            sym = e.diff(var).evaluate(q)
            ref = _fd(e, q, i)
            assert sym == pytest.approx(ref, rel=1e-6, abs=1e-8)


def test_derivative_round_trips_too():
    e = parse_expression("sin(q1)^2/(1+cos(q1))", ["q1"])
    d = e.diff("q1")
    again = parse_expression(d.unparse(), ["q1"])
    assert again.root == d.root


def test_unsupported_derivatives():
    e = parse_expression("abs(q1)", ["q1"])
    assert not e.differentiable
    with pytest.raises(ExprError):
        e.diff("q1")
    e = parse_expression("q1^q2", ["q1", "q2"])
    with pytest.raises(ExprError):
        e.diff("q1")


def test_evaluation_is_deterministic():
    e = parse_expression("sin(q1)+k*q1^2", ["q1"], {"k": 2.0})
    vals = {e.evaluate([0.37]) for _ in range(5)}
    assert len(vals) == 1
