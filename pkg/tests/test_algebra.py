from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from fragmc.algebra import (
    ONE, ZERO, RationalFunction, count_ops, parse_rf, parse_valuation, rf, rf_arith, rf_eval, rf_is_constant,
    rf_simplify, rf_substitute,
)
from fragmc.errors import DenominatorVanishes, DivisionByZeroFunction, ParseError, UnboundParameter

from checks import random_valuations


def unreduced(num: str, den: str) -> RationalFunction:
    return RationalFunction.from_parts(rf(num)._num, rf(den)._num, reduce=False)


class TestArith:
    def test_complementary_probabilities(self):
        assert rf_arith("add", rf("p"), rf("1-p")) == ONE
        assert rf_arith("add", rf("p"), rf("1-p")).is_one()

    def test_cancellation(self):
        r = rf_arith("mul", rf("p/(1-q)"), rf("(1-q)/1"))
        assert r == rf("p")
        assert str(r) == "p"

    def test_common_denominator(self):
        r = rf_arith("add", rf("p/(1-q)"), rf("r/(1-q)"))
        assert r == rf("(p+r)/(1-q)")
        for v in random_valuations("pqr", 20, seed=3):
            assert rf_eval(r, v) == (v["p"] + v["r"]) / (1 - v["q"])

    def test_division_by_zero_function(self):
        with pytest.raises(DivisionByZeroFunction):
            rf_arith("div", rf("p"), rf("q-q"))

    def test_unknown_op(self):
        with pytest.raises(ValueError):
            rf_arith("pow", ONE, ONE)

    def test_sign_normalized_denominator(self):
        r = rf("p/(q-1)")
        lead = r.denominator.terms()[0][0]
        assert lead > 0
        assert r == rf("-p/(1-q)")


class TestSimplify:
    def test_factor_cancels(self):
        assert rf_simplify(unreduced("p*q-p", "q-1")) == rf("p")
        assert str(rf_simplify(unreduced("p*q-p", "q-1"))) == "p"

    def test_content_removal(self):
        assert str(rf_simplify(unreduced("2*p", "2"))) == "p"

    def test_difference_of_squares(self):
        s = rf_simplify(unreduced("p^2-q^2", "p-q"))
        assert str(s) == str(rf("p+q"))
        for v in random_valuations("pq", 20, seed=5, avoid=lambda v: v["p"] == v["q"]):
            assert rf_eval(s, v) == (v["p"] ** 2 - v["q"] ** 2) / (v["p"] - v["q"])

    def test_idempotent(self):
        a = rf_simplify(unreduced("p^2*q - q^3", "p*q + q^2"))
        assert str(rf_simplify(a)) == str(a)


class TestEval:
    def test_two_branch_time(self):
        assert rf_eval(rf("p*t1 + (1-p)*t2"), {"p": Fraction(1, 2), "t1": 2, "t2": 4}) == 3

    def test_retry_loop(self):
        assert rf_eval(rf("p/(1-q)"), {"p": Fraction(1, 4), "q": Fraction(1, 2)}) == Fraction(1, 2)

    def test_constant(self):
        assert rf_eval(ONE, {"whatever": 7}) == 1
        assert rf_eval(ZERO, {}) == 0

    def test_unbound(self):
        with pytest.raises(UnboundParameter) as e:
            rf_eval(rf("p+q"), {"p": 1})
        assert e.value.name == "q"

    def test_vanishing_denominator(self):
        with pytest.raises(DenominatorVanishes):
            rf_eval(rf("p/(1-q)"), {"p": 1, "q": 1})

    def test_decimals_are_exact(self):
        assert rf_eval(rf("0.3"), {}) == Fraction(3, 10)
        assert parse_valuation("p=0.1, q=1/3") == {"p": Fraction(1, 10), "q": Fraction(1, 3)}


class TestConstant:
    def test_values(self):
        assert rf_is_constant(rf("3/4")) == Fraction(3, 4)
        assert rf_is_constant(rf("p")) is None
        assert rf_is_constant(rf("(p-p+1)/2")) == Fraction(1, 2)


class TestCountOps:
    def test_two_branch_formula(self):
        # canonical form is p*t1 - p*t2 + t2: two products and two additive operators
        assert count_ops(rf("p*t1 + (1-p)*t2")) == 4

    def test_trivial(self):
        assert count_ops(ONE) == 0
        assert count_ops(rf("p")) == 0

    def test_powers_and_division(self):
        assert count_ops(rf("p^3")) == 2
        assert count_ops(rf("2*p")) == 1
        assert count_ops(rf("p/(1-q)")) == 2

    def test_reparse_invariant(self):
        for text in ["p*t1 + (1-p)*t2", "p/(1-q)", "(x^2*y - 3*z)/(y+1)", "1/3*p^4 - q"]:
            a = rf(text)
            assert count_ops(parse_rf(str(a))) == count_ops(a)


class TestParse:
    def test_grammar(self):
        assert rf("(p+q)^2") == rf("p^2 + 2*p*q + q^2")
        assert rf("1/2*p") == rf("p/2")
        assert rf("-(p)") == rf("0-p")

    def test_errors(self):
        for bad in ["p +", "(p", "p ^ q", "3 $ 4", ""]:
            with pytest.raises(ParseError):
                parse_rf(bad)

    def test_round_trip(self):
        for text in ["p*t1 + (1-p)*t2", "p/(1-q)", "(x^2*y - 3/7*z)/(y+1)", "-5", "0"]:
            a = rf(text)
            assert str(parse_rf(str(a))) == str(a)


def test_substitute():
    a = rf("p/(1-q)")
    assert rf_substitute(a, {"q": rf("r^2")}) == rf("p/(1-r^2)")
    assert rf_substitute(a, {"p": 1, "q": Fraction(1, 2)}) == rf(2)


# property tests

NAMES = ["p", "q", "r"]


@st.composite
def polys(draw):
    terms = draw(st.lists(st.tuples(st.integers(-4, 4), st.sampled_from(NAMES + ["1"]), st.integers(0, 2)), min_size=1, max_size=4))
    return " + ".join(f"({c})*{n}^{e}" if n != "1" else f"({c})" for c, n, e in terms)


@st.composite
def functions(draw):
    num = draw(polys())
    den = draw(polys())
    a = rf(num)
    d = rf(den)
    if d.is_zero():
        return a
    return a / d


VALUATIONS = random_valuations(NAMES, 20, seed=11)


def _evals(*fs):
    out = []
    for v in VALUATIONS:
        try:
            out.append((v, [rf_eval(f, v) for f in fs]))
        except DenominatorVanishes:
            continue
    return out


@given(functions(), functions(), functions())
def test_distributivity(a, b, c):
    left = a * (b + c)
    right = a * b + a * c
    assert left == right
    for v, (x, y) in _evals(left, right):
        assert x == y


@given(functions(), functions())
def test_eval_commutes_with_arith(a, b):
    for op, f in [("add", lambda x, y: x + y), ("sub", lambda x, y: x - y), ("mul", lambda x, y: x * y)]:
        r = rf_arith(op, a, b)
        for v, (x, y, z) in _evals(a, b, r):
            assert z == f(x, y)
    if not b.is_zero():
        r = rf_arith("div", a, b)
        for v, (x, y, z) in _evals(a, b, r):
            if y != 0:  # a/b may cancel to a function defined where b vanishes
                assert z == x / y


@given(functions())
def test_simplify_idempotent(a):
    s = rf_simplify(a)
    assert str(rf_simplify(s)) == str(s)


@given(functions())
def test_count_ops_reparse(a):
    assert count_ops(parse_rf(str(a))) == count_ops(a)
    assert parse_rf(str(a)) == a


def test_budget_skips_gcd_but_keeps_value(monkeypatch):
    monkeypatch.setenv("FRAGMC_MONOMIAL_BUDGET", "1")
    a = rf("p/(1-q)") * rf("(1-q)/(p+r)")
    assert not a.canonical
    monkeypatch.delenv("FRAGMC_MONOMIAL_BUDGET")
    assert str(rf_simplify(a)) == str(rf("p/(p+r)"))
    for v in VALUATIONS:
        assert rf_eval(a, v) == v["p"] / (v["p"] + v["r"])
