import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from fragmc.abstractor import (
    ExpressionSystem, FragmentSummary, analyze_fragment, build_abstract_model, compose, evaluate_system, fold_constants,
    fpmc, monolithic_system, prob_placeholder, reward_placeholder, substitute_placeholders,
)
from fragmc.algebra import ONE, ZERO, count_ops, rf, rf_eval
from fragmc.corpus import five_state, loop_fragment, m1, m2, random_pdtmc
from fragmc.engine import oracle_solve, pmc
from fragmc.errors import (
    BudgetExceeded, DenominatorVanishes, InvalidSummary, ParseError, UnboundParameter,
)
from fragmc.fx import PROPERTIES, fx_model
from fragmc.lang import parse_model_explicit, parse_property
from fragmc.model import Fragment, validate_pdtmc
from fragmc.sampling import sample_valuations

REACH = parse_property('P=? [ F "goal" ]')
F123 = Fragment(frozenset({1, 2, 3}), 1, frozenset({2, 3}))
F12 = Fragment(frozenset({1, 2}), 1, frozenset({2}))


def system(*defs, params=("x",)):
    return ExpressionSystem(params, [(n, rf(e)) for n, e in defs])


class TestAnalyzeFragment:
    def test_branch(self):
        s = analyze_fragment(five_state(), F123)
        assert s.exit_probs == {2: rf("a"), 3: rf("1-a")}
        assert s.exit_reward == ZERO

    def test_degenerate(self):
        s = analyze_fragment(five_state(), Fragment.single(3), "cost")
        assert s.exit_probs == {3: ONE} and s.exit_reward == rf(2)
        assert analyze_fragment(five_state(), Fragment.single(4), "cost").exit_reward == ZERO

    def test_loop_reward(self):
        s = analyze_fragment(loop_fragment(), F12, "r")
        assert s.exit_probs == {2: ONE}
        assert s.exit_reward == rf("1/(1-c) + 2")
        assert rf_eval(s.exit_reward, {"c": Fraction(1, 2)}) == 4

    def test_reward_with_branching_outputs(self):
        s = analyze_fragment(five_state(), F123, "cost")
        # one visit to 1, then c or 2 depending on the output taken
        assert s.exit_reward == rf("1 + a*c + 2*(1-a)")

    def test_errors_name_the_fragment(self, monkeypatch):
        monkeypatch.setenv("FRAGMC_MONOMIAL_BUDGET", "0")
        with pytest.raises(BudgetExceeded) as e:
            analyze_fragment(loop_fragment(), F12, "r")
        assert e.value.fragment == F12 and str(F12) in str(e.value)


class TestAbstractModel:
    def test_five_state(self):
        m = five_state()
        FS = [F123, Fragment.single(0), Fragment.single(4), Fragment.single(5)]
        summaries = {F123: analyze_fragment(m, F123)}
        a = build_abstract_model(m, FS, summaries)
        am = a.model
        assert am.n == 4 and a.state_of[1] == a.state_of[2] == a.state_of[3] == 1
        assert am.init == 1
        assert am.succ[1] == {2: rf(prob_placeholder(0, 2)), 3: rf(prob_placeholder(0, 3))}
        assert am.labels["goal"] == {2}
        assert 1 in am.aux
        validate_pdtmc(substitute_placeholders(fpmc(m, REACH, 5)))

    def test_back_edge_becomes_self_loop(self):
        m = loop_fragment()
        FS = [F12, Fragment.single(0), Fragment.single(3), Fragment.single(4)]
        summaries = {F12: analyze_fragment(m, F12, "r")}
        a = build_abstract_model(m, FS, summaries, "r")
        z = a.state_of[1]
        pi = rf(prob_placeholder(0, 2))
        assert a.model.succ[z] == {z: pi * rf("b"), a.state_of[3]: pi * rf("1-b")}
        assert a.model.rewards["r"][z] == rf(reward_placeholder(0))

    def test_missing_summary(self):
        with pytest.raises(InvalidSummary):
            build_abstract_model(five_state(), [F123, Fragment.single(0), Fragment.single(4), Fragment.single(5)], {})

    def test_incomplete_cover(self):
        with pytest.raises(InvalidSummary):
            build_abstract_model(five_state(), [Fragment.single(0)], {})


class TestCompose:
    def test_retry_loop_degenerates_to_monolithic(self):
        run = fpmc(m1(), REACH)
        assert run.system.defs == [("result", rf("p/(1-q)"))]
        assert run.system.value == pmc(m1(), REACH).value

    def test_five_state(self):
        run = fpmc(five_state(), REACH, 5)
        sys = run.system
        assert sys.defs == [("__frag0_p2", rf("a")), ("__frag0_p3", rf("1-a")), ("result", rf("__frag0_p2"))]
        assert evaluate_system(sys, {"a": Fraction(1, 3)}) == Fraction(1, 3)
        assert sys.meta["fragments"] == 1 and sys.meta["alpha"] == 5

    def test_fx_seq_r(self):
        m = fx_model("seq_r", 2)
        prop = parse_property(PROPERTIES["P1"])
        run = fpmc(m, prop, 5)
        for v in sample_valuations(m, 5, seed=0):
            assert evaluate_system(run.system, v) == oracle_solve(m, prop, v)


class TestFold:
    def test_inline(self):
        sys = fold_constants(system(("pi", "3/4"), ("result", "pi*x")))
        assert sys.defs == [("result", rf("3/4*x"))]

    def test_unchanged(self):
        sys = system(("pi", "x/2"), ("result", "pi*x"))
        assert fold_constants(sys).defs == sys.defs

    def test_chain(self):
        sys = system(("a", "1/2"), ("b", "a*a"), ("result", "b*x"))
        folded = fold_constants(sys)
        assert folded.defs == [("result", rf("x/4"))]
        for v in ({"x": Fraction(k, 7)} for k in range(1, 7)):
            assert evaluate_system(folded, v) == evaluate_system(sys, v)

    def test_constant_result_is_kept(self):
        assert fold_constants(system(("result", "1/2"))).defs == [("result", rf("1/2"))]


class TestSystem:
    def test_order_enforced(self):
        with pytest.raises(InvalidSummary):
            system(("result", "y"), ("y", "x"))
        with pytest.raises(InvalidSummary):
            system(("y", "x"))

    def test_json_round_trip(self):
        sys = fpmc(loop_fragment(), parse_property('R{"r"}=? [ F "goal" ]'), 3).system
        text = sys.to_json()
        back = ExpressionSystem.from_json(text)
        assert back.defs == sys.defs and back.to_json() == text
        assert set(sys.meta) >= {"alpha", "fragments", "ops_total", "ops_abstract", "ops_fragments"}
        assert sys.meta["ops_total"] == count_ops(sys)

    def test_malformed_json(self):
        for bad in ["{", "{}", '{"params": [], "defs": [{"name": "result"}], "result": "result"}']:
            with pytest.raises(ParseError):
                ExpressionSystem.from_json(bad)

    def test_evaluate(self):
        sys = monolithic_system(m2(), parse_property('R{"time"}=? [ F "done" ]'))
        assert evaluate_system(sys, {"p": Fraction(1, 2), "t1": 2, "t2": 4}) == 3
        with pytest.raises(UnboundParameter):
            evaluate_system(sys, {"p": 1})
        with pytest.raises(DenominatorVanishes):
            evaluate_system(system(("result", "1/(1-x)")), {"x": 1})

    def test_irrelevant_parameter(self):
        sys = fpmc(five_state(), REACH, 5).system
        assert evaluate_system(sys, {"a": Fraction(1, 5), "zz": 1}) == evaluate_system(sys, {"a": Fraction(1, 5), "zz": 2})


PROPS = ['P=? [ F "goal" ]', 'P=? [ "a" U "goal" ]', 'R{"r"}=? [ F "end" ]']


@settings(max_examples=25)
@given(st.integers(0, 100_000), st.integers(5, 35), st.sampled_from(PROPS), st.sampled_from([1, 5, 20, None]))
def test_end_to_end_soundness(seed, n, text, alpha):
    m = random_pdtmc(random.Random(seed), n, symbolic=0.3, n_params=3)
    prop = parse_property(text)
    run = fpmc(m, prop, alpha or n)
    mono = pmc(m, prop).value
    for s in run.summaries.values():
        assert sum(s.exit_probs.values(), ZERO) == ONE
    validate_pdtmc(substitute_placeholders(run))
    folded = fold_constants(run.system)
    for v in sample_valuations(m, 20, seed=seed):
        want = oracle_solve(m, prop, v)
        assert evaluate_system(run.system, v) == want
        assert rf_eval(mono, v) == want
        assert evaluate_system(folded, v) == want
