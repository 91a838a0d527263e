import random

import pytest
from hypothesis import given, strategies as st

from fragmc.algebra import ONE, rf
from fragmc.corpus import five_state, loop_fragment, m1, m2, random_pdtmc
from fragmc.errors import BadIndex, EmptyTargetSet, InvalidFragment, NegativeReward, RowSumViolation, ZeroTransitionStored
from fragmc.model import Fragment, Pdtmc, induced_submodel, qualitative_reach, validate_pdtmc


class TestValidate:
    def test_two_state_chain(self):
        validate_pdtmc(Pdtmc.from_transitions(2, 0, {(0, 1): "p", (0, 0): "1-p", (1, 1): 1}))

    def test_row_sum_residual(self):
        m = Pdtmc.from_transitions(2, 0, {(0, 1): "p", (0, 0): "1-q", (1, 1): 1})
        with pytest.raises(RowSumViolation) as e:
            validate_pdtmc(m)
        assert e.value.state == 0
        assert e.value.residual == rf("p-q")

    def test_hand_models(self):
        for m in (m1(), m2(), five_state(), loop_fragment()):
            validate_pdtmc(m)

    def test_zero_stored(self):
        with pytest.raises(ZeroTransitionStored):
            validate_pdtmc(Pdtmc.from_transitions(2, 0, {(0, 1): 1, (0, 0): 0, (1, 1): 1}))

    def test_bad_indices(self):
        with pytest.raises(BadIndex):
            Pdtmc.from_transitions(2, 0, {(0, 2): 1})
        with pytest.raises(BadIndex):
            validate_pdtmc(Pdtmc.from_transitions(1, 3, {(0, 0): 1}))
        with pytest.raises(BadIndex):
            validate_pdtmc(Pdtmc.from_transitions(1, 0, {(0, 0): 1}, labels={"a": [4]}))

    def test_negative_constant_reward(self):
        with pytest.raises(NegativeReward):
            validate_pdtmc(Pdtmc.from_transitions(1, 0, {(0, 0): 1}, rewards={"r": {0: -1}}))

    def test_parameters_collected(self):
        m = m2()
        assert m.params == {"p", "t1", "t2"}
        assert m.transition_params == {"p"}


class TestQualitative:
    def test_chain(self):
        m = Pdtmc.from_transitions(3, 0, {(0, 1): 1, (1, 2): 1, (2, 2): 1})
        q = qualitative_reach(m, {2})
        assert (q.prob1, q.prob0, q.maybe) == ({0, 1, 2}, set(), set())

    def test_two_sinks(self):
        m = Pdtmc.from_transitions(3, 0, {(0, 1): "p", (0, 2): "1-p", (1, 1): 1, (2, 2): 1})
        q = qualitative_reach(m, {1})
        assert (q.prob0, q.prob1, q.maybe) == ({2}, {1}, {0})

    def test_retry_loop(self):
        q = qualitative_reach(m1(), {1})
        assert (q.prob0, q.prob1, q.maybe) == ({2}, {1}, {0})

    def test_empty_target(self):
        with pytest.raises(EmptyTargetSet):
            qualitative_reach(m1(), set())


class TestSubmodel:
    def test_outputs_absorbing(self):
        sub = induced_submodel(five_state(), Fragment(frozenset({1, 2, 3}), 1, frozenset({2, 3})))
        assert sub.origin == (1, 2, 3)
        assert sub.init == 0
        assert sub.succ == ({1: rf("a"), 2: rf("1-a")}, {1: ONE}, {2: ONE})
        # rewards on outputs are dropped, the input keeps its own
        assert sub.rewards["cost"] == {0: rf(1)}

    def test_degenerate(self):
        sub = induced_submodel(five_state(), Fragment.single(4))
        assert sub.n == 1 and sub.succ == ({0: ONE},)

    def test_internal_loop(self):
        sub = induced_submodel(loop_fragment(), Fragment(frozenset({1, 2}), 1, frozenset({2})))
        assert sub.succ == ({0: rf("c"), 1: rf("1-c")}, {1: ONE})

    def test_invalid(self):
        with pytest.raises(InvalidFragment):
            induced_submodel(five_state(), Fragment(frozenset({1, 2}), 1, frozenset({2})))


def test_fragment_basics():
    f = Fragment.single(3)
    assert f.degenerate and f.states == f.outputs == {3}
    assert str(Fragment(frozenset({1, 2, 3}), 1, frozenset({2, 3}))) == "({1,2,3},1,{2,3})"


@given(st.integers(0, 10_000), st.integers(2, 40))
def test_qualitative_partition(seed, n):
    m = random_pdtmc(random.Random(seed), n)
    targets = m.labels["goal"]
    q = qualitative_reach(m, targets)
    assert q.prob0 | q.prob1 | q.maybe == set(range(n))
    assert not (q.prob0 & q.prob1) and not (q.prob0 & q.maybe) and not (q.prob1 & q.maybe)
    assert targets <= q.prob1


@given(st.integers(0, 10_000), st.integers(5, 40))
def test_random_models_validate(seed, n):
    m = random_pdtmc(random.Random(seed), n)
    validate_pdtmc(m)
