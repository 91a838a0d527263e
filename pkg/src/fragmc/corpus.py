"""Small hand-written models and a random pDTMC generator for testing."""

from __future__ import annotations

import random

from .algebra import ONE, RationalFunction, rf
from .model import Pdtmc

M1_SOURCE = """\
dtmc

const double p;
const double q;

module m1
  s : [0..2] init 0;
  [] s=0 -> q : (s'=0) + p : (s'=1) + (1-p-q) : (s'=2);
  [] s=1 -> 1 : (s'=1);
  [] s=2 -> 1 : (s'=2);
endmodule

rewards "steps"
  s=0 : 1;
endrewards

label "goal" = s=1;
label "fail" = s=2;
"""


def m1() -> Pdtmc:
    """Retry loop: stay with q, succeed with p, fail otherwise."""
    return Pdtmc.from_transitions(
        3,
        0,
        {(0, 0): "q", (0, 1): "p", (0, 2): "1-p-q", (1, 1): 1, (2, 2): 1},
        labels={"goal": [1], "fail": [2]},
        rewards={"steps": {0: 1}},
    )


def m2() -> Pdtmc:
    """Two alternative services with times t1 and t2."""
    return Pdtmc.from_transitions(
        4,
        0,
        {(0, 1): "p", (0, 2): "1-p", (1, 3): 1, (2, 3): 1, (3, 3): 1},
        labels={"done": [3]},
        rewards={"time": {1: "t1", 2: "t2"}},
    )


def five_state() -> Pdtmc:
    """Fragment example: input 1 branching to outputs 2 and 3.

    Index 0 is an unreachable absorbing state so that the fragment keeps the
    indices 1..5.
    """
    return Pdtmc.from_transitions(
        6,
        1,
        {(0, 0): 1, (1, 2): "a", (1, 3): "1-a", (2, 4): 1, (3, 5): 1, (4, 4): 1, (5, 5): 1},
        labels={"goal": [4], "end": [4, 5]},
        rewards={"cost": {1: 1, 2: "c", 3: 2}},
    )


def seven_state() -> Pdtmc:
    """A fragment grown from 0 is broken by an edge 2 -> 1 from a state committed meanwhile."""
    return Pdtmc.from_transitions(
        7,
        0,
        {(0, 1): 1, (1, 3): 1, (2, 1): 1, (3, 4): "p", (3, 6): "1-p", (4, 5): 1, (5, 2): 1, (6, 6): 1},
        labels={"goal": [5], "fail": [6]},
    )


def loop_fragment() -> Pdtmc:
    """Output 2 loops back to input 1 with probability b."""
    return Pdtmc.from_transitions(
        5,
        0,
        {(0, 1): 1, (1, 1): "c", (1, 2): "1-c", (2, 1): "b", (2, 3): "1-b", (3, 4): 1, (4, 4): 1},
        labels={"goal": [4]},
        rewards={"r": {1: 1, 2: 2, 3: "d"}},
    )


def hand_models() -> dict[str, Pdtmc]:
    return {"m1": m1(), "m2": m2(), "five": five_state(), "seven": seven_state(), "loop": loop_fragment()}


def random_pdtmc(
    rng: random.Random,
    n: int,
    max_out: int = 4,
    n_params: int = 4,
    symbolic: float = 0.5,
    rewards: bool = True,
) -> Pdtmc:
    """Random sparse pDTMC that every parameter point in (0,1) makes admissible.

    Rows use a stick-breaking form x1, (1-x1)*x2, ..., prod(1-xi) where each
    x is a parameter or a constant in (0,1). Every transient state has an
    edge to a higher index, so the absorbing tail (labelled "end") is
    reached almost surely. Labels: "goal" on the last state, possibly on
    other tail states (never the first when there are two or more) and on a
    few transient states, "a" on most states.
    """
    if n < 2:
        raise ValueError("need at least two states")
    names = [f"x{i}" for i in range(n_params)]
    n_abs = max(min(2, n - 1), min(n // 5, 3))
    absorbing = list(range(n - n_abs, n))
    succ: list[dict[int, RationalFunction]] = []

    def factor() -> RationalFunction:
        if names and rng.random() < symbolic:
            return RationalFunction.var(rng.choice(names))
        d = rng.randint(2, 9)
        return rf(f"{rng.randint(1, d - 1)}/{d}")

    for s in range(n):
        if s in absorbing:
            succ.append({s: ONE})
            continue
        targets = {rng.randint(s + 1, n - 1)}
        for _ in range(rng.randint(0, max_out - 1)):
            targets.add(rng.randrange(n))
        targets = sorted(targets)
        rng.shuffle(targets)
        row: dict[int, RationalFunction] = {}
        rest = ONE
        for t in targets[:-1]:
            x = factor()
            row[t] = rest * x
            rest = rest * (ONE - x)
        row[targets[-1]] = rest
        succ.append(row)
    # the first sink never satisfies goal, so reaching goal is not trivially sure
    goal = [s for s in absorbing if s == n - 1 or (s != absorbing[0] and rng.random() < 0.5)]
    goal += [s for s in range(n - n_abs) if rng.random() < 0.1]
    labels = {
        "goal": sorted(goal),
        "end": absorbing,
        "a": sorted(s for s in range(n) if rng.random() < 0.8),
    }
    rew = {}
    if rewards:
        struct = {}
        for s in range(n - n_abs):
            u = rng.random()
            if u < 0.3:
                struct[s] = RationalFunction.var(rng.choice(names)) if names and u < 0.1 else rf(rng.randint(1, 5))
        rew["r"] = struct
    return Pdtmc(n, 0, succ, labels=labels, rewards=rew, params=names)
