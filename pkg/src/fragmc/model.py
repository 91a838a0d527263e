"""Parametric DTMCs, fragments and qualitative graph analyses."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .algebra import ONE, RationalFunction, rf
from .errors import BadIndex, InvalidFragment, NegativeReward, RowSumViolation, ZeroTransitionStored


class Pdtmc:
    """A parametric DTMC over states ``0..n-1``.

    ``succ[s]`` maps successor to transition function; only non-zero entries
    are stored. ``aux`` lists auxiliary states introduced by restructuring:
    they carry no labels and are transparent for property evaluation.
    ``origin`` optionally records, per state, the index it had in the model
    this one was derived from (sub-models, abstract models), and ``names``
    the source-level descriptor of each state (variable valuations).
    """

    def __init__(
        self,
        n: int,
        init: int,
        succ: Iterable[Mapping[int, RationalFunction]],
        labels: Mapping[str, Iterable[int]] | None = None,
        rewards: Mapping[str, Mapping[int, RationalFunction]] | None = None,
        params: Iterable[str] = (),
        aux: Iterable[int] = (),
        origin: Iterable[int] | None = None,
        names: Iterable[str] | None = None,
    ):
        self.n = n
        self.init = init
        self.succ: tuple[dict[int, RationalFunction], ...] = tuple(dict(sorted(row.items())) for row in succ)
        if len(self.succ) != n:
            raise BadIndex(f"expected {n} transition rows, got {len(self.succ)}")
        self.labels: dict[str, frozenset[int]] = {k: frozenset(v) for k, v in sorted((labels or {}).items())}
        self.rewards: dict[str, dict[int, RationalFunction]] = {
            k: {s: r for s, r in sorted(v.items()) if not r.is_zero()} for k, v in sorted((rewards or {}).items())
        }
        self.aux = frozenset(aux)
        self.origin = tuple(origin) if origin is not None else None
        self.names = tuple(names) if names is not None else None
        used: set[str] = set(self.transition_params)
        for struct in self.rewards.values():
            for r in struct.values():
                used |= r.variables
        self.params: frozenset[str] = frozenset(params) | used
        self._pred: tuple[frozenset[int], ...] | None = None

    @classmethod
    def from_transitions(
        cls,
        n: int,
        init: int,
        transitions: Mapping[tuple[int, int], RationalFunction | str | int],
        **kw,
    ) -> Pdtmc:
        rows: list[dict[int, RationalFunction]] = [{} for _ in range(n)]
        for (s, t), e in transitions.items():
            if not (0 <= s < n and 0 <= t < n):
                raise BadIndex(f"transition ({s},{t}) outside 0..{n - 1}")
            rows[s][t] = rf(e)
        rewards = kw.pop("rewards", None)
        if rewards:
            rewards = {k: {s: rf(e) for s, e in v.items()} for k, v in rewards.items()}
        return cls(n, init, rows, rewards=rewards, **kw)

    @property
    def transition_params(self) -> frozenset[str]:
        out: set[str] = set()
        for row in self.succ:
            for e in row.values():
                out |= e.variables
        return frozenset(out)

    @property
    def num_transitions(self) -> int:
        return sum(len(row) for row in self.succ)

    def transitions(self) -> Iterable[tuple[int, int, RationalFunction]]:
        for s, row in enumerate(self.succ):
            for t, e in row.items():
                yield s, t, e

    def successors(self, s: int) -> dict[int, RationalFunction]:
        return self.succ[s]

    def predecessors(self, s: int) -> frozenset[int]:
        if self._pred is None:
            pred: list[set[int]] = [set() for _ in range(self.n)]
            for u, row in enumerate(self.succ):
                for v in row:
                    pred[v].add(u)
            self._pred = tuple(frozenset(p) for p in pred)
        return self._pred[s]

    def prob(self, s: int, t: int) -> RationalFunction | None:
        return self.succ[s].get(t)

    def reward(self, name: str, s: int) -> RationalFunction | None:
        return self.rewards[name].get(s)

    def __repr__(self) -> str:
        return f"Pdtmc(n={self.n}, init={self.init}, transitions={self.num_transitions})"


@dataclass(frozen=True)
class Fragment:
    """State set ``states`` entered only through ``input`` and left only from ``outputs``."""

    states: frozenset[int]
    input: int
    outputs: frozenset[int]

    @classmethod
    def single(cls, s: int) -> Fragment:
        return cls(frozenset((s,)), s, frozenset((s,)))

    @property
    def degenerate(self) -> bool:
        return len(self.states) == 1

    def __str__(self) -> str:
        zs = ",".join(map(str, sorted(self.states)))
        outs = ",".join(map(str, sorted(self.outputs)))
        return f"({{{zs}}},{self.input},{{{outs}}})"


@dataclass(frozen=True)
class QualitativeSets:
    prob0: frozenset[int]
    prob1: frozenset[int]
    maybe: frozenset[int] = field(default=frozenset())


def validate_pdtmc(m: Pdtmc) -> None:
    """Raise unless indices are in range, no zero entry is stored and rows sum to 1."""
    if not 0 <= m.init < m.n:
        raise BadIndex(f"initial state {m.init} outside 0..{m.n - 1}")
    for name, states in m.labels.items():
        for s in states:
            if not 0 <= s < m.n:
                raise BadIndex(f"label {name!r} mentions state {s}")
    for name, struct in m.rewards.items():
        for s, r in struct.items():
            if not 0 <= s < m.n:
                raise BadIndex(f"reward {name!r} mentions state {s}")
            c = r.constant_value()
            if c is not None and c < 0:
                raise NegativeReward(f"reward {name!r} of state {s} is {c}")
    for s, row in enumerate(m.succ):
        total = None
        for t, e in row.items():
            if not 0 <= t < m.n:
                raise BadIndex(f"transition ({s},{t}) outside 0..{m.n - 1}")
            if e.is_zero():
                raise ZeroTransitionStored(f"transition ({s},{t}) is identically 0")
            total = e if total is None else total + e
        residual = (total if total is not None else 0) - ONE
        if not residual.is_zero():
            raise RowSumViolation(s, residual)


def backward_reach(m: Pdtmc, targets: Iterable[int], avoid: frozenset[int] = frozenset()) -> set[int]:
    """States with a path into ``targets`` whose intermediate states avoid ``avoid``."""
    seen = set(targets)
    stack = list(seen)
    while stack:
        t = stack.pop()
        for u in m.predecessors(t):
            if u not in seen and u not in avoid:
                seen.add(u)
                stack.append(u)
    return seen


def qualitative_reach(m: Pdtmc, targets: Iterable[int], blocked: Iterable[int] = ()) -> QualitativeSets:
    """Graph-level prob0/prob1 sets for reaching ``targets``.

    States in ``blocked`` are treated as absorbing failures (used for until).
    Every stored transition counts as an edge with positive probability.
    """
    from .errors import EmptyTargetSet

    targets = frozenset(targets)
    if not targets:
        raise EmptyTargetSet("no state satisfies the target formula")
    for t in targets:
        if not 0 <= t < m.n:
            raise BadIndex(f"target {t} outside 0..{m.n - 1}")
    blocked = frozenset(blocked) - targets
    can_reach = backward_reach(m, targets, avoid=blocked | targets)
    prob0 = frozenset(range(m.n)) - can_reach
    # prob1: complement of states that can reach prob0 without passing a target
    bad = backward_reach(m, prob0, avoid=targets)
    prob1 = frozenset(range(m.n)) - bad
    return QualitativeSets(prob0, prob1, frozenset(range(m.n)) - prob0 - prob1)


def induced_submodel(m: Pdtmc, f: Fragment, check: bool = True) -> Pdtmc:
    """Sub-model over ``f.states`` with outputs made absorbing.

    States are re-indexed in ascending order; ``origin`` maps back.
    Output rewards are dropped since the abstractor accounts for them.
    """
    if check:
        from .fragmenter import valid_fragment

        if not valid_fragment(m, f, ()):
            raise InvalidFragment(f"{f} is not a valid fragment")
    order = sorted(f.states)
    index = {s: i for i, s in enumerate(order)}
    rows: list[dict[int, RationalFunction]] = []
    for s in order:
        if s in f.outputs:
            rows.append({index[s]: ONE})
        else:
            rows.append({index[t]: e for t, e in m.succ[s].items()})
    labels = {k: [index[s] for s in v if s in index] for k, v in m.labels.items()}
    rewards = {
        k: {index[s]: r for s, r in v.items() if s in index and s not in f.outputs} for k, v in m.rewards.items()
    }
    return Pdtmc(
        len(order),
        index[f.input],
        rows,
        labels=labels,
        rewards=rewards,
        aux=[index[s] for s in m.aux if s in index],
        origin=order,
    )
