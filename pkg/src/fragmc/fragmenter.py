"""Fragmentation of a pDTMC into single-input fragments.

The outer loop seeds one-state fragments with the property-relevant states,
then grows a fragment from every remaining state in ascending index order.
Growth uses a work stack fed with predecessors and successors. Once a
fragment reaches ``alpha`` states, the model is restructured where possible
so that the popped state becomes an output. Candidates that fail validation
are downgraded to a one-state fragment.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Collection, Iterable

from .algebra import ONE, RationalFunction
from .errors import EmptyTargetSet, UnsupportedProperty
from .lang.props import Kind, PropertySpec, state_sets
from .model import Fragment, Pdtmc


class MutableModel:
    """Private, editable copy of a pDTMC used while fragmenting."""

    def __init__(self, m: Pdtmc):
        self.succ: list[dict[int, RationalFunction]] = [dict(row) for row in m.succ]
        self.pred: list[set[int]] = [set() for _ in range(m.n)]
        for s, row in enumerate(self.succ):
            for t in row:
                self.pred[t].add(s)
        self.init = m.init
        self.labels = {k: set(v) for k, v in m.labels.items()}
        self.rewards = {k: dict(v) for k, v in m.rewards.items()}
        self.params = set(m.params)
        self.aux = set(m.aux)
        self.origin: dict[int, int] = {}
        self.names = list(m.names) if m.names is not None else None

    @property
    def n(self) -> int:
        return len(self.succ)

    def successors(self, s: int) -> dict[int, RationalFunction]:
        return self.succ[s]

    def predecessors(self, s: int) -> set[int]:
        return self.pred[s]

    def add_state(self, creator: int) -> int:
        s = len(self.succ)
        self.succ.append({})
        self.pred.append(set())
        self.aux.add(s)
        self.origin[s] = creator
        if self.names is not None:
            self.names.append(f"aux({creator})")
        return s

    def set_edge(self, s: int, t: int, e: RationalFunction) -> None:
        if e.is_zero():
            self.remove_edge(s, t)
            return
        self.succ[s][t] = e
        self.pred[t].add(s)

    def add_to_edge(self, s: int, t: int, e: RationalFunction) -> None:
        old = self.succ[s].get(t)
        self.set_edge(s, t, e if old is None else old + e)

    def remove_edge(self, s: int, t: int) -> RationalFunction | None:
        e = self.succ[s].pop(t, None)
        self.pred[t].discard(s)
        return e

    def freeze(self) -> Pdtmc:
        return Pdtmc(
            self.n,
            self.init,
            self.succ,
            labels=self.labels,
            rewards=self.rewards,
            params=self.params,
            aux=self.aux,
            names=self.names,
        )


class WorkStack:
    """Stack without duplicates; sets are pushed in ascending order."""

    def __init__(self) -> None:
        self._items: list[int] = []
        self._members: set[int] = set()

    def push(self, states: Iterable[int], exclude: Collection[int] = ()) -> None:
        for s in sorted(states):
            if s not in self._members and s not in exclude:
                self._items.append(s)
                self._members.add(s)

    def pop(self) -> int:
        s = self._items.pop()
        self._members.discard(s)
        return s

    def __contains__(self, s: int) -> bool:
        return s in self._members

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)


@dataclass(frozen=True)
class FragmentationConfig:
    alpha: int = 20

    def __post_init__(self) -> None:
        if self.alpha < 1:
            raise ValueError("alpha must be at least 1")


@dataclass
class FragmentationResult:
    model: Pdtmc
    fragments: tuple[Fragment, ...]
    origin: dict[int, int]
    seeds: frozenset[int]
    alpha: int
    stats: dict = field(default_factory=dict)

    @property
    def multi_state(self) -> list[Fragment]:
        return [f for f in self.fragments if not f.degenerate]


# restructuring


def restructure_trans(m: MutableModel, Z: Collection[int], z: int) -> None:
    """Bypass ``z`` for its predecessors outside ``Z``.

    Each such predecessor i gets P(i,z)*P(z,o) added to its edge to every
    successor o of z, and loses its edge to z. z keeps its own edges.
    """
    if z in m.succ[z]:
        raise ValueError(f"state {z} has a self-loop; bypassing it would lose the loop mass")
    inputs = sorted(i for i in m.pred[z] if i not in Z and i != z)
    outs = sorted(m.succ[z].items())
    for i in inputs:
        p_iz = m.remove_edge(i, z)
        for o, p_zo in outs:
            m.add_to_edge(i, o, p_iz * p_zo)


def restructure_state(
    m: MutableModel, Z: Collection[int], z: int, only: Iterable[int] | None = None
) -> list[int]:
    """Route each edge from ``z`` to a state outside ``Z`` through a fresh auxiliary state.

    ``only`` restricts the rerouting to the given successors. The new states
    have no labels and zero reward. Returns them in creation order.
    """
    targets = sorted(o for o in m.succ[z] if o not in Z)
    if only is not None:
        keep = set(only)
        targets = [o for o in targets if o in keep]
    new = []
    for o in targets:
        a = m.add_state(z)
        p = m.remove_edge(z, o)
        m.set_edge(z, a, p)
        m.set_edge(a, o, ONE)
        new.append(a)
    return new


# validation


def _committed(FS: Iterable[Fragment] | Collection[int], f: Fragment) -> Collection[int]:
    items = list(FS) if not isinstance(FS, (set, frozenset)) else FS
    if isinstance(items, (set, frozenset)):
        return items
    out: set[int] = set()
    for g in items:
        if isinstance(g, Fragment):
            if g != f:
                out |= g.states
        else:
            out.add(g)
    return out


def valid_fragment(m, f: Fragment, FS: Iterable[Fragment] | Collection[int] = ()) -> bool:
    """Check that ``f`` can be summarised by exit probabilities.

    ``FS`` holds already committed fragments (or directly their states).
    Beyond a single input and non-empty outputs this requires closure of the
    non-output states, that the initial state, if inside, is the input, and
    that every state can reach an output without leaving the fragment.
    """
    Z, z0, out = f.states, f.input, f.outputs
    if z0 not in Z or not out <= Z:
        return False
    committed = _committed(FS, f)
    if any(s in committed for s in Z):
        return False
    if f.degenerate:
        return out == Z
    if m.init in Z and m.init != z0:
        return False
    for s in Z:
        if s != z0 and not m.predecessors(s) <= Z:
            return False
        succ = m.successors(s)
        if s in out:
            if all(t in Z for t in succ):
                return False
            if any(t in Z and t != z0 for t in succ):
                return False
        elif any(t not in Z for t in succ):
            return False
    # every state must be able to leave through an output
    seen = set(out)
    stack = list(out)
    while stack:
        t = stack.pop()
        for u in m.predecessors(t):
            if u in Z and u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == len(Z)


# the algorithm


def seed_states(m: Pdtmc, prop: PropertySpec) -> frozenset[int]:
    """States kept as one-state fragments so the property can be read off the abstract model.

    For an until these are the states that decide it: those violating the
    left formula or satisfying the target.
    """
    left, target = state_sets(m, prop)
    if not target:
        raise EmptyTargetSet("no state satisfies the target formula")
    if prop.kind is Kind.UNTIL:
        return frozenset(range(m.n)) - left | target
    if prop.kind in (Kind.REACH, Kind.REWARD):
        return target
    raise UnsupportedProperty(f"unsupported property kind {prop.kind}")


class Fragmenter:
    """State of one fragmentation run; see :func:`fragmentation`."""

    def __init__(self, m: Pdtmc, prop: PropertySpec, alpha: int):
        self.m = MutableModel(m)
        self.prop = prop
        self.alpha = alpha
        self.reward = prop.reward if prop.kind is Kind.REWARD else None
        self.FS: list[Fragment] = []
        self.V: set[int] = set()
        self.owner: dict[int, Fragment] = {}
        self.stats = {"restructure_trans": 0, "restructure_state": 0, "aux_states": 0, "downgraded": 0}

    def commit(self, f: Fragment) -> None:
        self.FS.append(f)
        self.V |= f.states
        if not f.degenerate:
            for s in f.states:
                self.owner[s] = f

    def traverse(self, T: WorkStack, Z: set[int], z: int, input_state: bool) -> bool:
        """Push the neighbourhood of ``z``; False when ``z`` became a one-state fragment."""
        m = self.m
        if not input_state:
            inputs = [i for i in m.pred[z] if i not in Z and i != z]
            if any(i in self.V for i in inputs):
                self.commit(Fragment.single(z))
                return False
            T.push(inputs, Z)
        outs = [o for o in m.succ[z] if o not in Z and o != z]
        in_v = [o for o in outs if o in self.V]
        if len(in_v) < len(outs):
            T.push((o for o in outs if o not in self.V), Z)
            if in_v:
                new = restructure_state(m, Z, z, only=in_v)
                self.stats["restructure_state"] += 1
                self.stats["aux_states"] += len(new)
                T.push(new, Z)
        return True

    def _bypass_is_safe(self, z: int, Z: set[int]) -> bool:
        m = self.m
        succ = m.succ[z]
        # auxiliary states keep exactly one edge in and one edge out
        if z in m.aux or any(o in m.aux for o in succ) or any(i in m.aux for i in m.pred[z] if i not in Z):
            return False
        # a committed fragment must not gain an edge from its own output back inside
        for i in m.pred[z]:
            f = self.owner.get(i)
            if f is not None and any(o in f.states for o in succ):
                return False
        return True

    def terminate(self, T: WorkStack, Z: set[int], Zout: set[int], z: int) -> bool:
        m = self.m
        outside_pred = any(i not in Z for i in m.pred[z])
        succ_inside = any(o in Z for o in m.succ[z])
        zero_reward = self.reward is None or m.rewards.get(self.reward, {}).get(z) is None
        if (
            outside_pred
            and not succ_inside
            and zero_reward
            and z not in m.succ[z]
            and self._bypass_is_safe(z, Z)
        ):
            restructure_trans(m, Z, z)
            self.stats["restructure_trans"] += 1
            Zout.add(z)
            return True
        if not outside_pred and succ_inside:
            new = restructure_state(m, Z, z)
            self.stats["restructure_state"] += 1
            self.stats["aux_states"] += len(new)
            Z.update(new)
            Zout.update(new)
            return True
        return self.traverse(T, Z, z, False)

    def grow(self, z0: int) -> Fragment:
        m = self.m
        Z = {z0}
        Zout: set[int] = set()
        T = WorkStack()
        self.traverse(T, Z, z0, True)
        while T:
            z = T.pop()
            if z in self.V or z in Z:
                continue
            if m.pred[z] <= Z and not any(o in Z for o in m.succ[z]) and z not in m.succ[z]:
                Zout.add(z)
                Z.add(z)
            elif len(Z) < self.alpha:
                if self.traverse(T, Z, z, False):
                    Z.add(z)
            elif self.terminate(T, Z, Zout, z):
                Z.add(z)
        candidate = Fragment(frozenset(Z), z0, frozenset(Zout))
        if len(Z) > 1 and Zout and valid_fragment(m, candidate, self.V):
            return candidate
        if len(Z) > 1:
            self.stats["downgraded"] += 1
        return Fragment.single(z0)

    def run(self, seeds: Iterable[int]) -> list[Fragment]:
        for s in sorted(seeds):
            self.commit(Fragment.single(s))
        z0 = 0
        while z0 < self.m.n:
            if z0 not in self.V:
                self.commit(self.grow(z0))
            z0 += 1
        return self.FS


def fragmentation(m: Pdtmc, prop: PropertySpec, cfg: FragmentationConfig | int = FragmentationConfig()) -> FragmentationResult:
    """Partition ``m`` (restructured as needed) into valid fragments for ``prop``."""
    alpha = cfg.alpha if isinstance(cfg, FragmentationConfig) else int(cfg)
    if alpha < 1:
        raise ValueError("alpha must be at least 1")
    start = time.perf_counter()
    seeds = seed_states(m, prop)
    run = Fragmenter(m, prop, alpha)
    run.run(seeds)
    restructured = run.m.freeze()
    fragments = _final_check(restructured, run.FS, run.stats)
    run.stats["seconds"] = time.perf_counter() - start
    return FragmentationResult(restructured, tuple(fragments), dict(run.m.origin), seeds, alpha, run.stats)


def _final_check(m: Pdtmc, FS: list[Fragment], stats: dict) -> list[Fragment]:
    """Re-validate every fragment against the final model.

    Restructuring after a fragment was committed is guarded so that it never
    breaks it; should that fail, the fragment is split into one-state
    fragments rather than returned invalid.
    """
    out = []
    stats["split"] = 0
    for f in FS:
        if f.degenerate or valid_fragment(m, f, ()):
            out.append(f)
        else:
            stats["split"] += 1
            out.extend(Fragment.single(s) for s in sorted(f.states))
    return out
