"""Fragment summaries, the abstract model and the resulting expression system.

Each multi-state fragment is analysed on its own. The model is then
collapsed to one state per fragment, whose exit probabilities and reward are
placeholder parameters. The abstract model is analysed, and the placeholder
definitions plus the abstract result form an ordered expression system.
"""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .algebra import ONE, ZERO, RationalFunction, Valuation, count_ops, parse_rf, rf_eval, rf_is_constant, rf_substitute
from .engine import pmc, pmc_reach_reward, pmc_reachability
from .errors import FragmcError, InvalidSummary, MissingTargetState, ParseError
from .fragmenter import FragmentationConfig, FragmentationResult, fragmentation
from .lang.explicit import dumps_compact
from .lang.props import Kind, PropertySpec, state_sets
from .model import Fragment, Pdtmc, induced_submodel

RESULT_NAME = "result"


def prob_placeholder(k: int, z: int) -> str:
    return f"__frag{k}_p{z}"


def reward_placeholder(k: int) -> str:
    return f"__frag{k}_rwd"


@dataclass(frozen=True)
class FragmentSummary:
    fragment: Fragment
    exit_probs: dict[int, RationalFunction]
    exit_reward: RationalFunction = ZERO
    introduced_params: tuple[str, ...] = ()
    seconds: float = 0.0


@dataclass
class ExpressionSystem:
    """Ordered named definitions; the last one is the analysed property."""

    params: tuple[str, ...]
    defs: list[tuple[str, RationalFunction]]
    result: str = RESULT_NAME
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.defs or self.defs[-1][0] != self.result:
            raise InvalidSummary("the result must be the last definition")
        known = set(self.params)
        for name, e in self.defs:
            missing = e.variables - known
            if missing:
                raise InvalidSummary(f"definition {name} refers to undefined names {sorted(missing)}")
            known.add(name)

    @property
    def value(self) -> RationalFunction:
        return self.defs[-1][1]

    def op_counts(self) -> dict[str, int]:
        return {name: count_ops(e) for name, e in self.defs}

    def refresh_meta(self) -> None:
        ops = self.op_counts()
        self.meta["ops_abstract"] = ops[self.result]
        self.meta["ops_fragments"] = sum(v for k, v in ops.items() if k != self.result)
        self.meta["ops_total"] = sum(ops.values())

    def to_json(self) -> str:
        doc = {
            "params": list(self.params),
            "defs": [{"name": n, "expr": str(e)} for n, e in self.defs],
            "result": self.result,
            "meta": self.meta,
        }
        return dumps_compact(doc)

    @classmethod
    def from_json(cls, text: str) -> ExpressionSystem:
        try:
            doc = json.loads(text)
            params = tuple(doc["params"])
            defs = [(d["name"], parse_rf(d["expr"])) for d in doc["defs"]]
            result = doc["result"]
            meta = doc.get("meta", {})
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(getattr(exc, "lineno", None), f"malformed expression system: {exc}") from exc
        try:
            return cls(params, defs, result, meta)
        except InvalidSummary as exc:
            raise ParseError(None, str(exc)) from exc


@dataclass
class AbstractModel:
    model: Pdtmc
    state_of: dict[int, int]  # concrete state to abstract state
    fragment_of: dict[int, Fragment]  # abstract state to fragment
    placeholders: dict[str, tuple[int, int | None]]  # name to (fragment number, output or None for reward)


# step 1


def analyze_fragment(m: Pdtmc, f: Fragment, reward: str | None = None) -> FragmentSummary:
    """Exit probabilities of ``f`` and, for reward analyses, the reward of one pass through it."""
    start = time.perf_counter()
    if f.degenerate:
        (z,) = f.states
        r = m.reward(reward, z) if reward is not None else None
        return FragmentSummary(f, {z: ONE}, r if r is not None else ZERO, (), time.perf_counter() - start)
    try:
        sub = induced_submodel(m, f)
        index = {s: i for i, s in enumerate(sub.origin)}
        probs = {z: pmc_reachability(sub, {index[z]}).value for z in sorted(f.outputs)}
        exit_reward = ZERO
        if reward is not None:
            if reward not in sub.rewards:
                sub_reward = ZERO
            else:
                sub_reward = pmc_reach_reward(sub, reward, {index[z] for z in f.outputs}).value
            exit_reward = sub_reward
            for z, p in probs.items():
                r = m.reward(reward, z)
                if r is not None:
                    exit_reward = exit_reward + p * r
    except FragmcError as exc:
        exc.fragment = f
        exc.args = (f"fragment {f}: {exc}",)
        raise
    return FragmentSummary(f, probs, exit_reward, (), time.perf_counter() - start)


# step 2


def _ordered(FS: Iterable[Fragment]) -> list[Fragment]:
    return sorted(FS, key=lambda f: f.input)


def build_abstract_model(
    m: Pdtmc, FS: Iterable[Fragment], summaries: Mapping[Fragment, FragmentSummary], reward: str | None = None
) -> AbstractModel:
    """Collapse every multi-state fragment of ``m`` to a single state.

    Abstract states follow the order of their representative concrete state
    (the input of a fragment). Collapsed states are marked auxiliary: they
    carry no labels and are transparent to the property.
    """
    frags = _ordered(FS)
    state_of: dict[int, int] = {}
    fragment_of: dict[int, Fragment] = {}
    for a, f in enumerate(frags):
        fragment_of[a] = f
        for s in f.states:
            if s in state_of:
                raise InvalidSummary(f"state {s} belongs to two fragments")
            state_of[s] = a
    if len(state_of) != m.n:
        raise InvalidSummary("fragments do not cover the model")

    rows: list[dict[int, RationalFunction]] = [{} for _ in frags]
    rewards: dict[int, RationalFunction] = {}
    placeholders: dict[str, tuple[int, int | None]] = {}
    aux: list[int] = []
    k = 0

    def target(src: Fragment, t: int) -> int:
        b = state_of[t]
        g = fragment_of[b]
        if t != g.input:
            raise InvalidSummary(f"edge from {src} enters {g} at {t}, not at its input")
        return b

    def add(row: dict, b: int, e: RationalFunction) -> None:
        row[b] = row[b] + e if b in row else e

    for a, f in enumerate(frags):
        if f.degenerate:
            (s,) = f.states
            for t, p in m.succ[s].items():
                add(rows[a], target(f, t), p)
            if s in m.aux:
                aux.append(a)
            if reward is not None and m.reward(reward, s) is not None:
                rewards[a] = m.reward(reward, s)
            continue
        summary = summaries.get(f)
        if summary is None or set(summary.exit_probs) != set(f.outputs):
            raise InvalidSummary(f"missing or incomplete summary for fragment {f}")
        aux.append(a)
        for z in sorted(f.outputs):
            pi = RationalFunction.var(prob_placeholder(k, z))
            placeholders[prob_placeholder(k, z)] = (k, z)
            for t, p in m.succ[z].items():
                if t in f.states and t != f.input:
                    raise InvalidSummary(f"output {z} of {f} re-enters the fragment at {t}")
                add(rows[a], a if t == f.input else target(f, t), pi * p)
        if reward is not None:
            placeholders[reward_placeholder(k)] = (k, None)
            rewards[a] = RationalFunction.var(reward_placeholder(k))
        k += 1

    labels = {name: [state_of[s] for s in states if fragment_of[state_of[s]].degenerate] for name, states in m.labels.items()}
    abstract = Pdtmc(
        len(frags),
        state_of[m.init],
        rows,
        labels=labels,
        rewards={reward: rewards} if reward is not None else None,
        aux=aux,
        origin=[f.input for f in frags],
    )
    return AbstractModel(abstract, state_of, fragment_of, placeholders)


# steps 3 and 4


def compose(
    m: Pdtmc,
    prop: PropertySpec,
    FS: Iterable[Fragment],
    summaries: Mapping[Fragment, FragmentSummary],
    abstract: AbstractModel,
    meta: dict | None = None,
) -> ExpressionSystem:
    """Analyse the abstract model and join it with the fragment formulae."""
    left, target = state_sets(m, prop)
    a_left, a_target = state_sets(abstract.model, prop)
    for s in target:
        if not abstract.fragment_of[abstract.state_of[s]].degenerate:
            raise MissingTargetState(f"target state {s} was absorbed into a fragment")
    if {abstract.state_of[s] for s in target} != set(a_target):
        raise MissingTargetState("target states changed under abstraction")
    result = pmc(_fold_into_abstract(abstract, FS, summaries), prop).value
    by_number = {}
    for name, (k, z) in abstract.placeholders.items():
        by_number.setdefault(k, []).append((name, z))
    multi = [f for f in _ordered(FS) if not f.degenerate]
    defs: list[tuple[str, RationalFunction]] = []
    for k, f in enumerate(multi):
        s = summaries[f]
        for name, z in sorted(by_number.get(k, []), key=lambda nz: (nz[1] is None, nz[1] or 0)):
            defs.append((name, s.exit_probs[z] if z is not None else s.exit_reward))
    defs.append((RESULT_NAME, result))
    info = dict(meta or {})
    info.setdefault("fragments", len(multi))
    system = ExpressionSystem(tuple(sorted(m.params)), defs, RESULT_NAME, info)
    return fold_constants(system)


def _fold_into_abstract(
    abstract: AbstractModel, FS: Iterable[Fragment], summaries: Mapping[Fragment, FragmentSummary]
) -> Pdtmc:
    # constant-valued placeholders are substituted before the abstract analysis;
    # fold_constants would inline them afterwards anyway, and this keeps the
    # abstract functions small
    multi = [f for f in _ordered(FS) if not f.degenerate]
    consts = {}
    for name, (k, z) in abstract.placeholders.items():
        s = summaries[multi[k]]
        c = rf_is_constant(s.exit_probs[z] if z is not None else s.exit_reward)
        if c is not None:
            consts[name] = c
    a = abstract.model
    if not consts:
        return a
    rows = [{t: rf_substitute(e, consts) for t, e in row.items()} for row in a.succ]
    rewards = {k: {s: rf_substitute(e, consts) for s, e in v.items()} for k, v in a.rewards.items()}
    return Pdtmc(a.n, a.init, rows, labels=a.labels, rewards=rewards, aux=a.aux, origin=a.origin)


def fold_constants(sys: ExpressionSystem) -> ExpressionSystem:
    """Inline constant-valued definitions into later ones and drop them.

    Definitions only refer to earlier names, so one forward pass reaches the
    fixpoint: a definition that becomes constant after substitution is
    folded in turn.
    """
    consts: dict[str, Fraction] = {}
    defs = []
    for name, e in sys.defs:
        used = {k: v for k, v in consts.items() if k in e.variables}
        if used:
            e = rf_substitute(e, used)
        c = rf_is_constant(e)
        if c is not None and name != sys.result:
            consts[name] = c
        else:
            defs.append((name, e))
    out = ExpressionSystem(sys.params, defs, sys.result, dict(sys.meta))
    out.refresh_meta()
    return out


def evaluate_system(sys: ExpressionSystem, v: Valuation) -> Fraction:
    env: dict[str, Fraction] = {k: Fraction(x) for k, x in v.items()}
    value = Fraction(0)
    for name, e in sys.defs:
        value = rf_eval(e, env)
        env[name] = value
    return value


def monolithic_system(m: Pdtmc, prop: PropertySpec) -> ExpressionSystem:
    """A single-definition system holding the monolithic engine result."""
    value = pmc(m, prop).value
    sys = ExpressionSystem(tuple(sorted(m.params)), [(RESULT_NAME, value)], RESULT_NAME, {"fragments": 0})
    sys.refresh_meta()
    return sys


# the whole pipeline


@contextmanager
def _phase(name: str):
    """Tag any error escaping the block with the pipeline phase it came from."""
    try:
        yield
    except FragmcError as exc:
        if getattr(exc, "phase", None) is None:
            exc.phase = name
        raise


@dataclass
class FpmcRun:
    system: ExpressionSystem
    fragmentation: FragmentationResult
    abstract: AbstractModel
    summaries: dict[Fragment, FragmentSummary]
    times: dict[str, float]


def fpmc(m: Pdtmc, prop: PropertySpec, alpha: int | FragmentationConfig = 20) -> FpmcRun:
    """Fragment, analyse each fragment, then analyse the abstract model."""
    cfg = alpha if isinstance(alpha, FragmentationConfig) else FragmentationConfig(alpha)
    reward = prop.reward if prop.kind is Kind.REWARD else None
    t0 = time.perf_counter()
    with _phase("fragmentation"):
        frag = fragmentation(m, prop, cfg)
    t1 = time.perf_counter()
    with _phase("fragment analysis"):
        summaries = {f: analyze_fragment(frag.model, f, reward) for f in frag.fragments if not f.degenerate}
    t2 = time.perf_counter()
    with _phase("abstract analysis"):
        abstract = build_abstract_model(frag.model, frag.fragments, summaries, reward)
        meta = {"alpha": cfg.alpha}
        system = compose(frag.model, prop, frag.fragments, summaries, abstract, meta)
    t3 = time.perf_counter()
    times = {"fragmentation": t1 - t0, "fragments": t2 - t1, "abstract": t3 - t2}
    return FpmcRun(system, frag, abstract, summaries, times)


def substitute_placeholders(run: FpmcRun) -> Pdtmc:
    """The abstract model with every placeholder replaced by its fragment formula."""
    mapping: dict[str, RationalFunction] = {}
    frags = [f for f in _ordered(run.fragmentation.fragments) if not f.degenerate]
    for name, (k, z) in run.abstract.placeholders.items():
        s = run.summaries[frags[k]]
        mapping[name] = s.exit_probs[z] if z is not None else s.exit_reward
    a = run.abstract.model
    rows = [{t: rf_substitute(e, mapping) for t, e in row.items()} for row in a.succ]
    rewards = {k: {s: rf_substitute(e, mapping) for s, e in v.items()} for k, v in a.rewards.items()}
    return Pdtmc(a.n, a.init, rows, labels=a.labels, rewards=rewards, aux=a.aux, origin=a.origin)


def defined_names(sys: ExpressionSystem) -> Sequence[str]:
    return [n for n, _ in sys.defs]
