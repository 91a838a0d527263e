"""Parametric model checking by state elimination, and an exact numeric oracle."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import flint

from .algebra import ONE, ZERO, RationalFunction, Valuation, rf_eval, term_limit
from .errors import (
    AlgebraError,
    BudgetExceeded,
    EmptyTargetSet,
    InadmissibleValuation,
    InfiniteReward,
    UnknownRewardStructure,
)
from .lang.props import Kind, PropertySpec, state_sets
from .model import Pdtmc, qualitative_reach

REORDER_EVERY = 32


@dataclass
class Stats:
    eliminations: int = 0
    peak_terms: int = 0
    seconds: float = 0.0

    def merge(self, other: Stats) -> None:
        self.eliminations += other.eliminations
        self.peak_terms = max(self.peak_terms, other.peak_terms)
        self.seconds += other.seconds


@dataclass(frozen=True)
class PmcResult:
    value: RationalFunction
    prop: PropertySpec | None = None
    stats: Stats = field(default_factory=Stats)


def _reachable(m: Pdtmc, start: int, region: frozenset[int]) -> list[int]:
    seen = {start}
    stack = [start]
    while stack:
        s = stack.pop()
        for t in m.succ[s]:
            if t in region and t not in seen:
                seen.add(t)
                stack.append(t)
    return sorted(seen)


def elimination_order(out: dict[int, dict], inn: dict[int, set], keep: int) -> list[int]:
    """Cheapest-first order by in-degree times out-degree (self-loops excluded)."""

    def cost(s: int) -> tuple[int, int]:
        deg_out = len(out[s]) - (s in out[s])
        return len(inn[s]) * deg_out, s

    return sorted((s for s in out if s != keep), key=cost)


class _Eliminator:
    """Linear system x = b + P x over a region, solved by removing states one at a time."""

    def __init__(self, out: dict[int, dict[int, RationalFunction]], b: dict[int, RationalFunction]):
        self.out = out
        self.b = b
        self.inn: dict[int, set[int]] = {s: set() for s in out}
        for s, row in out.items():
            for t in row:
                if t != s:
                    self.inn[t].add(s)
        self.stats = Stats()
        self.limit = term_limit()

    def _check(self, e: RationalFunction) -> RationalFunction:
        size = e.size()
        if size > self.stats.peak_terms:
            self.stats.peak_terms = size
            if size > self.limit:
                raise BudgetExceeded(f"intermediate function with {size} terms exceeds the limit of {self.limit}")
        return e

    def eliminate(self, s: int) -> None:
        out, inn, b = self.out, self.inn, self.b
        row = out.pop(s)
        loop = row.pop(s, None)
        bs = b.pop(s)
        if loop is not None:
            scale = self._check((ONE - loop).inverse())
            row = {v: self._check(p * scale) for v, p in row.items()}
            bs = self._check(bs * scale)
        preds = inn.pop(s)
        for v in row:
            inn[v].discard(s)
        for u in sorted(preds):
            urow = out[u]
            a = urow.pop(s)
            for v, pv in row.items():
                term = self._check(a * pv)
                if v in urow:
                    new = self._check(urow[v] + term)
                    if new.is_zero():
                        del urow[v]
                        if v != u:
                            inn[v].discard(u)
                    else:
                        urow[v] = new
                else:
                    urow[v] = term
                    if v != u:
                        inn[v].add(u)
            if not bs.is_zero():
                b[u] = self._check(b[u] + a * bs)
        self.stats.eliminations += 1

    def solve(self, keep: int, order: Sequence[int] | None = None) -> RationalFunction:
        if order is not None:
            for s in order:
                if s != keep and s in self.out:
                    self.eliminate(s)
        while len(self.out) > 1:
            batch = elimination_order(self.out, self.inn, keep)[:REORDER_EVERY]
            for s in batch:
                self.eliminate(s)
        loop = self.out[keep].get(keep)
        value = self.b[keep]
        if loop is not None:
            value = self._check(value / (ONE - loop))
        return value


def _probability(m: Pdtmc, targets: Iterable[int], blocked: Iterable[int], order) -> tuple[RationalFunction, Stats]:
    q = qualitative_reach(m, targets, blocked)
    if m.init in q.prob1:
        return ONE, Stats()
    if m.init in q.prob0:
        return ZERO, Stats()
    region = _reachable(m, m.init, q.maybe)
    inside = frozenset(region)
    out: dict[int, dict[int, RationalFunction]] = {}
    b: dict[int, RationalFunction] = {}
    for s in region:
        row = {}
        acc = ZERO
        for t, p in m.succ[s].items():
            if t in inside:
                row[t] = p
            elif t in q.prob1:
                acc = acc + p
        out[s] = row
        b[s] = acc
    elim = _Eliminator(out, b)
    return elim.solve(m.init, order), elim.stats


def _timed(fn, *args) -> tuple[RationalFunction, Stats]:
    start = time.perf_counter()
    value, stats = fn(*args)
    stats.seconds = time.perf_counter() - start
    return value, stats


def pmc_reachability(m: Pdtmc, targets: Iterable[int], order: Sequence[int] | None = None) -> PmcResult:
    """Probability of eventually reaching ``targets`` from the initial state."""
    targets = frozenset(targets)
    if not targets:
        raise EmptyTargetSet("no state satisfies the target formula")
    value, stats = _timed(_probability, m, targets, (), order)
    return PmcResult(value, None, stats)


def pmc_until(m: Pdtmc, left: Iterable[int], targets: Iterable[int], order: Sequence[int] | None = None) -> PmcResult:
    """Probability of ``left U targets``: states outside both sets become failing sinks."""
    targets = frozenset(targets)
    if not targets:
        raise EmptyTargetSet("no state satisfies the target formula")
    blocked = frozenset(range(m.n)) - frozenset(left) - targets
    value, stats = _timed(_probability, m, targets, blocked, order)
    return PmcResult(value, None, stats)


def _reward(m: Pdtmc, name: str, targets: frozenset[int], order) -> tuple[RationalFunction, Stats]:
    if name not in m.rewards:
        raise UnknownRewardStructure(name)
    if m.init in targets:
        return ZERO, Stats()
    q = qualitative_reach(m, targets)
    if m.init not in q.prob1:
        raise InfiniteReward("the target is not reached almost surely from the initial state")
    struct = m.rewards[name]
    region = _reachable(m, m.init, q.prob1 - targets)
    inside = frozenset(region)
    out = {s: {t: p for t, p in m.succ[s].items() if t in inside} for s in region}
    b = {s: struct.get(s, ZERO) for s in region}
    elim = _Eliminator(out, b)
    return elim.solve(m.init, order), elim.stats


def pmc_reach_reward(m: Pdtmc, name: str, targets: Iterable[int], order: Sequence[int] | None = None) -> PmcResult:
    """Expected reward accumulated before first entering ``targets``."""
    targets = frozenset(targets)
    if not targets:
        raise EmptyTargetSet("no state satisfies the target formula")
    value, stats = _timed(_reward, m, name, targets, order)
    return PmcResult(value, None, stats)


def pmc(m: Pdtmc, prop: PropertySpec, order: Sequence[int] | None = None) -> PmcResult:
    """Monolithic analysis of ``prop`` on ``m``."""
    left, target = state_sets(m, prop)
    if prop.kind is Kind.REACH:
        res = pmc_reachability(m, target, order)
    elif prop.kind is Kind.UNTIL:
        res = pmc_until(m, left, target, order)
    else:
        res = pmc_reach_reward(m, prop.reward, target, order)
    return PmcResult(res.value, prop, res.stats)


# numeric oracle


def instantiate(m: Pdtmc, v: Valuation) -> list[dict[int, Fraction]]:
    """Numeric transition rows at ``v``; raises unless ``v`` is admissible."""
    rows = []
    for s, row in enumerate(m.succ):
        nrow = {}
        total = Fraction(0)
        for t, e in row.items():
            try:
                x = rf_eval(e, v)
            except AlgebraError as exc:
                if type(exc).__name__ == "UnboundParameter":
                    raise
                raise InadmissibleValuation(s, f"transition to {t}: {exc}") from exc
            if not 0 < x <= 1:
                raise InadmissibleValuation(s, f"transition to {t} evaluates to {x}, outside (0,1]")
            nrow[t] = x
            total += x
        if total != 1:
            raise InadmissibleValuation(s, f"outgoing probabilities sum to {total}")
        rows.append(nrow)
    return rows


def _backward(rows: list[dict[int, Fraction]], seeds: Iterable[int], stop: set[int]) -> set[int]:
    pred: list[list[int]] = [[] for _ in rows]
    for s, row in enumerate(rows):
        for t in row:
            pred[t].append(s)
    seen = set(seeds)
    frontier = list(seen)
    while frontier:
        nxt = []
        for t in frontier:
            for u in pred[t]:
                if u not in seen and u not in stop:
                    seen.add(u)
                    nxt.append(u)
        frontier = nxt
    return seen


def gauss_solve(a: list[dict[int, Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Solve a sparse square system exactly by Gaussian elimination with partial pivoting."""
    n = len(b)
    rows = [dict(r) for r in a]
    rhs = list(b)
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(rows[r].get(col, 0)))
        if rows[pivot].get(col, 0) == 0:
            raise ZeroDivisionError("singular system")
        rows[col], rows[pivot] = rows[pivot], rows[col]
        rhs[col], rhs[pivot] = rhs[pivot], rhs[col]
        prow = rows[col]
        pv = prow[col]
        for r in range(col + 1, n):
            f = rows[r].get(col)
            if not f:
                continue
            f = f / pv
            row = rows[r]
            for c, x in prow.items():
                y = row.get(c, 0) - f * x
                if y:
                    row[c] = y
                else:
                    row.pop(c, None)
            rhs[r] -= f * rhs[col]
    x = [Fraction(0)] * n
    for r in range(n - 1, -1, -1):
        acc = rhs[r] - sum(c * x[k] for k, c in rows[r].items() if k > r)
        x[r] = acc / rows[r][r]
    return x


def _solve_linear(a: list[dict[int, Fraction]], b: list[Fraction], method: str) -> list[Fraction]:
    n = len(b)
    if method == "gauss":
        return gauss_solve(a, b)
    mat = flint.fmpq_mat(n, n)
    for r, row in enumerate(a):
        for c, x in row.items():
            mat[r, c] = flint.fmpq(x.numerator, x.denominator)
    rhs = flint.fmpq_mat(n, 1, [flint.fmpq(x.numerator, x.denominator) for x in b])
    sol = mat.solve(rhs)
    return [Fraction(int(sol[i, 0].p), int(sol[i, 0].q)) for i in range(n)]


def oracle_solve(m: Pdtmc, prop: PropertySpec, v: Valuation, method: str = "flint") -> Fraction:
    """Exact value of ``prop`` on ``m`` instantiated at ``v``.

    Independent of the elimination engine: it instantiates the matrix, does
    its own graph precomputation and solves the linear system directly.
    ``method`` is "flint" (FLINT exact solver) or "gauss" (pure Python).
    """
    left, target = state_sets(m, prop)
    if not target:
        raise EmptyTargetSet("no state satisfies the target formula")
    rows = instantiate(m, v)
    n = m.n
    if prop.kind is Kind.REWARD:
        if prop.reward not in m.rewards:
            raise UnknownRewardStructure(prop.reward)
        rew = {}
        for s, e in m.rewards[prop.reward].items():
            try:
                x = rf_eval(e, v)
            except AlgebraError as exc:
                if type(exc).__name__ == "UnboundParameter":
                    raise
                raise InadmissibleValuation(s, f"reward: {exc}") from exc
            if x < 0:
                raise InadmissibleValuation(s, f"reward evaluates to {x} < 0")
            rew[s] = x
        blocked: set[int] = set()
    else:
        blocked = set(range(n)) - set(target) - (set(left) if prop.kind is Kind.UNTIL else set(range(n)))
    tset = set(target)
    reach = _backward(rows, tset, tset | blocked)
    never = set(range(n)) - reach
    sure = set(range(n)) - _backward(rows, never, tset)
    if prop.kind is Kind.REWARD:
        if m.init in tset:
            return Fraction(0)
        if m.init not in sure:
            raise InfiniteReward("the target is not reached almost surely from the initial state")
        unknown = sure - tset
    else:
        if m.init in never:
            return Fraction(0)
        if m.init in sure:
            return Fraction(1)
        unknown = set(range(n)) - never - sure
    # restrict to states reachable from init inside the unknown region
    region = [m.init]
    seen = {m.init}
    for s in region:
        for t in rows[s]:
            if t in unknown and t not in seen:
                seen.add(t)
                region.append(t)
    idx = {s: i for i, s in enumerate(region)}
    a: list[dict[int, Fraction]] = []
    b: list[Fraction] = []
    for s in region:
        row = {idx[s]: Fraction(1)}
        rhs = Fraction(0)
        for t, x in rows[s].items():
            if t in idx:
                row[idx[t]] = row.get(idx[t], 0) - x
                if row[idx[t]] == 0:
                    del row[idx[t]]
            elif prop.kind is not Kind.REWARD and t in sure:
                rhs += x
        if prop.kind is Kind.REWARD:
            rhs = rew.get(s, Fraction(0))
        a.append(row)
        b.append(rhs)
    return _solve_linear(a, b, method)[0]
