"""PCTL subset: P=? [F sf], P=? [sf U sf] and R{"name"}=? [F sf]."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from ..errors import ParseError, UnknownLabel, UnsupportedOperator
from ..model import Pdtmc


class StateFormula:
    """Boolean formula over atomic propositions."""

    def sat(self, m: Pdtmc) -> frozenset[int]:
        raise NotImplementedError


@dataclass(frozen=True)
class TrueF(StateFormula):
    def sat(self, m: Pdtmc) -> frozenset[int]:
        return frozenset(range(m.n))

    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class FalseF(StateFormula):
    def sat(self, m: Pdtmc) -> frozenset[int]:
        return frozenset()

    def __str__(self) -> str:
        return "false"


@dataclass(frozen=True)
class Atom(StateFormula):
    name: str

    def sat(self, m: Pdtmc) -> frozenset[int]:
        if self.name not in m.labels:
            raise UnknownLabel(self.name)
        return m.labels[self.name]

    def __str__(self) -> str:
        return f'"{self.name}"'


@dataclass(frozen=True)
class Not(StateFormula):
    arg: StateFormula

    def sat(self, m: Pdtmc) -> frozenset[int]:
        return frozenset(range(m.n)) - self.arg.sat(m)

    def __str__(self) -> str:
        inner = str(self.arg)
        return f"!{inner}" if isinstance(self.arg, (Atom, TrueF, FalseF, Not)) else f"!({inner})"


@dataclass(frozen=True)
class And(StateFormula):
    left: StateFormula
    right: StateFormula

    def sat(self, m: Pdtmc) -> frozenset[int]:
        return self.left.sat(m) & self.right.sat(m)

    def __str__(self) -> str:
        return f"{_wrap(self.left, Or)} & {_wrap(self.right, (Or, And))}"


@dataclass(frozen=True)
class Or(StateFormula):
    left: StateFormula
    right: StateFormula

    def sat(self, m: Pdtmc) -> frozenset[int]:
        return self.left.sat(m) | self.right.sat(m)

    def __str__(self) -> str:
        return f"{self.left} | {_wrap(self.right, Or)}"


def _wrap(f: StateFormula, kinds) -> str:
    return f"({f})" if isinstance(f, kinds) else str(f)


class Kind(Enum):
    REACH = "reachability"
    UNTIL = "until"
    REWARD = "reward"


@dataclass(frozen=True)
class PropertySpec:
    kind: Kind
    target: StateFormula
    left: StateFormula | None = None
    reward: str | None = None

    def __str__(self) -> str:
        if self.kind is Kind.REACH:
            return f"P=? [ F {self.target} ]"
        if self.kind is Kind.UNTIL:
            return f"P=? [ {_wrap(self.left, (Or, And))} U {_wrap(self.target, (Or, And))} ]"
        return f'R{{"{self.reward}"}}=? [ F {self.target} ]'


def eval_state_formula(m: Pdtmc, sf: StateFormula) -> frozenset[int]:
    """States of ``m`` satisfying ``sf``."""
    return sf.sat(m)


_TOKEN = re.compile(
    r"""\s*(?:
        (?P<str>"[^"]*")
      | (?P<cmp><=|>=|=\?|=|<|>)
      | (?P<num>\d+(?:\.\d*)?)
      | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
      | (?P<op>[\[\]{}()!&|])
      | (?P<bad>\S)
    )""",
    re.VERBOSE,
)

_REJECTED = {
    "X": "next (X)",
    "G": "globally (G)",
    "W": "weak until (W)",
    "I": "instantaneous reward (I=k)",
    "C": "cumulative reward (C<=k)",
    "S": "steady-state (S)",
}
_COVERAGE = "supported: P=? [ F sf ], P=? [ sf U sf ], R{\"name\"}=? [ F sf ]"


class _PropParser:
    def __init__(self, text: str):
        self.text = text
        self.toks: list[tuple[str, str]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                break
            pos = m.end()
            kind = m.lastgroup
            if kind == "bad":
                raise ParseError(None, f"unexpected character {m.group(kind)!r} in property")
            self.toks.append((kind, m.group(kind)))
        self.i = 0

    def peek(self, k: int = 0) -> tuple[str, str] | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def take(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise ParseError(None, "unexpected end of property")
        self.i += 1
        return tok

    def expect(self, value: str) -> None:
        tok = self.take()
        if tok[1] != value:
            raise ParseError(None, f"expected {value!r}, got {tok[1]!r}")

    def unsupported(self, what: str) -> UnsupportedOperator:
        return UnsupportedOperator(None, f"{what} is not supported; {_COVERAGE}")

    def parse(self) -> PropertySpec:
        kind, head = self.take()
        if head in ("Pmin", "Pmax", "Rmin", "Rmax"):
            raise self.unsupported(f"operator {head}")
        if head == "S":
            raise self.unsupported(_REJECTED["S"])
        if head == "P":
            self.expect("=?")
            self.expect("[")
            prop = self.path_prob()
        elif head == "R":
            name = None
            if self.peek() == ("op", "{"):
                self.take()
                k, v = self.take()
                if k != "str":
                    raise ParseError(None, "reward structure name must be quoted")
                name = v[1:-1]
                self.expect("}")
            if name is None:
                raise ParseError(None, 'reward properties need a structure name: R{"name"}=? [ F sf ]')
            self.expect("=?")
            self.expect("[")
            prop = self.path_reward(name)
        else:
            raise ParseError(None, f"property must start with P or R, got {head!r}")
        self.expect("]")
        if self.peek() is not None:
            raise ParseError(None, f"trailing input {self.peek()[1]!r}")
        return prop

    def bound_check(self, op: str) -> None:
        if self.peek() is not None and self.peek()[0] == "cmp" and self.peek()[1] in ("<=", "<", ">=", ">", "="):
            raise self.unsupported(f"step-bounded {op}")

    def path_prob(self) -> PropertySpec:
        tok = self.peek()
        if tok == ("id", "F"):
            self.take()
            self.bound_check("F")
            return PropertySpec(Kind.REACH, self.formula())
        if tok is not None and tok[0] == "id" and tok[1] in _REJECTED and tok[1] not in ("I", "C", "S"):
            raise self.unsupported(_REJECTED[tok[1]])
        left = self.formula()
        tok = self.peek()
        if tok == ("id", "U"):
            self.take()
            self.bound_check("until (U<=k)")
            return PropertySpec(Kind.UNTIL, self.formula(), left=left)
        if tok is not None and tok[0] == "id" and tok[1] in ("W", "R"):
            raise self.unsupported(_REJECTED.get(tok[1], tok[1]))
        raise ParseError(None, "expected F or U in probability query")

    def path_reward(self, name: str) -> PropertySpec:
        tok = self.peek()
        if tok == ("id", "F"):
            self.take()
            self.bound_check("F")
            return PropertySpec(Kind.REWARD, self.formula(), reward=name)
        if tok is not None and tok[0] == "id" and tok[1] in ("I", "C", "S"):
            raise self.unsupported(_REJECTED[tok[1]])
        raise ParseError(None, "reward queries must have the form [ F sf ]")

    def formula(self) -> StateFormula:
        left = self.conj()
        while self.peek() == ("op", "|"):
            self.take()
            left = Or(left, self.conj())
        return left

    def conj(self) -> StateFormula:
        left = self.neg()
        while self.peek() == ("op", "&"):
            self.take()
            left = And(left, self.neg())
        return left

    def neg(self) -> StateFormula:
        if self.peek() == ("op", "!"):
            self.take()
            return Not(self.neg())
        return self.atom()

    def atom(self) -> StateFormula:
        kind, v = self.take()
        if kind == "str":
            return Atom(v[1:-1])
        if v == "(":
            f = self.formula()
            self.expect(")")
            return f
        if kind == "id":
            if v == "true":
                return TrueF()
            if v == "false":
                return FalseF()
            if v in ("P", "R") and self.peek() is not None and self.peek()[1] in ("=?", "{", "<", "<=", ">", ">=", "["):
                raise self.unsupported("nested P/R operator")
            if v in ("F", "U", "X", "G", "W"):
                raise ParseError(None, f"temporal operator {v!r} inside a state formula")
            return Atom(v)
        raise ParseError(None, f"unexpected {v!r} in state formula")


def parse_property(src: str) -> PropertySpec:
    return _PropParser(src.strip()).parse()


def state_sets(m: Pdtmc, prop: PropertySpec) -> tuple[frozenset[int] | None, frozenset[int]]:
    """(left, target) state sets of ``prop``; left is None unless it is an until.

    Auxiliary states are transparent: never targets, always allowed on the
    left of an until.
    """
    target = eval_state_formula(m, prop.target) - m.aux
    if prop.kind is not Kind.UNTIL:
        return None, target
    return eval_state_formula(m, prop.left) | m.aux, target
