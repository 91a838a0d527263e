"""Guarded-command modelling language (single-module PRISM-style subset).

The program is expanded into an explicit pDTMC by breadth-first exploration
from the initial valuation. Reachable states are then numbered in
lexicographic order of their variable valuations (variables in declaration
order), which is also how PRISM numbers them.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from ..algebra import ONE, RationalFunction
from ..errors import OverlappingGuards, ParseError, UnboundedVariable, UnreachableInit
from ..model import Pdtmc, validate_pdtmc
from .explicit import check_reserved

_TOKEN = re.compile(
    r"""(?P<ws>[ \t\r]+|//[^\n]*)
      | (?P<nl>\n)
      | (?P<num>\d+(?:\.\d+)?)
      | (?P<id>[A-Za-z_][A-Za-z_0-9]*'?)
      | (?P<str>"[^"\n]*")
      | (?P<op>->|\.\.|<=|>=|!=|=>|[-+*/^()\[\]:;,=<>&|!?])
      | (?P<bad>.)""",
    re.VERBOSE,
)

_KEYWORDS = {
    "dtmc", "probabilistic", "const", "int", "double", "bool", "module", "endmodule",
    "rewards", "endrewards", "label", "init", "true", "false",
}
_UNSUPPORTED = {"mdp", "ctmc", "pta", "formula", "global", "system", "endsystem", "nondeterministic", "stochastic"}


@dataclass
class Tok:
    kind: str
    text: str
    line: int


def tokenize(src: str) -> list[Tok]:
    out = []
    line = 1
    for m in _TOKEN.finditer(src):
        kind = m.lastgroup
        if kind == "nl":
            line += 1
        elif kind == "ws":
            continue
        elif kind == "bad":
            raise ParseError(line, f"unexpected character {m.group()!r}")
        else:
            out.append(Tok(kind, m.group(), line))
    out.append(Tok("eof", "", line))
    return out


# expression nodes are plain tuples: ("num", Fraction) ("bool", b) ("id", name)
# ("neg", e) ("not", e) ("bin", op, l, r)

_PREC = {"=>": 1, "|": 2, "&": 3, "=": 5, "!=": 5, "<": 5, "<=": 5, ">": 5, ">=": 5, "+": 6, "-": 6, "*": 7, "/": 7}


@dataclass
class Command:
    guard: tuple
    updates: list[tuple[tuple | None, list[tuple[str, tuple]]]]
    line: int


@dataclass
class Var:
    name: str
    lo: tuple
    hi: tuple
    init: tuple | None
    line: int
    is_bool: bool = False


@dataclass
class ModelSource:
    constants: list[tuple[str, str, tuple | None, int]] = field(default_factory=list)
    variables: list[Var] = field(default_factory=list)
    commands: list[Command] = field(default_factory=list)
    rewards: dict[str, list[tuple[tuple, tuple, int]]] = field(default_factory=dict)
    labels: dict[str, tuple[tuple, int]] = field(default_factory=dict)


class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def next(self) -> Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind != "str"

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Tok:
        if not self.at(text):
            raise ParseError(self.tok.line, f"expected {text!r}, got {self.tok.text or 'end of file'!r}")
        return self.next()

    def ident(self) -> str:
        t = self.next()
        if t.kind != "id" or t.text in _KEYWORDS or t.text.endswith("'"):
            raise ParseError(t.line, f"expected identifier, got {t.text!r}")
        return t.text

    def string(self) -> str:
        t = self.next()
        if t.kind != "str":
            raise ParseError(t.line, f"expected quoted name, got {t.text!r}")
        return t.text[1:-1]

    # top level

    def program(self) -> ModelSource:
        src = ModelSource()
        modules = 0
        if self.at("dtmc") or self.at("probabilistic"):
            self.next()
        while self.tok.kind != "eof":
            t = self.tok
            if t.text in _UNSUPPORTED:
                raise ParseError(t.line, f"{t.text!r} is outside the supported language subset")
            if self.accept("const"):
                self.constant(src, t.line)
            elif self.accept("module"):
                modules += 1
                if modules > 1:
                    raise ParseError(t.line, "only a single module is supported")
                self.module(src)
            elif self.accept("rewards"):
                self.reward_block(src, t.line)
            elif self.accept("label"):
                name = self.string()
                if name in src.labels:
                    raise ParseError(t.line, f"label {name!r} defined twice")
                self.expect("=")
                src.labels[name] = (self.expr(), t.line)
                self.expect(";")
            else:
                raise ParseError(t.line, f"unexpected {t.text!r}")
        return src

    def constant(self, src: ModelSource, line: int) -> None:
        ctype = "double"
        if self.tok.text in ("int", "double", "bool"):
            ctype = self.next().text
        name = self.ident()
        value = None
        if self.accept("="):
            value = self.expr()
        elif ctype != "double":
            raise ParseError(line, f"{ctype} constant {name!r} needs a value")
        self.expect(";")
        src.constants.append((name, ctype, value, line))

    def module(self, src: ModelSource) -> None:
        self.ident()
        while not self.at("endmodule"):
            t = self.tok
            if t.kind == "eof":
                raise ParseError(t.line, "missing 'endmodule'")
            if self.at("["):
                src.commands.append(self.command())
            else:
                src.variables.append(self.variable())
        self.expect("endmodule")

    def variable(self) -> Var:
        line = self.tok.line
        name = self.ident()
        self.expect(":")
        if self.accept("bool"):
            lo, hi, is_bool = ("num", Fraction(0)), ("num", Fraction(1)), True
        else:
            self.expect("[")
            lo = self.expr()
            self.expect("..")
            hi = self.expr()
            self.expect("]")
            is_bool = False
        init = self.expr() if self.accept("init") else None
        self.expect(";")
        return Var(name, lo, hi, init, line, is_bool)

    def command(self) -> Command:
        line = self.expect("[").line
        if not self.at("]"):
            action = self.ident()
            raise ParseError(line, f"synchronising action [{action}] is not supported")
        self.expect("]")
        guard = self.expr()
        self.expect("->")
        updates = [self.update()]
        while self.accept("+"):
            updates.append(self.update())
        self.expect(";")
        return Command(guard, updates, line)

    def _at_assignments(self) -> bool:
        if self.at("true"):
            return True
        nxt = self.toks[self.i + 1]
        return self.at("(") and nxt.kind == "id" and nxt.text.endswith("'")

    def update(self):
        prob = None
        if not self._at_assignments():
            prob = self.expr()
            self.expect(":")
        if self.accept("true"):
            return prob, []
        assigns = [self.assignment()]
        while self.accept("&"):
            assigns.append(self.assignment())
        return prob, assigns

    def assignment(self) -> tuple[str, tuple]:
        self.expect("(")
        t = self.next()
        if t.kind != "id" or not t.text.endswith("'"):
            raise ParseError(t.line, f"expected primed variable, got {t.text!r}")
        self.expect("=")
        e = self.expr()
        self.expect(")")
        return t.text[:-1], e

    def reward_block(self, src: ModelSource, line: int) -> None:
        name = self.string()
        if name in src.rewards:
            raise ParseError(line, f"reward structure {name!r} defined twice")
        items = []
        while not self.at("endrewards"):
            t = self.tok
            if t.kind == "eof":
                raise ParseError(t.line, "missing 'endrewards'")
            if self.at("["):
                raise ParseError(t.line, "transition rewards are not supported")
            guard = self.expr()
            self.expect(":")
            value = self.expr()
            self.expect(";")
            items.append((guard, value, t.line))
        self.expect("endrewards")
        src.rewards[name] = items

    # expressions (precedence climbing)

    def expr(self, min_prec: int = 0) -> tuple:
        left = self.unary()
        while True:
            op = self.tok.text if self.tok.kind == "op" else None
            prec = _PREC.get(op)
            if prec is None or prec <= min_prec:
                break
            self.next()
            right = self.expr(prec)
            left = ("bin", op, left, right)
        return left

    def unary(self) -> tuple:
        if self.accept("-"):
            return ("neg", self.unary())
        if self.accept("!"):
            return ("not", self.expr(4))
        base = self.atom()
        while self.accept("^"):
            t = self.next()
            if t.kind != "num" or not t.text.isdigit():
                raise ParseError(t.line, "exponent must be a non-negative integer literal")
            base = ("bin", "^", base, ("num", Fraction(int(t.text))))
        return base

    def atom(self) -> tuple:
        t = self.next()
        if t.kind == "num":
            return ("num", Fraction(t.text))
        if t.text == "true":
            return ("bool", True)
        if t.text == "false":
            return ("bool", False)
        if t.kind == "id" and t.text not in _KEYWORDS and not t.text.endswith("'"):
            return ("id", t.text, t.line)
        if t.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(t.line, f"unexpected {t.text or 'end of file'!r} in expression")


def _line(node: tuple) -> int | None:
    if node[0] == "id":
        return node[2]
    for child in node[1:]:
        if isinstance(child, tuple):
            ln = _line(child)
            if ln is not None:
                return ln
    return None


def _evaluate(node: tuple, env: dict):
    kind = node[0]
    if kind == "num" or kind == "bool":
        return node[1]
    if kind == "id":
        if node[1] not in env:
            raise ParseError(node[2], f"undeclared identifier {node[1]!r}")
        return env[node[1]]
    if kind == "neg":
        v = _evaluate(node[1], env)
        if isinstance(v, bool):
            raise ParseError(_line(node), "cannot negate a boolean")
        return -v
    if kind == "not":
        v = _evaluate(node[1], env)
        if not isinstance(v, bool):
            raise ParseError(_line(node), "'!' needs a boolean operand")
        return not v
    op, a, b = node[1], _evaluate(node[2], env), _evaluate(node[3], env)
    if op in ("&", "|", "=>"):
        if not (isinstance(a, bool) and isinstance(b, bool)):
            raise ParseError(_line(node), f"{op!r} needs boolean operands")
        return (a and b) if op == "&" else (a or b) if op == "|" else (not a or b)
    if isinstance(a, bool) or isinstance(b, bool):
        if op in ("=", "!=") and isinstance(a, bool) and isinstance(b, bool):
            return (a == b) if op == "=" else (a != b)
        raise ParseError(_line(node), f"{op!r} applied to a boolean")
    if op in ("=", "!=", "<", "<=", ">", ">="):
        if isinstance(a, RationalFunction) or isinstance(b, RationalFunction):
            raise ParseError(_line(node), "comparisons cannot depend on parameters")
        return {"=": a == b, "!=": a != b, "<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if (isinstance(b, RationalFunction) and b.is_zero()) or (not isinstance(b, RationalFunction) and b == 0):
            raise ParseError(_line(node), "division by zero")
        return (a / b) if isinstance(a, RationalFunction) or isinstance(b, RationalFunction) else Fraction(a) / b
    if op == "^":
        return a ** int(b)
    raise ParseError(_line(node), f"unknown operator {op!r}")


def _as_int(v, what: str, line: int | None) -> int:
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, RationalFunction):
        c = v.constant_value()
        if c is None:
            raise ParseError(line, f"{what} cannot depend on parameters")
        v = c
    if Fraction(v).denominator != 1:
        raise ParseError(line, f"{what} must be an integer, got {v}")
    return int(v)


def _as_prob(v, line: int | None) -> RationalFunction:
    if isinstance(v, bool):
        raise ParseError(line, "probability must be numeric")
    return v if isinstance(v, RationalFunction) else RationalFunction.const(v)


def _bool(v, line: int | None) -> bool:
    if not isinstance(v, bool):
        raise ParseError(line, "expected a boolean expression")
    return v


def expand(src: ModelSource) -> Pdtmc:
    """Explore the reachable state space of a parsed program."""
    env: dict = {}
    for name, ctype, value, line in src.constants:
        check_reserved([name], line)
        if name in env:
            raise ParseError(line, f"constant {name!r} declared twice")
        if value is None:
            env[name] = RationalFunction.var(name)
            continue
        v = _evaluate(value, env)
        if ctype == "int":
            v = _as_int(v, f"constant {name}", line)
        elif ctype == "bool":
            v = _bool(v, line)
        elif isinstance(v, RationalFunction) and v.constant_value() is not None:
            v = v.constant_value()
        env[name] = v

    variables = src.variables
    bounds = []
    init = []
    for var in variables:
        if var.name in env:
            raise ParseError(var.line, f"variable {var.name!r} clashes with a constant")
        lo = _as_int(_evaluate(var.lo, env), "lower bound", var.line)
        hi = _as_int(_evaluate(var.hi, env), "upper bound", var.line)
        if lo > hi:
            raise ParseError(var.line, f"empty range [{lo}..{hi}] for {var.name!r}")
        start = lo if var.init is None else _as_int(_evaluate(var.init, env), "initial value", var.line)
        if not lo <= start <= hi:
            raise UnreachableInit(var.line, f"initial value {start} of {var.name!r} outside [{lo}..{hi}]")
        bounds.append((lo, hi))
        init.append(start)
    names = [v.name for v in variables]
    position = {n: i for i, n in enumerate(names)}
    for cmd in src.commands:
        for _, assigns in cmd.updates:
            for target, _ in assigns:
                if target not in position:
                    raise ParseError(cmd.line, f"assignment to undeclared variable {target!r}")

    def state_env(vals: tuple[int, ...]) -> dict:
        e = dict(env)
        for var, val in zip(variables, vals):
            e[var.name] = bool(val) if var.is_bool else val
        return e

    index: dict[tuple[int, ...], int] = {tuple(init): 0}
    order: list[tuple[int, ...]] = [tuple(init)]
    rows: list[dict[int, RationalFunction]] = []
    queue = deque([tuple(init)])
    while queue:
        vals = queue.popleft()
        s = index[vals]
        e = state_env(vals)
        enabled = [c for c in src.commands if _bool(_evaluate(c.guard, e), c.line)]
        if len(enabled) > 1:
            lines = ", ".join(str(c.line) for c in enabled)
            where = ",".join(f"{n}={v}" for n, v in zip(names, vals))
            raise OverlappingGuards(where, f"commands on lines {lines}")
        row: dict[int, RationalFunction] = {}
        if not enabled:
            row[s] = ONE
        else:
            cmd = enabled[0]
            for prob, assigns in cmd.updates:
                p = ONE if prob is None else _as_prob(_evaluate(prob, e), cmd.line)
                if p.is_zero():
                    continue
                nxt = list(vals)
                for target, value in assigns:
                    k = position[target]
                    v = _as_int(_evaluate(value, e), f"update of {target}", cmd.line)
                    lo, hi = bounds[k]
                    if not lo <= v <= hi:
                        raise UnboundedVariable(cmd.line, f"update sets {target!r} to {v}, outside [{lo}..{hi}]")
                    nxt[k] = v
                key = tuple(nxt)
                if key not in index:
                    index[key] = len(order)
                    order.append(key)
                    queue.append(key)
                t = index[key]
                row[t] = row[t] + p if t in row else p
            row = {t: p for t, p in row.items() if not p.is_zero()}
        rows.append(row)

    # number states by their valuation, as PRISM does, rather than by discovery
    ranked = sorted(range(len(order)), key=lambda i: order[i])
    renum = {old: new for new, old in enumerate(ranked)}
    rows = [{renum[t]: p for t, p in rows[old].items()} for old in ranked]
    order = [order[old] for old in ranked]

    labels = {}
    for name, (expr, line) in src.labels.items():
        labels[name] = [s for s, vals in enumerate(order) if _bool(_evaluate(expr, state_env(vals)), line)]
    rewards = {}
    for name, items in src.rewards.items():
        struct: dict[int, RationalFunction] = {}
        for s, vals in enumerate(order):
            e = state_env(vals)
            for guard, value, line in items:
                if _bool(_evaluate(guard, e), line):
                    r = _as_prob(_evaluate(value, e), line)
                    struct[s] = struct[s] + r if s in struct else r
        rewards[name] = struct
    params = [n for n, ctype, v, _ in src.constants if v is None]
    descriptors = [",".join(f"{n}={v}" for n, v in zip(names, vals)) for vals in order]
    return Pdtmc(len(order), renum[0], rows, labels=labels, rewards=rewards, params=params, names=descriptors)


def parse_source(src: str) -> ModelSource:
    return _Parser(src).program()


def parse_model_text(src: str, validate: bool = True) -> Pdtmc:
    m = expand(parse_source(src))
    if validate:
        validate_pdtmc(m)
    return m
