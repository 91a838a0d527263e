"""Exact rational functions over named parameters.

Polynomials are FLINT ``fmpq_mpoly`` values living in a context whose
generators are the alphabetically sorted parameter names, ordered graded-lex.
Operands from different contexts are lifted to the union context before any
arithmetic, so the printed form and the op count only depend on the value.
"""

from __future__ import annotations

import os
import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Union

import flint

from .errors import BudgetExceeded, DenominatorVanishes, DivisionByZeroFunction, ParseError, UnboundParameter

DEFAULT_MONOMIAL_BUDGET = 100_000
HARD_LIMIT_FACTOR = 25

Valuation = Mapping[str, Fraction]
Number = Union[int, Fraction]


def monomial_budget() -> int:
    """Term budget above which gcd cancellation is skipped.

    Read from ``FRAGMC_MONOMIAL_BUDGET`` on every call so tests can patch it.
    """
    raw = os.environ.get("FRAGMC_MONOMIAL_BUDGET")
    return int(raw) if raw else DEFAULT_MONOMIAL_BUDGET


def term_limit() -> int:
    """Hard cap on the size of any polynomial before giving up with BudgetExceeded."""
    return HARD_LIMIT_FACTOR * monomial_budget()


@lru_cache(maxsize=None)
def _ctx(names: tuple[str, ...]) -> flint.fmpq_mpoly_ctx:
    return flint.fmpq_mpoly_ctx.get(names, "deglex")


_EMPTY = _ctx(())


def _fmpq(x: Number) -> flint.fmpq:
    if isinstance(x, int):
        return flint.fmpq(x)
    return flint.fmpq(x.numerator, x.denominator)


def _frac(x: flint.fmpq) -> Fraction:
    return Fraction(int(x.p), int(x.q))


def _lift(a: flint.fmpq_mpoly, ctx: flint.fmpq_mpoly_ctx) -> flint.fmpq_mpoly:
    return a if a.context() is ctx else a.project_to_context(ctx)


def _common(*polys: flint.fmpq_mpoly) -> tuple[flint.fmpq_mpoly, ...]:
    ctx = polys[0].context()
    if all(p.context() is ctx for p in polys):
        return polys
    names = set()
    for p in polys:
        names.update(p.context().names())
    ctx = _ctx(tuple(sorted(names)))
    return tuple(_lift(p, ctx) for p in polys)


def _pmul(p: flint.fmpq_mpoly, q: flint.fmpq_mpoly) -> flint.fmpq_mpoly:
    """Product of ``p`` and ``q``, refused up front if it could exceed the term limit.

    FLINT aborts the process when an allocation fails, so the size is bounded
    before multiplying: by the number of term pairs and by the dense box of
    per-variable degrees.
    """
    n = len(p) * len(q)
    limit = term_limit()
    if n > limit:
        box = 1
        for x, y in zip(p.degrees(), q.degrees()):
            box *= int(x) + int(y) + 1
            if box > limit:
                raise BudgetExceeded(f"a product of {len(p)} and {len(q)} terms may exceed the limit of {limit}")
    return p * q


def _used(p: flint.fmpq_mpoly) -> tuple[str, ...]:
    names = p.context().names()
    return tuple(n for n, d in zip(names, p.degrees()) if d > 0)


def _shrink(p: flint.fmpq_mpoly, keep: Iterable[str]) -> flint.fmpq_mpoly:
    """Move ``p`` into the smallest context containing ``keep``."""
    ctx = _ctx(tuple(sorted(keep)))
    return _lift(p, ctx)


class Polynomial:
    """Read-only view of a polynomial with named variables."""

    __slots__ = ("_p",)

    def __init__(self, p: flint.fmpq_mpoly):
        self._p = p

    def terms(self) -> list[tuple[Fraction, dict[str, int]]]:
        """Monomials in descending graded-lex order as (coefficient, exponents)."""
        names = self._p.context().names()
        out = []
        for exps, c in self._p.terms():
            out.append((_frac(c), {n: e for n, e in zip(names, exps) if e}))
        return out

    @property
    def variables(self) -> tuple[str, ...]:
        return _used(self._p)

    def is_zero(self) -> bool:
        return self._p.is_zero()

    def __len__(self) -> int:
        return len(self._p)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        a, b = _common(self._p, other._p)
        return a == b

    def __hash__(self) -> int:
        return hash(_poly_key(self._p))

    def __str__(self) -> str:
        return _poly_str(self._p)

    __repr__ = __str__


def _poly_key(p: flint.fmpq_mpoly) -> tuple:
    names = p.context().names()
    return tuple(
        (tuple((n, e) for n, e in zip(names, exps) if e), int(c.p), int(c.q))
        for exps, c in p.terms()
    )


class RationalFunction:
    """Quotient of two polynomials, kept coprime with a normalized denominator.

    ``canonical`` is False when gcd cancellation was skipped because the
    operands exceeded the monomial budget; such values still evaluate
    correctly but may print differently from their reduced form.
    """

    __slots__ = ("_num", "_den", "canonical", "_hash")

    def __init__(self, num: flint.fmpq_mpoly, den: flint.fmpq_mpoly, canonical: bool = True):
        # trusted constructor: callers pass already normalized parts
        self._num = num
        self._den = den
        self.canonical = canonical
        self._hash = None

    # construction

    @classmethod
    def const(cls, value: Number) -> RationalFunction:
        return cls(_EMPTY.constant(_fmpq(Fraction(value))), _EMPTY.constant(1))

    @classmethod
    def var(cls, name: str) -> RationalFunction:
        ctx = _ctx((name,))
        return cls(ctx.gen(0), ctx.constant(1))

    @classmethod
    def from_parts(cls, num: flint.fmpq_mpoly, den: flint.fmpq_mpoly, reduce: bool | None = None) -> RationalFunction:
        """Normalize ``num/den``; ``reduce`` forces or forbids the gcd step."""
        num, den = _common(num, den)
        return _normalize(num, den, reduce)

    # accessors

    @property
    def numerator(self) -> Polynomial:
        return Polynomial(self._num)

    @property
    def denominator(self) -> Polynomial:
        return Polynomial(self._den)

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(_used(self._num)) | frozenset(_used(self._den))

    def size(self) -> int:
        """Number of stored terms in numerator and denominator."""
        return len(self._num) + len(self._den)

    def is_zero(self) -> bool:
        return self._num.is_zero()

    def is_one(self) -> bool:
        return self._den.is_one() and self._num.is_one()

    def constant_value(self) -> Fraction | None:
        if self._num.is_constant() and self._den.is_constant():
            n = self._num.leading_coefficient() if not self._num.is_zero() else flint.fmpq(0)
            return _frac(n) / _frac(self._den.leading_coefficient())
        return None

    # arithmetic

    def __add__(self, other: object) -> RationalFunction:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return _add(self, o)

    __radd__ = __add__

    def __sub__(self, other: object) -> RationalFunction:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return _add(self, -o)

    def __rsub__(self, other: object) -> RationalFunction:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return _add(o, -self)

    def __neg__(self) -> RationalFunction:
        return RationalFunction(-self._num, self._den, self.canonical)

    def __mul__(self, other: object) -> RationalFunction:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return _mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, other: object) -> RationalFunction:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return _mul(self, o.inverse())

    def __rtruediv__(self, other: object) -> RationalFunction:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return _mul(o, self.inverse())

    def __pow__(self, e: int) -> RationalFunction:
        if not isinstance(e, int):
            return NotImplemented
        if e < 0:
            return self.inverse() ** (-e)
        return RationalFunction(self._num**e, self._den**e, self.canonical)

    def inverse(self) -> RationalFunction:
        if self._num.is_zero():
            raise DivisionByZeroFunction("division by the zero function")
        return _finish(self._den, self._num, self.canonical)

    # comparison

    def __eq__(self, other: object) -> bool:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        if self.canonical and o.canonical:
            a, b, c, d = _common(self._num, o._num, self._den, o._den)
            return a == b and c == d
        a, b, c, d = _common(self._num, o._den, o._num, self._den)
        return _pmul(a, b) == _pmul(c, d)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((_poly_key(self._num), _poly_key(self._den)))
        return self._hash

    # evaluation

    def eval(self, v: Valuation) -> Fraction:
        return rf_eval(self, v)

    def __str__(self) -> str:
        return rf_str(self)

    def __repr__(self) -> str:
        return f"RationalFunction({rf_str(self)!r})"


def _coerce(x: object) -> RationalFunction | None:
    if isinstance(x, RationalFunction):
        return x
    if isinstance(x, (int, Fraction)):
        return RationalFunction.const(x)
    return None


def _content(p: flint.fmpq_mpoly) -> flint.fmpq:
    """Positive rational content, signed so that the leading coefficient becomes positive."""
    coeffs = p.coeffs()
    g = 0
    lcm = 1
    for c in coeffs:
        g = flint.fmpz(c.p).gcd(g) if g else abs(flint.fmpz(c.p))
        q = flint.fmpz(c.q)
        lcm = lcm * q // q.gcd(lcm)
    content = flint.fmpq(g, lcm)
    return -content if coeffs[0] < 0 else content


def _finish(num: flint.fmpq_mpoly, den: flint.fmpq_mpoly, canonical: bool) -> RationalFunction:
    """Scale so the denominator is primitive with a positive leading coefficient."""
    ctx = num.context()
    if den.is_constant():
        return RationalFunction(num / den.leading_coefficient(), ctx.constant(1), canonical)
    c = _content(den)
    if c != 1:
        num = num / c
        den = den / c
    return RationalFunction(num, den, canonical)


def _normalize(num: flint.fmpq_mpoly, den: flint.fmpq_mpoly, reduce: bool | None = None) -> RationalFunction:
    if den.is_zero():
        raise DivisionByZeroFunction("zero denominator")
    if num.is_zero():
        ctx = num.context()
        return RationalFunction(ctx.constant(0), ctx.constant(1))
    if den.is_constant():
        return _finish(num, den, True)
    if reduce is None:
        reduce = len(num) + len(den) <= monomial_budget()
    if reduce:
        g = num.gcd(den)
        if not g.is_one():
            num = num / g
            den = den / g
    return _finish(num, den, reduce)


def _add(a: RationalFunction, b: RationalFunction) -> RationalFunction:
    if a._num.is_zero():
        return b
    if b._num.is_zero():
        return a
    an, bn, ad, bd = _common(a._num, b._num, a._den, b._den)
    if ad == bd:
        if ad.is_one():
            return RationalFunction(an + bn, ad, a.canonical and b.canonical)
        return _normalize(an + bn, ad)
    if ad.is_one():
        return _normalize(_pmul(an, bd) + bn, bd)
    if bd.is_one():
        return _normalize(an + _pmul(bn, ad), ad)
    if len(ad) + len(bd) <= monomial_budget():
        g = ad.gcd(bd)
        if not g.is_one():
            ad_g = ad / g
            bd_g = bd / g
            return _normalize(_pmul(an, bd_g) + _pmul(bn, ad_g), _pmul(ad_g, bd))
    return _normalize(_pmul(an, bd) + _pmul(bn, ad), _pmul(ad, bd))


def _mul(a: RationalFunction, b: RationalFunction) -> RationalFunction:
    if a._num.is_zero() or b._num.is_zero():
        return ZERO
    an, bn, ad, bd = _common(a._num, b._num, a._den, b._den)
    if ad.is_one() and bd.is_one():
        return RationalFunction(_pmul(an, bn), ad, a.canonical and b.canonical)
    budget = monomial_budget()
    if not (a.canonical and b.canonical) or len(an) + len(bn) + len(ad) + len(bd) > budget:
        return _normalize(_pmul(an, bn), _pmul(ad, bd))
    # cross-cancel: each input is coprime, so gcd(an, bd) and gcd(bn, ad) are all that can cancel
    if not bd.is_one():
        g = an.gcd(bd)
        if not g.is_one():
            an, bd = an / g, bd / g
    if not ad.is_one():
        g = bn.gcd(ad)
        if not g.is_one():
            bn, ad = bn / g, ad / g
    return _finish(_pmul(an, bn), _pmul(ad, bd), True)

ZERO = RationalFunction.const(0)
ONE = RationalFunction.const(1)


def rf(x: RationalFunction | Number | str) -> RationalFunction:
    """Convert a number, a name-free expression string, or a function."""
    if isinstance(x, RationalFunction):
        return x
    if isinstance(x, str):
        return parse_rf(x)
    return RationalFunction.const(x)


# operations named after the public contract


def rf_arith(op: str, a: RationalFunction, b: RationalFunction) -> RationalFunction:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown operation {op!r}")


def rf_simplify(a: RationalFunction) -> RationalFunction:
    """Canonical form regardless of the monomial budget."""
    if a.canonical:
        return a
    return _normalize(a._num, a._den, reduce=True)


def rf_eval(a: RationalFunction, v: Valuation) -> Fraction:
    num, den = a._num, a._den
    names = num.context().names()
    if not names:
        return _frac(num.leading_coefficient() if not num.is_zero() else flint.fmpq(0)) / _frac(
            den.leading_coefficient()
        )
    used = set(_used(num)) | set(_used(den))
    args = []
    for n in names:
        if n in used:
            if n not in v:
                raise UnboundParameter(n)
            args.append(_fmpq(Fraction(v[n])))
        else:
            args.append(flint.fmpq(0))
    d = den(*args)
    if d == 0:
        raise DenominatorVanishes(f"denominator of {rf_str(a)} vanishes")
    return _frac(num(*args)) / _frac(d)


def rf_is_constant(a: RationalFunction) -> Fraction | None:
    return rf_simplify(a).constant_value()


def rf_substitute(a: RationalFunction, mapping: Mapping[str, RationalFunction | Number]) -> RationalFunction:
    """Replace parameters by rational functions (or numbers)."""
    hit = a.variables & set(mapping)
    if not hit:
        return a
    numeric = {k: mapping[k] for k in hit if not isinstance(mapping[k], RationalFunction)}
    for k in hit:
        m = mapping[k]
        if isinstance(m, RationalFunction) and m.constant_value() is not None:
            numeric[k] = m.constant_value()
    if len(numeric) == len(hit):
        sub = {k: _fmpq(Fraction(val)) for k, val in numeric.items()}
        num = a._num.subs(sub)
        den = a._den.subs(sub)
        if den.is_zero():
            raise DenominatorVanishes(f"substitution makes the denominator of {rf_str(a)} vanish")
        keep = (set(_used(num)) | set(_used(den)))
        num, den = _shrink(num, keep), _shrink(den, keep)
        return _normalize(num, den)
    subs = {k: rf(mapping[k]) for k in hit}
    return _poly_subst(a._num, subs) / _poly_subst(a._den, subs)


def _poly_subst(p: flint.fmpq_mpoly, subs: Mapping[str, RationalFunction]) -> RationalFunction:
    names = p.context().names()
    total = ZERO
    powers: dict[tuple[str, int], RationalFunction] = {}
    for exps, c in p.terms():
        term = RationalFunction.const(_frac(c))
        for n, e in zip(names, map(int, exps)):
            if not e:
                continue
            base = subs.get(n) or RationalFunction.var(n)
            key = (n, e)
            if key not in powers:
                powers[key] = base**e
            term = term * powers[key]
        total = total + term
    return total


# printing and op counting


def _fmt_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _poly_str(p: flint.fmpq_mpoly) -> str:
    if p.is_zero():
        return "0"
    names = p.context().names()
    parts = []
    for exps, c in p.terms():
        c = _frac(c)
        factors = []
        for n, e in zip(names, exps):
            if e == 1:
                factors.append(n)
            elif e > 1:
                factors.append(f"{n}^{e}")
        mag = abs(c)
        if not factors:
            body = _fmt_coeff(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = _fmt_coeff(mag) + "*" + "*".join(factors)
        if not parts:
            parts.append(("-" if c < 0 else "") + body)
        else:
            parts.append((" - " if c < 0 else " + ") + body)
    return "".join(parts)


def rf_str(a: RationalFunction) -> str:
    num = _poly_str(a._num)
    if a._den.is_one():
        return num
    den = _poly_str(a._den)
    if len(a._num) > 1:
        num = f"({num})"
    if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", den):
        den = f"({den})"
    return f"{num}/{den}"


def _poly_ops(p: flint.fmpq_mpoly) -> int:
    if p.is_zero():
        return 0
    ops = len(p) - 1
    for exps, c in p.terms():
        deg = int(sum(exps))
        if deg:
            ops += deg - 1
            if c != 1 and c != -1:
                ops += 1
    return ops


def count_ops(a) -> int:
    """Binary operations needed to evaluate the printed canonical form.

    Counts one per '+'/'-' joining terms, one per '*' inside a monomial
    (a power x^e costs e-1), one for a non-unit coefficient of a non-constant
    term and one for the division bar. Leading signs and literal fractions
    are free. An expression system counts the sum over its definitions.
    """
    if isinstance(a, RationalFunction):
        ops = _poly_ops(a._num)
        if not a._den.is_one():
            ops += 1 + _poly_ops(a._den)
        return ops
    if hasattr(a, "defs"):
        return sum(count_ops(e) for _, e in a.defs)
    return count_ops(rf(a))


# parsing

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d*)?|\.\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\S))")


def _tokenize(text: str) -> list[tuple[str, str]]:
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        pos = m.end()
        if m.group(1) is not None:
            out.append(("num", m.group(1)))
        elif m.group(2) is not None:
            out.append(("id", m.group(2)))
        else:
            out.append(("op", m.group(3)))
    return out


class _ExprParser:
    def __init__(self, text: str, line: int | None):
        self.toks = _tokenize(text)
        self.i = 0
        self.line = line
        self.text = text
        # one context for the whole expression, so no operand ever needs lifting
        self.ctx = _ctx(tuple(sorted({v for k, v in self.toks if k == "id"})))
        self.one = self.ctx.constant(1)
        self.gens = dict(zip(self.ctx.names(), self.ctx.gens()))

    def fail(self, msg: str) -> ParseError:
        return ParseError(self.line, f"{msg} in expression {self.text.strip()!r}")

    def peek(self) -> tuple[str, str] | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise self.fail("unexpected end")
        self.i += 1
        return tok

    def parse(self) -> RationalFunction:
        if not self.toks:
            raise self.fail("empty expression")
        e = self.expr()
        if self.peek() is not None:
            raise self.fail(f"unexpected token {self.peek()[1]!r}")
        return e

    def expr(self) -> RationalFunction:
        terms = [self.term()]
        while (tok := self.peek()) is not None and tok in (("op", "+"), ("op", "-")):
            self.i += 1
            rhs = self.term()
            terms.append(rhs if tok[1] == "+" else -rhs)
        # pairwise summation keeps long sums from going quadratic
        while len(terms) > 1:
            terms = [terms[k] + terms[k + 1] if k + 1 < len(terms) else terms[k] for k in range(0, len(terms), 2)]
        return terms[0]

    def term(self) -> RationalFunction:
        acc = self.unary()
        while (tok := self.peek()) is not None and tok in (("op", "*"), ("op", "/")):
            self.i += 1
            rhs = self.unary()
            if tok[1] == "*":
                acc = acc * rhs
            else:
                if rhs.is_zero():
                    raise self.fail("division by zero")
                acc = acc / rhs
        return acc

    def unary(self) -> RationalFunction:
        tok = self.peek()
        if tok == ("op", "-"):
            self.i += 1
            return -self.unary()
        if tok == ("op", "+"):
            self.i += 1
            return self.unary()
        return self.power()

    def power(self) -> RationalFunction:
        base = self.atom()
        while self.peek() == ("op", "^"):
            self.i += 1
            kind, text = self.take()
            if kind != "num" or not text.isdigit():
                raise self.fail("exponent must be a non-negative integer")
            base = base ** int(text)
        return base

    def atom(self) -> RationalFunction:
        kind, text = self.take()
        if kind == "num":
            return RationalFunction(self.ctx.constant(_fmpq(Fraction(text))), self.one)
        if kind == "id":
            return RationalFunction(self.gens[text], self.one)
        if text == "(":
            e = self.expr()
            if self.take() != ("op", ")"):
                raise self.fail("missing ')'")
            return e
        raise self.fail(f"unexpected token {text!r}")


def parse_rf(text: str, line: int | None = None) -> RationalFunction:
    """Parse the rational-expression grammar; decimals become exact fractions."""
    return _ExprParser(text, line).parse()


def parse_valuation(text: str) -> dict[str, Fraction]:
    """Parse ``name=value,name=value`` with exact decimal or fraction values."""
    out: dict[str, Fraction] = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, sep, value = item.partition("=")
        if not sep:
            raise ParseError(None, f"expected name=value, got {item!r}")
        try:
            out[name.strip()] = Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(None, f"bad value for {name.strip()!r}: {value!r}") from exc
    return out
