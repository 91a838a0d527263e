"""Seeded sampling of admissible parameter valuations over small rational grids."""

from __future__ import annotations

import random
from fractions import Fraction

from .algebra import rf_eval
from .engine import instantiate
from .errors import AlgebraError, AnalysisError, InadmissibleValuation
from .model import Pdtmc

MAX_DENOMINATOR = 64
MAX_DRAWS = 10_000


class NoAdmissibleValuation(AnalysisError):
    pass


def draw(rng: random.Random, names) -> dict[str, Fraction]:
    v = {}
    for name in sorted(names):
        d = rng.randint(2, MAX_DENOMINATOR)
        v[name] = Fraction(rng.randint(1, d - 1), d)
    return v


def is_admissible(m: Pdtmc, v) -> bool:
    try:
        instantiate(m, v)
        for struct in m.rewards.values():
            for e in struct.values():
                if rf_eval(e, v) < 0:
                    return False
    except (InadmissibleValuation, AlgebraError):
        return False
    return True


def sample_valuations(m: Pdtmc, count: int, seed: int = 0, max_draws: int = MAX_DRAWS) -> list[dict[str, Fraction]]:
    """``count`` admissible valuations of all parameters of ``m``.

    Each parameter gets a value k/d with d uniform in 2..64 and k in 1..d-1;
    draws failing admissibility are rejected. Raises NoAdmissibleValuation
    if ``max_draws`` draws do not yield ``count`` valuations.
    """
    rng = random.Random(seed)
    out = []
    draws = 0
    while len(out) < count:
        if draws >= max_draws:
            raise NoAdmissibleValuation(f"found only {len(out)} admissible valuations in {max_draws} draws")
        draws += 1
        v = draw(rng, m.params)
        if is_admissible(m, v):
            out.append(v)
    return out
