"""Fragmentation-based parametric model checking of discrete-time Markov chains.

The model is split into fragments with a single entry state, each fragment
is summarised by closed-form exit probabilities (and an exit reward), and
the property is then computed on the much smaller abstract model whose
transitions refer to those summaries. The result is an ordered expression
system that evaluates to the same value as analysing the whole model at once.

    >>> from fragmc import fpmc, parse_property, evaluate_system
    >>> from fragmc.corpus import m1
    >>> run = fpmc(m1(), parse_property('P=? [ F "goal" ]'), 3)
    >>> evaluate_system(run.system, {"p": 1/2, "q": 1/4})
    Fraction(2, 3)
"""

from .abstractor import ExpressionSystem, evaluate_system, fold_constants, fpmc, monolithic_system
from .algebra import RationalFunction, count_ops, parse_rf, rf, rf_eval, rf_simplify, rf_substitute
from .engine import oracle_solve, pmc
from .errors import FragmcError
from .fragmenter import FragmentationConfig, fragmentation
from .lang import model_to_json, parse_model_explicit, parse_model_text, parse_property
from .model import Fragment, Pdtmc, validate_pdtmc

__all__ = [
    "ExpressionSystem", "Fragment", "FragmcError", "FragmentationConfig", "Pdtmc", "RationalFunction",
    "count_ops", "evaluate_system", "fold_constants", "fpmc", "fragmentation", "model_to_json", "monolithic_system",
    "oracle_solve", "parse_model_explicit", "parse_model_text", "parse_property", "parse_rf", "pmc", "rf",
    "rf_eval", "rf_simplify", "rf_substitute", "validate_pdtmc",
]
