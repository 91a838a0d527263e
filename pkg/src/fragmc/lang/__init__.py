"""Input languages: guarded commands, explicit JSON and the property subset."""

from .explicit import model_to_json, parse_model_explicit
from .modelfile import parse_model_text
from .props import (
    And, Atom, FalseF, Kind, Not, Or, PropertySpec, StateFormula, TrueF, eval_state_formula, parse_property, state_sets,
)

__all__ = [
    "And", "Atom", "FalseF", "Kind", "Not", "Or", "PropertySpec", "StateFormula", "TrueF",
    "eval_state_formula", "state_sets", "model_to_json", "parse_model_explicit", "parse_model_text", "parse_property",
]
