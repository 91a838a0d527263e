"""Explicit JSON model format."""

from __future__ import annotations

import json

from ..algebra import parse_rf
from ..errors import BadIndex, ParseError
from ..model import Pdtmc, validate_pdtmc

RESERVED_PREFIX = "__"


def check_reserved(names, line: int | None = None) -> None:
    for name in names:
        if name.startswith(RESERVED_PREFIX):
            raise ParseError(line, f"parameter name {name!r} uses the reserved prefix {RESERVED_PREFIX!r}")


def _int(obj, what: str) -> int:
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise ParseError(None, f"{what} must be an integer, got {obj!r}")
    return obj


def parse_model_explicit(src: str, validate: bool = True, allow_reserved: bool = False) -> Pdtmc:
    try:
        doc = json.loads(src)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError(None, "model must be a JSON object")
    for key in ("states", "init", "transitions"):
        if key not in doc:
            raise ParseError(None, f"missing field {key!r}")
    n = _int(doc["states"], "states")
    if n < 1:
        raise ParseError(None, "a model needs at least one state")
    init = _int(doc["init"], "init")
    rows: list[dict] = [{} for _ in range(n)]
    for tr in doc["transitions"]:
        try:
            s, t, expr = _int(tr["from"], "from"), _int(tr["to"], "to"), tr["expr"]
        except (KeyError, TypeError) as exc:
            raise ParseError(None, f"malformed transition {tr!r}") from exc
        if not (0 <= s < n and 0 <= t < n):
            raise BadIndex(f"transition ({s},{t}) outside 0..{n - 1}")
        if t in rows[s]:
            raise ParseError(None, f"duplicate transition ({s},{t})")
        rows[s][t] = parse_rf(str(expr))
    labels = {name: [_int(s, "label state") for s in states] for name, states in doc.get("labels", {}).items()}
    rewards = {}
    for name, struct in doc.get("rewards", {}).items():
        try:
            rewards[name] = {int(s): parse_rf(str(e)) for s, e in struct.items()}
        except ValueError as exc:
            raise ParseError(None, f"reward {name!r}: state keys must be integers") from exc
    params = doc.get("params", [])
    m = Pdtmc(n, init, rows, labels=labels, rewards=rewards, params=params, aux=doc.get("aux", []))
    if not allow_reserved:
        check_reserved(m.params)
    undeclared = m.params - set(params)
    if "params" in doc and undeclared:
        raise ParseError(None, f"undeclared parameters: {', '.join(sorted(undeclared))}")
    if validate:
        validate_pdtmc(m)
    return m


def model_to_json(m: Pdtmc) -> str:
    """Deterministic JSON text; parse_model_explicit inverts it exactly."""
    doc = {
        "states": m.n,
        "init": m.init,
        "transitions": [{"from": s, "to": t, "expr": str(e)} for s, t, e in m.transitions()],
        "labels": {k: sorted(v) for k, v in sorted(m.labels.items())},
        "rewards": {k: {str(s): str(e) for s, e in sorted(v.items())} for k, v in sorted(m.rewards.items())},
        "params": sorted(m.params),
    }
    if m.aux:
        doc["aux"] = sorted(m.aux)
    return dumps_compact(doc)


def dumps_compact(doc: dict) -> str:
    """Top-level keys and list items one per line, everything else inline."""
    lines = ["{"]
    keys = list(doc)
    for k, key in enumerate(keys):
        value = doc[key]
        sep = "," if k < len(keys) - 1 else ""
        if isinstance(value, list) and value and isinstance(value[0], dict):
            items = [f"  {json.dumps(item)}" for item in value]
            lines.append(f" {json.dumps(key)}: [")
            lines.append(",\n".join(items))
            lines.append(f" ]{sep}")
        else:
            lines.append(f" {json.dumps(key)}: {json.dumps(value)}{sep}")
    lines.append("}")
    return "\n".join(lines) + "\n"
