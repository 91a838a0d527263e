"""Command-line front end.

Exit codes: 0 ok, 2 parse or usage error, 3 analysis error, 4 verification
mismatch. Reports and statistics go to standard output.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .abstractor import ExpressionSystem, evaluate_system, fpmc, monolithic_system
from .algebra import parse_valuation
from .dot import to_dot
from .engine import oracle_solve
from .errors import FragmcError, ModelError, ParseError, UnboundParameter
from .fragmenter import fragmentation
from .fx import STRATEGIES, fx_model, fx_source
from .lang import model_to_json, parse_model_explicit, parse_model_text, parse_property
from .lang.explicit import dumps_compact
from .model import Pdtmc
from .sampling import sample_valuations

EXIT_OK, EXIT_USAGE, EXIT_ANALYSIS, EXIT_MISMATCH = 0, 2, 3, 4
MODES = ("auto", "fragmented", "monolithic")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    input_path: str
    property_text: str
    mode: str = "auto"
    alpha: int = 20
    beta: int = 25
    output_path: str | None = None

    def __post_init__(self) -> None:
        if self.alpha < 1 or self.beta < 1:
            raise UsageError("--alpha and --beta must be at least 1")
        if self.mode not in MODES:
            raise UsageError(f"--mode must be one of {', '.join(MODES)}")


def choose_mode(param_count: int, beta: int, mode: str = "auto") -> str:
    """Fragment only when the model has more transition parameters than ``beta``."""
    if mode != "auto":
        return mode
    return "fragmented" if param_count > beta else "monolithic"


def load_model(path: str) -> Pdtmc:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        if path.endswith(".json"):
            return parse_model_explicit(text)
        return parse_model_text(text)
    except ModelError as exc:
        # a model that fails validation is an input error, not an analysis failure
        raise ParseError(None, f"{path}: {exc}") from exc


def load_system(path: str) -> ExpressionSystem:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    return ExpressionSystem.from_json(text)


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _fmt(x: Fraction) -> str:
    return f"{x} ({float(x)})"


# commands


def analyze(cfg: RunConfig) -> dict:
    """Run the analysis, write the system and return the report."""
    m = load_model(cfg.input_path)
    prop = parse_property(cfg.property_text)
    params = len(m.transition_params)
    mode = choose_mode(params, cfg.beta, cfg.mode)
    report: dict = {
        "mode": mode,
        "parameters": params,
        "states": m.n,
        "transitions": m.num_transitions,
        "alpha": cfg.alpha,
        "beta": cfg.beta,
    }
    if mode == "fragmented":
        run = fpmc(m, prop, cfg.alpha)
        system = run.system
        frag = run.fragmentation
        report["fragments"] = len(frag.multi_state)
        report["fragment_sizes"] = sorted((len(f.states) for f in frag.multi_state), reverse=True)
        report["restructured_states"] = frag.model.n
        report["restructured_transitions"] = frag.model.num_transitions
        report["times"] = {k: round(v, 6) for k, v in run.times.items()}
    else:
        t0 = time.perf_counter()
        try:
            system = monolithic_system(m, prop)
        except FragmcError as exc:
            exc.phase = getattr(exc, "phase", None) or "monolithic analysis"
            raise
        report["fragments"] = 0
        report["times"] = {"monolithic": round(time.perf_counter() - t0, 6)}
    report["ops"] = {k: system.meta[f"ops_{k}"] for k in ("total", "abstract", "fragments")}
    if cfg.output_path:
        Path(cfg.output_path).write_text(system.to_json())
    else:
        report["system"] = json.loads(system.to_json())
    return report


def cmd_analyze(args) -> int:
    cfg = RunConfig(args.model, args.prop, args.mode, args.alpha, args.beta, args.out)
    report = analyze(cfg)
    sys.stdout.write(dumps_compact(report))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    system = load_system(args.system)
    v = parse_valuation(args.params or "")
    t0 = time.perf_counter()
    value = evaluate_system(system, v)
    elapsed = time.perf_counter() - t0
    print(_fmt(value))
    print(f"evaluated in {elapsed:.6f} s")
    return EXIT_OK


def cmd_check(args) -> int:
    m = load_model(args.model)
    prop = parse_property(args.prop)
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    valuations = sample_valuations(m, args.trials, args.seed)
    if args.system:
        fragmented = load_system(args.system)
    else:
        fragmented = fpmc(m, prop, args.alpha).system
    try:
        monolithic = monolithic_system(m, prop)
    except FragmcError as exc:
        exc.phase = "monolithic analysis"
        raise
    for i, v in enumerate(valuations):
        want = oracle_solve(m, prop, v)
        got = {"fpmc": evaluate_system(fragmented, v), "monolithic": evaluate_system(monolithic, v)}
        if any(x != want for x in got.values()):
            print(f"MISMATCH at trial {i + 1} of {args.trials}")
            print("witness: " + ",".join(f"{k}={x}" for k, x in sorted(v.items())))
            for k, x in got.items():
                print(f"  {k}: {_fmt(x)}")
            print(f"  oracle: {_fmt(want)}")
            return EXIT_MISMATCH
    print(f"PASS {args.trials}/{args.trials} valuations agree (fpmc = monolithic = oracle)")
    return EXIT_OK


def cmd_generate_fx(args) -> int:
    if args.strategy not in STRATEGIES:
        raise UsageError(f"unknown strategy {args.strategy!r}; choose from {', '.join(STRATEGIES)}")
    try:
        source = fx_source(args.strategy, args.services)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    m = fx_model(args.strategy, args.services)
    base = Path(args.out)
    if base.suffix in (".pm", ".json"):
        base = base.with_suffix("")
    base.with_suffix(".pm").write_text(source)
    base.with_suffix(".json").write_text(model_to_json(m))
    print(f"{base}.pm: {m.n} states, {m.num_transitions} transitions, {len(m.params)} parameters")
    return EXIT_OK


def cmd_export_dot(args) -> int:
    if args.alpha < 1:
        raise UsageError("--alpha must be at least 1")
    m = load_model(args.model)
    prop = parse_property(args.prop)
    _write(args.out, to_dot(fragmentation(m, prop, args.alpha)))
    return EXIT_OK


def cmd_stats(args) -> int:
    system = load_system(args.system)
    ops = system.op_counts()
    width = max(len(n) for n in [*ops, "fragments"])
    for name, n in ops.items():
        print(f"{name:<{width}}  {n}")
    frag = sum(n for k, n in ops.items() if k != system.result)
    print(f"{'total':<{width}}  {sum(ops.values())}")
    print(f"{'fragments':<{width}}  {frag}")
    print(f"{'abstract':<{width}}  {ops[system.result]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fragmc", description="Fragmentation-based parametric model checking of pDTMCs.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="compute the closed-form expression system of a property")
    a.add_argument("model")
    a.add_argument("--prop", required=True)
    a.add_argument("--mode", choices=MODES, default="auto")
    a.add_argument("--alpha", type=int, default=20)
    a.add_argument("--beta", type=int, default=25)
    a.add_argument("--out", help="file for the expression system JSON; embedded in the report if omitted")
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("evaluate", help="evaluate an expression system at a parameter valuation")
    e.add_argument("system")
    e.add_argument("--params", help="name=value,... with exact decimals or fractions")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("check", help="compare fPMC, monolithic and numeric results at sampled valuations")
    c.add_argument("model")
    c.add_argument("--prop", required=True)
    c.add_argument("--trials", type=int, default=20)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--alpha", type=int, default=20)
    c.add_argument("--system", help="check this expression system instead of computing one")
    c.set_defaults(func=cmd_check)

    g = sub.add_parser("generate-fx", help="write an FX workflow model as .pm and .json")
    g.add_argument("--strategy", required=True)
    g.add_argument("--services", type=int, default=1)
    g.add_argument("--out", required=True, help="output path; the .pm and .json suffixes are added")
    g.set_defaults(func=cmd_generate_fx)

    d = sub.add_parser("export-dot", help="render the fragmented model as Graphviz DOT")
    d.add_argument("model")
    d.add_argument("--prop", required=True)
    d.add_argument("--alpha", type=int, default=20)
    d.add_argument("--out")
    d.set_defaults(func=cmd_export_dot)

    s = sub.add_parser("stats", help="operation counts of an expression system")
    s.add_argument("system")
    s.set_defaults(func=cmd_stats)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, UnboundParameter) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FragmcError as exc:
        phase = getattr(exc, "phase", None)
        where = f" during {phase}" if phase else ""
        print(f"error{where}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
