"""Generator for the foreign-exchange trading workflow used as a benchmark.

Six operations (market watch, technical analysis, fundamental analysis,
alarm, order, notification), each implemented by ``services`` equivalent
services combined by one of five strategies. With a single service every
strategy gives the same 11-state model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import Pdtmc

STRATEGIES = ("seq", "seq_r", "par", "prob", "prob_r")
OPERATIONS = ("MarketWatch", "TechnicalAnalysis", "FundamentalAnalysis", "Alarm", "Order", "Notification")
MW, TA, FA, ALARM, ORDER, NOTIF = range(1, 7)
MAX_SERVICES = 5

PROPERTIES = {
    "P1": 'P=? [ F "successFX" ]',
    "P2": 'R{"time"}=? [ F "failedFX" | "successFX" ]',
    "P3": 'P=? [ !"Alarm" U "successFX" ]',
    "P4": 'R{"cost"}=? [ F "failedFX" | "successFX" ]',
}


@dataclass
class _Builder:
    n: int = 0
    commands: list[tuple[int, list[tuple[str, int]]]] = field(default_factory=list)
    time: dict[int, str] = field(default_factory=dict)
    cost: dict[int, str] = field(default_factory=dict)
    params: list[str] = field(default_factory=list)

    def state(self) -> int:
        self.n += 1
        return self.n - 1

    def param(self, name: str) -> str:
        if name not in self.params:
            self.params.append(name)
        return name


def _product(factors: list[str]) -> str:
    return "*".join(factors) if factors else "1"


def _operation(b: _Builder, i: int, strategy: str, services: int, nxt: int, fail: int) -> tuple[int, list[int]]:
    """Emit the states of operation ``i``; returns its entry state and all its states."""
    if services == 1:
        s = b.state()
        p = b.param(f"p{i}1")
        b.commands.append((s, [(p, nxt), (f"1-{p}", fail)]))
        b.time[s] = b.param(f"t{i}1")
        b.cost[s] = b.param(f"c{i}1")
        return s, [s]
    js = range(1, services + 1)
    if strategy == "par":
        s = b.state()
        ps = [b.param(f"p{i}{j}") for j in js]
        all_fail = _product([f"(1-{p})" for p in ps])
        b.commands.append((s, [(f"1-{all_fail}", nxt), (all_fail, fail)]))
        ts = [b.param(f"t{i}{j}") for j in js]
        b.time[s] = f"({'+'.join(ts)})/{services}"
        b.cost[s] = "+".join(b.param(f"c{i}{j}") for j in js)
        return s, [s]
    if strategy in ("seq", "seq_r"):
        invoke = [b.state() for _ in js]
        retry = [b.state() for _ in js] if strategy == "seq_r" else []
        for k, j in enumerate(js):
            p = b.param(f"p{i}{j}")
            after = invoke[k + 1] if k + 1 < services else fail
            b.time[invoke[k]] = b.param(f"t{i}{j}")
            b.cost[invoke[k]] = b.param(f"c{i}{j}")
            if strategy == "seq":
                b.commands.append((invoke[k], [(p, nxt), (f"1-{p}", after)]))
            else:
                b.commands.append((invoke[k], [(p, nxt), (f"1-{p}", retry[k])]))
                r = b.param(f"r{i}{j}")
                b.commands.append((retry[k], [(r, invoke[k]), (f"1-{r}", after)]))
        return invoke[0], invoke + retry
    # prob, prob_r: stick-breaking selection q_i1, (1-q_i1)*q_i2, ..., so any q in (0,1) is admissible
    select = b.state()
    invoke = [b.state() for _ in js]
    retry = b.state() if strategy == "prob_r" else None
    choice = []
    rest: list[str] = []
    for k, j in enumerate(js):
        if k + 1 < services:
            q = b.param(f"q{i}{j}")
            choice.append((_product(rest + [q]), invoke[k]))
            rest.append(f"(1-{q})")
        else:
            choice.append((_product(rest), invoke[k]))
    b.commands.append((select, choice))
    on_fail = retry if retry is not None else fail
    for k, j in enumerate(js):
        p = b.param(f"p{i}{j}")
        b.time[invoke[k]] = b.param(f"t{i}{j}")
        b.cost[invoke[k]] = b.param(f"c{i}{j}")
        b.commands.append((invoke[k], [(p, nxt), (f"1-{p}", on_fail)]))
    states = [select] + invoke
    if retry is not None:
        r = b.param(f"r{i}")
        b.commands.append((retry, [(r, select), (f"1-{r}", fail)]))
        states.append(retry)
    return select, states


def fx_source(strategy: str, services: int) -> str:
    """Guarded-command source of the FX model."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")
    if not 1 <= services <= MAX_SERVICES:
        raise ValueError(f"services must be between 1 and {MAX_SERVICES}")
    b = _Builder()
    for name in ("x", "y1", "y2", "z1", "z2"):
        b.param(name)
    start, ta_dec, fa_dec, success, fail = (b.state() for _ in range(5))
    # operations are emitted back to front so each knows its successor's entry state
    notif, notif_states = _operation(b, NOTIF, strategy, services, success, fail)
    order, _ = _operation(b, ORDER, strategy, services, notif, fail)
    alarm, alarm_states = _operation(b, ALARM, strategy, services, notif, fail)
    fa, _ = _operation(b, FA, strategy, services, fa_dec, fail)
    ta, _ = _operation(b, TA, strategy, services, ta_dec, fail)
    mw, _ = _operation(b, MW, strategy, services, ta, fail)
    b.commands.append((start, [("x", mw), ("1-x", fa)]))
    b.commands.append((ta_dec, [("y1", order), ("y2", mw), ("1-y1-y2", alarm)]))
    b.commands.append((fa_dec, [("z1", order), ("z2", fa), ("1-z1-z2", success)]))
    b.commands.append((success, [("1", success)]))
    b.commands.append((fail, [("1", fail)]))

    lines = ["// FX workflow, strategy " + strategy + f", {services} service(s) per operation", "dtmc", ""]
    group = {"x": 0, "y": 0, "z": 0, "p": 1, "q": 1, "r": 1, "t": 2, "c": 3}
    lines += [f"const double {p};" for p in sorted(b.params, key=lambda p: (group[p[0]], p[1:], p[0]))]
    lines += ["", "module WorkflowFX", f"  s : [0..{b.n - 1}] init {start};"]
    for s, updates in sorted(b.commands):
        rhs = " + ".join(f"{e} : (s'={t})" for e, t in updates)
        lines.append(f"  [] s={s} -> {rhs};")
    lines.append("endmodule")
    for name, struct in (("time", b.time), ("cost", b.cost)):
        lines += ["", f'rewards "{name}"']
        lines += [f"  s={s} : {e};" for s, e in sorted(struct.items())]
        lines.append("endrewards")
    lines += [
        "",
        f'label "successFX" = s={success};',
        f'label "failedFX" = s={fail};',
        'label "Alarm" = ' + " | ".join(f"s={s}" for s in sorted(alarm_states)) + ";",
    ]
    return "\n".join(lines) + "\n"


def fx_model(strategy: str, services: int) -> Pdtmc:
    from .lang.modelfile import parse_model_text

    return parse_model_text(fx_source(strategy, services))
