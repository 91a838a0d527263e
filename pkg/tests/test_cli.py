import json
import re
from pathlib import Path

import pytest

from fragmc.abstractor import ExpressionSystem
from fragmc.algebra import rf
from fragmc.cli import RunConfig, UsageError, choose_mode, main
from fragmc.fx import fx_model
from fragmc.lang import parse_model_explicit, parse_model_text

GOLDEN = Path(__file__).parent / "golden"
M1 = str(GOLDEN / "m1.pm")
FIVE = str(GOLDEN / "five.json")
GOAL = 'P=? [ F "goal" ]'


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def fx(tmp_path_factory):
    d = tmp_path_factory.mktemp("fx")
    assert main(["generate-fx", "--strategy", "seq_r", "--services", "2", "--out", str(d / "seq_r2")]) == 0
    assert main(["generate-fx", "--strategy", "seq_r", "--services", "1", "--out", str(d / "seq_r1.pm")]) == 0
    return d


class TestAnalyze:
    def test_retry_loop_goes_monolithic(self, capsys):
        code, out, _ = run(capsys, "analyze", M1, "--prop", GOAL)
        assert code == 0
        report = json.loads(out)
        assert report["mode"] == "monolithic" and report["parameters"] == 2
        system = ExpressionSystem.from_json(json.dumps(report["system"]))
        assert system.defs == [("result", rf("p/(1-q)"))]

    def test_fx_goes_fragmented(self, capsys, fx, tmp_path):
        out_file = tmp_path / "sys.json"
        code, out, _ = run(capsys, "analyze", fx / "seq_r2.pm", "--prop", 'P=? [ F "successFX" ]', "--alpha", 5, "--out", out_file)
        assert code == 0
        report = json.loads(out)
        assert report["mode"] == "fragmented" and report["parameters"] > 25
        assert report["fragments"] >= 2
        assert all(t >= 0 for t in report["times"].values())
        system = ExpressionSystem.from_json(out_file.read_text())
        assert report["ops"]["total"] == system.meta["ops_total"] == sum(system.op_counts().values())

    def test_unsupported_property(self, capsys):
        code, _, err = run(capsys, "analyze", M1, "--prop", 'P=? [ X "a" ]')
        assert code == 2 and "UnsupportedOperator" in err

    def test_analysis_error_names_phase(self, capsys):
        code, _, err = run(capsys, "analyze", M1, "--prop", 'R{"steps"}=? [ F "goal" ]')
        assert code == 3 and "InfiniteReward" in err and "monolithic analysis" in err
        code, _, err = run(capsys, "analyze", M1, "--prop", 'R{"steps"}=? [ F "goal" ]', "--mode", "fragmented")
        assert code == 3 and "InfiniteReward" in err and "abstract analysis" in err

    def test_bad_flags(self, capsys):
        assert run(capsys, "analyze", M1, "--prop", GOAL, "--alpha", 0)[0] == 2
        assert run(capsys, "analyze", M1, "--prop", GOAL, "--mode", "fast")[0] == 2
        assert run(capsys, "analyze", "/nonexistent.pm", "--prop", GOAL)[0] == 2
        assert run(capsys, "frobnicate")[0] == 2

    def test_invalid_model_is_a_parse_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        doc = json.loads(Path(FIVE).read_text())
        doc["transitions"][1]["expr"] = "a/2"
        bad.write_text(json.dumps(doc))
        code, _, err = run(capsys, "analyze", bad, "--prop", GOAL)
        assert code == 2 and "sum" in err


class TestMode:
    def test_threshold(self):
        assert choose_mode(25, 25) == "monolithic"
        assert choose_mode(26, 25) == "fragmented"
        assert choose_mode(2, 25, "fragmented") == "fragmented"

    def test_renaming_invariance(self):
        src = (GOLDEN / "m1.pm").read_text()
        renamed = parse_model_text(re.sub(r"\bq\b", "omega", re.sub(r"\bp\b", "zeta", src)))
        assert renamed.transition_params == {"zeta", "omega"}
        original = parse_model_text(src)
        for beta in (1, 2, 3):
            assert choose_mode(len(original.transition_params), beta) == choose_mode(len(renamed.transition_params), beta)

    def test_reward_parameters_not_counted(self):
        m = fx_model("seq", 1)
        assert len(m.transition_params) == 5 + 6
        assert len(m.params) == 5 + 6 * 3

    def test_config_validation(self):
        with pytest.raises(UsageError):
            RunConfig("m.pm", GOAL, beta=0)


class TestEvaluate:
    @pytest.fixture
    def two_branch(self, tmp_path):
        p = tmp_path / "m2.json"
        p.write_text(json.dumps({"params": ["p", "t1", "t2"], "defs": [{"name": "result", "expr": "p*t1 + (1-p)*t2"}], "result": "result"}))
        return p

    def test_value(self, capsys, two_branch):
        code, out, _ = run(capsys, "evaluate", two_branch, "--params", "p=1/2,t1=2,t2=4")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "3 (3.0)"
        assert lines[1].startswith("evaluated in ")

    def test_missing_binding(self, capsys, two_branch):
        code, _, err = run(capsys, "evaluate", two_branch, "--params", "p=1/2")
        assert code == 2 and "t1" in err

    def test_vanishing_denominator(self, capsys, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps({"params": ["q"], "defs": [{"name": "result", "expr": "1/(1-q)"}], "result": "result"}))
        code, _, err = run(capsys, "evaluate", p, "--params", "q=1")
        assert code == 3 and "DenominatorVanishes" in err


class TestCheck:
    def test_retry_loop(self, capsys):
        code, out, _ = run(capsys, "check", M1, "--prop", GOAL, "--trials", 20)
        assert code == 0 and out.startswith("PASS 20/20")

    def test_fx_reward_one_service(self, capsys, fx):
        code, out, _ = run(capsys, "check", fx / "seq_r1.pm", "--prop", 'R{"time"}=? [ F "failedFX" | "successFX" ]', "--trials", 20, "--alpha", 5)
        assert code == 0, out

    def test_fx_reward_two_services_monolithic_over_budget(self, capsys, fx):
        # the monolithic leg of the triple does not fit in the term limit; reported, not skipped
        code, _, err = run(capsys, "check", fx / "seq_r2.pm", "--prop", 'R{"time"}=? [ F "failedFX" | "successFX" ]', "--trials", 2, "--alpha", 5)
        assert code == 3 and "BudgetExceeded" in err and "monolithic" in err

    def test_corrupted_system(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"params": ["p", "q"], "defs": [{"name": "result", "expr": "p/(1-q) + p/1000"}], "result": "result"}))
        code, out, _ = run(capsys, "check", M1, "--prop", GOAL, "--system", bad)
        assert code == 4
        assert "MISMATCH" in out and "witness: p=" in out

    def test_no_admissible_valuation(self, capsys, tmp_path):
        # p - p^2 is positive on (0,1), so sampling succeeds; -p never is
        model = tmp_path / "m.json"
        model.write_text(json.dumps({
            "states": 2, "init": 0,
            "transitions": [{"from": 0, "to": 0, "expr": "p^2 - p + 1"}, {"from": 0, "to": 1, "expr": "p - p^2"}, {"from": 1, "to": 1, "expr": "1"}],
            "labels": {"goal": [1]}, "rewards": {}, "params": ["p"],
        }))
        assert run(capsys, "check", model, "--prop", GOAL, "--trials", 2)[0] == 0
        never = tmp_path / "never.json"
        never.write_text(json.dumps({
            "states": 2, "init": 0,
            "transitions": [{"from": 0, "to": 0, "expr": "1 + p"}, {"from": 0, "to": 1, "expr": "-p"}, {"from": 1, "to": 1, "expr": "1"}],
            "labels": {"goal": [1]}, "rewards": {}, "params": ["p"],
        }))
        code, _, err = run(capsys, "check", never, "--prop", GOAL, "--trials", 2)
        assert code == 3 and "NoAdmissibleValuation" in err


class TestGenerate:
    def test_seq_r_two(self, capsys, tmp_path):
        code, out, _ = run(capsys, "generate-fx", "--strategy", "seq_r", "--services", 2, "--out", tmp_path / "fx")
        assert code == 0
        m = parse_model_text((tmp_path / "fx.pm").read_text())
        assert (m.n, m.num_transitions) == (29, 58)
        j = parse_model_explicit((tmp_path / "fx.json").read_text())
        assert (j.n, j.num_transitions) == (29, 58)

    def test_single_service_identical(self, tmp_path):
        texts = set()
        for s in ("seq", "seq_r", "par", "prob", "prob_r"):
            assert main(["generate-fx", "--strategy", s, "--services", "1", "--out", str(tmp_path / s)]) == 0
            m = parse_model_text((tmp_path / f"{s}.pm").read_text())
            assert (m.n, m.num_transitions) == (11, 22)
            texts.add((tmp_path / f"{s}.json").read_text())
        assert len(texts) == 1

    def test_prob_three(self, tmp_path):
        assert main(["generate-fx", "--strategy", "prob", "--services", "3", "--out", str(tmp_path / "p3")]) == 0
        m = parse_model_text((tmp_path / "p3.pm").read_text())
        # profile and success parameters, plus two stick-breaking selection parameters per operation
        assert len(m.transition_params) == 5 + 6 * 3 + 6 * 2

    @pytest.mark.parametrize("argv", [["--strategy", "fast", "--services", "2"], ["--strategy", "seq", "--services", "6"], ["--strategy", "seq", "--services", "0"]])
    def test_invalid(self, capsys, tmp_path, argv):
        assert run(capsys, "generate-fx", *argv, "--out", tmp_path / "x")[0] == 2


class TestExportDot:
    def test_retry_loop_golden(self, capsys):
        code, out, _ = run(capsys, "export-dot", M1, "--prop", GOAL)
        assert code == 0
        assert out == (GOLDEN / "m1.dot").read_text()
        assert out.count("subgraph cluster_") == 1
        assert 'style="dashed"' in out  # the auxiliary state

    def test_five_state_golden(self, capsys, tmp_path):
        dest = tmp_path / "five.dot"
        assert run(capsys, "export-dot", FIVE, "--prop", GOAL, "--alpha", 5, "--out", dest)[0] == 0
        text = dest.read_text()
        assert text == (GOLDEN / "five.dot").read_text()
        assert 'label="F0 ({1,2,3},1,{2,3})"' in text
        assert "1 [label=\"1\", peripheries=2" in text
        assert text.count('fillcolor="#bbbbbb"') == 2

    def test_empty_target(self, capsys):
        code, _, err = run(capsys, "export-dot", M1, "--prop", 'P=? [ F "goal" & "fail" ]')
        assert code == 3 and "EmptyTargetSet" in err


class TestStats:
    def test_single_definition(self, capsys, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps({"params": ["p", "q"], "defs": [{"name": "result", "expr": "p/(1-q)"}], "result": "result"}))
        code, out, _ = run(capsys, "stats", p)
        assert code == 0
        rows = dict(line.split() for line in out.splitlines())
        assert rows["total"] == rows["result"] == "2"

    def test_five_state_golden(self, capsys):
        code, out, _ = run(capsys, "stats", GOLDEN / "five_system.json")
        assert code == 0 and out == (GOLDEN / "five_stats.txt").read_text()
        assert len(out.splitlines()) == 3 + 3

    def test_folded_system_has_no_constant_rows(self, capsys, tmp_path):
        dest = tmp_path / "sys.json"
        assert main(["analyze", str(GOLDEN / "m1.pm"), "--prop", GOAL, "--mode", "fragmented", "--alpha", "2", "--out", str(dest)]) == 0
        system = ExpressionSystem.from_json(dest.read_text())
        assert all(e.constant_value() is None for n, e in system.defs if n != system.result)

    def test_malformed(self, capsys, tmp_path):
        p = tmp_path / "s.json"
        p.write_text("{not json")
        assert run(capsys, "stats", p)[0] == 2


def test_deterministic_outputs(capsys, tmp_path):
    outs = []
    for k in range(2):
        sys_file = tmp_path / f"sys{k}.json"
        _, report, _ = run(capsys, "analyze", FIVE, "--prop", GOAL, "--mode", "fragmented", "--alpha", 5, "--out", sys_file)
        _, dot, _ = run(capsys, "export-dot", FIVE, "--prop", GOAL, "--alpha", 5)
        _, stats, _ = run(capsys, "stats", sys_file)
        r = json.loads(report)
        r.pop("times")
        outs.append((json.dumps(r), sys_file.read_bytes(), dot, stats))
    assert outs[0] == outs[1]
