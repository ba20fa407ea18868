import csv
import io
import json

from mpgame.cli import EXIT_FAIL, EXIT_OK, EXIT_RESOURCE, EXIT_USAGE, cmd_play, main, parse_args
from mpgame.game import Transcript


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cylinders_csv(capsys):
    code, out, _ = run(capsys, "cylinders", "--gamma", "1", "--generation", "2", "--max-symbol", "5")
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["itinerary", "left", "right", "width"]
    assert len(rows) == 26
    assert rows[1][0] == "1 1" and rows[-1][0] == "5 5"


def test_cylinders_budget(capsys):
    code, _, err = run(capsys, "cylinders", "--generation", "9", "--max-symbol", "10")
    assert code == EXIT_RESOURCE and "resource" in err


def test_simulate_example(capsys):
    code, out, _ = run(capsys, "simulate", "--gamma", "1", "--beta", "0.3", "--bob", "squeeze_left",
                       "--rounds", "60")
    assert code == EXIT_OK
    t = Transcript.from_json(out)
    assert t.reports["invariants"]["passed"] and t.reports["avoidance"]["status"] == "pass"


def test_simulate_zero_rounds(capsys):
    code, out, _ = run(capsys, "simulate", "--rounds", "0")
    assert code == EXIT_OK
    assert len(json.loads(out)["history"]) == 1


def test_usage_errors(capsys, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("gamma 1\n")
    assert run(capsys, "simulate", "--config", str(bad))[0] == EXIT_USAGE
    assert run(capsys, "simulate", "--config", str(tmp_path / "missing.cfg"))[0] == EXIT_USAGE
    assert run(capsys, "simulate", "--rounds", "-1")[0] == EXIT_USAGE
    assert run(capsys, "nonsense")[0] == EXIT_USAGE
    assert run(capsys, "simulate", "--gamma", "-1")[0] == EXIT_USAGE


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "g.cfg"
    cfg.write_text("# a game\ngamma = 2\nbeta = 0.6\nrounds = 10\n")
    args = parse_args(["simulate", "--config", str(cfg), "--beta", "0.1"])
    assert args.gamma == 2 and args.beta == 0.1 and args.rounds == 10


def test_constants_json(capsys):
    code, out, _ = run(capsys, "constants", "--gamma", "1", "-N", "200")
    assert code == EXIT_OK
    d = json.loads(out)
    assert float(d["C4_hat"]) > float(d["C3_hat"]) >= 1


def test_dimension_json(capsys):
    code, out, _ = run(capsys, "dimension", "--gamma", "1", "--K", "2,5,10", "--depth", "3")
    assert code == EXIT_OK
    d = json.loads(out)
    assert d["nondecreasing"] and len(d["reports"]) == 3


def test_scripted_play_matches_simulate(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--gamma", "1", "--beta", "0.3", "--bob", "random", "--seed", "4",
                       "--rounds", "12", "--prec", "512")
    assert code == EXIT_OK
    ref = Transcript.from_json(out)
    script = tmp_path / "bob.json"
    script.write_text(json.dumps(ref.bob_script()))
    code, out, _ = run(capsys, "simulate", "--gamma", "1", "--beta", "0.3", "--bob", "scripted",
                       "--script", str(script), "--rounds", "12", "--prec", "512")
    assert code == EXIT_OK
    assert Transcript.from_json(out).history == ref.history
    # the same moves typed by a human
    stdin = io.StringIO("".join(f"{a} {b}\n" for a, b in ref.bob_script()))
    args = parse_args(["play", "--gamma", "1", "--beta", "0.3", "--rounds", "12", "--prec", "512",
                       "--out", str(tmp_path / "human.json")])
    prompts = io.StringIO()
    assert cmd_play(args, stdin, prompts) == EXIT_OK
    human = Transcript.from_json((tmp_path / "human.json").read_text())
    assert human.history == ref.history


def test_play_reprompts_and_resigns(tmp_path):
    out = tmp_path / "t.json"
    args = parse_args(["play", "--gamma", "1", "--beta", "0.3", "--rounds", "5", "--out", str(out)])
    prompts = io.StringIO()
    code = cmd_play(args, io.StringIO("0.1 0.2\nhello\nq\n"), prompts)
    text = prompts.getvalue()
    assert "nesting rule" in text and "enter two decimal endpoints" in text
    t = Transcript.from_json(out.read_text())
    assert t.status == "resigned" and t.rounds == 0 and len(t.history) == 1
    assert code in (EXIT_OK, EXIT_FAIL)
