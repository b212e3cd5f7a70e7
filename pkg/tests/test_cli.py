import json

import pytest

from insurelab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_uniform_class(capsys):
    code, out, _ = run(capsys, "simulate", "--class", "uniform", "--max-M", "50", "--scheme",
                       "doubling", "--eta", "0.1", "--horizon", "500", "--trials", "200",
                       "--seed", "7", "--assert-eta")
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["scheme"] == {"scheme": "doubling", "eta": 0.1}
    assert doc["pooled"]["trials"] == 200


def test_simulate_guarantee_violation(capsys):
    # a table scheme that enters at once with dominant 0 fails on uniform {1, 2}
    pmf = json.dumps({"kind": "finite", "support": [1, 2], "probs": [0.5, 0.5]})
    scheme = json.dumps({"scheme": "table", "dominants": [0]})
    code, _, _ = run(capsys, "simulate", "--pmf", pmf, "--scheme", scheme, "--eta", "0.1",
                     "--horizon", "5", "--trials", "100", "--assert-eta")
    assert code == 2


def test_simulate_rerun_from_saved_config_is_identical(capsys, tmp_path):
    argv = ["simulate", "--pmf", '{"kind":"geometric","rho":0.3}', "--scheme", "doubling",
            "--eta", "0.2", "--horizon", "100", "--trials", "300", "--seed", "5"]
    _, first, _ = run(capsys, *argv)
    cfg = json.loads(first)["config"]
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    _, second, _ = run(capsys, "simulate", "--config", str(path))
    assert first == second


def test_simulate_csv(capsys, tmp_path):
    out = tmp_path / "r.csv"
    code, _, _ = run(capsys, "simulate", "--pmf", '{"kind":"finite","support":[0],"probs":[1]}',
                     "--scheme", "doubling", "--eta", "0.2", "--horizon", "10", "--trials", "10",
                     "--format", "csv", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "trial_count,horizon,bankruptcies,estimate,wilson_low,wilson_high,never_entered,seed"
    assert len(lines) == 2


def test_malformed_config(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "simulate", "--config", str(bad))
    assert code == 64 and "JSON" in err


def test_missing_settings(capsys):
    assert run(capsys, "simulate", "--scheme", "doubling", "--eta", "0.1")[0] == 64


def test_attack_doubling(capsys):
    code, out, _ = run(capsys, "attack", "--scheme", "doubling", "--eta", "0.25",
                       "--exact-horizon", "9", "--mc-trials", "2000")
    assert code == 0
    doc = json.loads(out)
    assert doc["certificate"]["analytic_lower_bound"] == pytest.approx(0.277, abs=1e-3)
    assert doc["exact_bankruptcy"] == pytest.approx(0.89 ** 4 - 0.89 ** 9, abs=1e-12)
    assert doc["certificate"]["grid"] == 1000


def test_attack_entropy_shortfall(capsys):
    code, out, _ = run(capsys, "attack", "--scheme", "entropy", "--h", "1", "--eta", "0.25")
    assert code == 3
    assert json.loads(out)["achieved"]["achieved_bound"] == 0.0


def test_attack_deceptive_mode_notes_its_scope(capsys):
    code, out, _ = run(capsys, "attack", "--mode", "deceptive", "--scheme", "doubling", "--eta",
                       "0.25", "--pmf", '{"kind":"finite","support":[0],"probs":[1]}',
                       "--epsilon", "0.5", "--trials", "1000")
    assert code == 0
    doc = json.loads(out)
    assert "demonstration" in doc["note"]
    assert doc["report"]["estimate"] >= 0.25


def test_verify_lemmas(capsys):
    code, out, _ = run(capsys, "verify-lemmas", "--lemma", "dist", "--trials", "2000", "--seed", "1")
    assert code == 0 and json.loads(out)["passed"]
    code, out, _ = run(capsys, "verify-lemmas", "--lemma", "yeung", "--grid", "default",
                       "--trials", "2000")
    assert code == 0
    assert json.loads(out)["suites"][0]["worst_margin"] > 0


def test_unknown_lemma(capsys):
    assert run(capsys, "verify-lemmas", "--lemma", "nope")[0] == 64


def test_convert_agreement(capsys, tmp_path):
    code, out, _ = run(capsys, "convert", "--scheme", "doubling", "--eta", "0.25",
                       "--path", "0,0,0,0,1")
    doc = json.loads(out)
    assert code == 0 and doc["domination_step"] == doc["round_trip_step"] == 5
    f = tmp_path / "zeros.txt"
    f.write_text("0 0 0 0 0 0")
    code, out, _ = run(capsys, "convert", "--scheme", "doubling", "--eta", "0.25",
                       "--path-file", str(f))
    assert code == 0 and json.loads(out)["domination_step"] is None


def test_convert_insurance_file(capsys):
    ins = json.dumps({"entry_at": 1, "premiums": [0, 2], "initial_capital": 1})
    code, out, _ = run(capsys, "convert", "--insurance", ins, "--path", "0,3,1,5")
    doc = json.loads(out)
    assert code == 0 and doc["insurance_step"] == doc["domination_step"] == 4


def test_convert_disagreement(capsys):
    code, _, _ = run(capsys, "convert", "--scheme", '{"scheme":"table","dominants":[5]}',
                     "--path", "3,6")
    assert code == 1
