import json
import math

import pytest

from mpcbench import cli, privacy
from mpcbench.netsim import measure_exported

EC = {"protocol": "eval_const", "field": "GF(7)", "n": 4, "t": 1, "seed": 1, "mode": "passive",
      "params": {"formula": "(x1+x2)*x3", "inputs": [1, 2, 3]}}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run(tmp_path, cfg, out="out", *extra):
    code = cli.main(["run", write(tmp_path, cfg), "--out", str(tmp_path / out), *extra])
    rep = json.loads((tmp_path / out / "report.json").read_text()) if code in (0, 1) else None
    return code, rep


def sweep(tmp_path, cfg, trials, out="sw"):
    code = cli.main(["sweep", write(tmp_path, cfg), "--trials", str(trials), "--out", str(tmp_path / out)])
    return code, json.loads((tmp_path / out / "sweep.json").read_text())


def test_eval_const_example(tmp_path, capsys):
    code, rep = run(tmp_path, dict(EC, mode="byzantine"))
    assert code == 0
    assert rep["outputs"] == {"1": 2, "2": 2, "3": 2, "4": 2}
    assert rep["status"] == "ok" and rep["field"] == "GF(7)" and rep["t"] == 1
    assert "status: ok" in capsys.readouterr().out


def test_eval_const_rounds_do_not_grow_with_formula_depth(tmp_path):
    shallow = dict(EC, params={"formula": "x1*x2", "inputs": [1, 2, 3]})
    deep = dict(EC, params={"formula": "((x1*x2)*(x3*x1))*(x2*x3)", "inputs": [1, 2, 3]})
    assert run(tmp_path, shallow, "a")[1]["rounds"] == run(tmp_path, deep, "b")[1]["rounds"]


def test_reruns_are_byte_identical(tmp_path):
    cli.main(["run", write(tmp_path, EC), "--out", str(tmp_path / "a")])
    cli.main(["run", write(tmp_path, EC), "--out", str(tmp_path / "b")])
    for name in ("report.json", "report.txt", "trace.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_trace_recomputes_report_metrics(tmp_path):
    _, rep = run(tmp_path, EC)
    lines = (tmp_path / "out" / "trace.jsonl").read_text().splitlines()
    assert measure_exported(lines) == (rep["rounds"], rep["bits"])
    assert rep["trace_metrics_match"] is True


def test_suite_bound_error(tmp_path, capsys):
    code, _ = run(tmp_path, dict(EC, t=2, suite="third"))
    assert code == cli.EXIT_CONFIG
    assert "requires 3t<n" in capsys.readouterr().err


@pytest.mark.parametrize("mutate, key", [
    (lambda c: c.pop("seed"), "seed"),
    (lambda c: c.update(protocol="telepathy"), "protocol"),
    (lambda c: c.update(field="GF(9)"), "field"),
    (lambda c: c["params"].pop("formula"), "params.formula"),
    (lambda c: c.update(seed="x"), "seed"),
])
def test_invalid_config_names_the_key(tmp_path, capsys, mutate, key):
    cfg = json.loads(json.dumps(EC))
    mutate(cfg)
    assert run(tmp_path, cfg)[0] == cli.EXIT_CONFIG
    assert f"config key '{key}'" in capsys.readouterr().err


def test_missing_config_file_is_io_error(tmp_path):
    assert cli.main(["run", str(tmp_path / "nope.json")]) == cli.EXIT_IO


def test_env_var_sets_output_directory(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", write(tmp_path, EC)]) == 0
    assert (tmp_path / "env" / "report.json").exists()
    assert cli.main(["run", write(tmp_path, EC), "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "report.json").exists()


def test_rejection_exit_code_and_reason(tmp_path):
    cfg = {"protocol": "password", "field": "GF(17)", "n": 4, "t": 1, "mode": "passive", "seed": 3,
           "params": {"password": 5, "attempt": 6}}
    code, rep = run(tmp_path, cfg)
    assert code == cli.EXIT_REJECTED
    assert rep["status"] == "rejected" and rep["reason"] == "authentication rejected"
    cfg["params"]["attempt"] = 5
    assert run(tmp_path, cfg, "ok")[0] == 0


def test_password_sweep_rate(tmp_path):
    cfg = {"protocol": "password", "field": "GF(17)", "n": 4, "t": 1, "mode": "passive", "seed": 5,
           "params": {"password": 5, "attempt": 6}, "sweep": {"params.auth_mode": ["fast"]}}
    N = 2000
    code, res = sweep(tmp_path, cfg, N)
    assert code == 0
    (row,) = res["rows"]
    p = 1 / 17
    assert abs(row["accept_rate"] - p) <= 3 * math.sqrt(p * (1 - p) / N)
    assert (tmp_path / "sw" / "sweep.csv").read_text().startswith("params.auth_mode,trials,")


def test_fairness_sweep_error_decreases(tmp_path):
    cfg = {"protocol": "fair_coin", "seed": 2, "params": {"quit_after": "random"},
           "sweep": {"params.k": [4, 6, 8]}}
    _, res = sweep(tmp_path, cfg, 3000)
    errs = [r["error_rate"] for r in res["rows"]]
    assert errs[0] > errs[1] > errs[2]


def test_empty_range_gives_empty_table(tmp_path):
    code, res = sweep(tmp_path, {"protocol": "fair_coin", "seed": 1, "sweep": {"params.k": []}}, 5)
    assert code == 0 and res["rows"] == []
    assert (tmp_path / "sw" / "sweep.csv").read_text().splitlines() == [
        "params.k,trials,success_rate,mean_rounds,mean_bits"]


def test_sweep_is_deterministic(tmp_path):
    cfg = {"protocol": "fair_coin", "seed": 9, "params": {"quit_after": 5}, "sweep": {"params.k": [4, 5]}}
    sweep(tmp_path, cfg, 50, "a")
    sweep(tmp_path, cfg, 50, "b")
    assert (tmp_path / "a" / "sweep.json").read_bytes() == (tmp_path / "b" / "sweep.json").read_bytes()


def test_other_protocols(tmp_path):
    circ = "0.1 in 1\n0.2 in 2\n1.1 mul 0.1 0.2\nout 1.1 all\n"
    code, rep = run(tmp_path, {"protocol": "circuit", "field": "GF(7)", "n": 4, "seed": 0,
                               "params": {"circuit": circ, "inputs": [3, 4, 0, 0]}}, "c")
    assert code == 0 and rep["outputs"]["2"] == [5]
    _, rep = run(tmp_path, {"protocol": "ballot", "field": "GF(5)", "n": 4, "seed": 0,
                            "params": {"votes": [1, 0, 1, 1]}}, "b")
    assert rep["outputs"]["1"]["tally"] == 3
    adv = {"fault_type": "byzantine", "coalition": [2], "behavior": [{"name": "vote_value", "player": 2, "value": 2}]}
    _, rep = run(tmp_path, {"protocol": "ballot", "field": "GF(5)", "n": 4, "seed": 0, "adversary": adv,
                            "params": {"votes": [1, 0, 1, 1]}}, "b2")
    assert rep["outputs"]["1"]["disqualified"] == [2] and rep["outputs"]["2"] is None
    assert "vote_value[P2]=2" in rep["adversary"]
    _, rep = run(tmp_path, {"protocol": "unanimous", "field": "GF(5)", "n": 3, "t": 0, "seed": 0,
                            "params": {"votes": [1, 1, 1]}}, "u")
    assert rep["outputs"]["3"]["outcome"] == "unanimous"
    _, rep = run(tmp_path, {"protocol": "mail", "field": "GF(31)", "n": 3, "t": 0, "seed": 0,
                            "params": {"messages": [10, 20, 30], "destinations": [2, 3, 1]}}, "m")
    assert rep["outputs"]["1"]["received"] == {"1": 30, "2": 10, "3": 20}
    code, rep = run(tmp_path, {"protocol": "notary", "seed": 1,
                               "params": {"table": [0, 0, 0, 1], "nbits": 2, "x": [1, 1], "y": 1, "K": 4}}, "z")
    assert code == 0
    code, rep = run(tmp_path, {"protocol": "disclose", "seed": 3, "params": {"k": 3, "value": 1}}, "d")
    assert code == 0 and rep["outputs"]["1"]["value"] == 1


def test_partition_from_csv(tmp_path):
    privacy.write_table(tmp_path / "t.csv", privacy.sum_table(3))
    code, rep = run(tmp_path, {"protocol": "partition", "seed": 0,
                               "params": {"table_file": str(tmp_path / "t.csv"), "x": 2, "y": 2}})
    assert code == 0
    assert rep["outputs"]["1"]["value"] == 1 and rep["outputs"]["1"]["audit"] == "private"
    assert privacy.check_witness(privacy.sum_table(3), privacy.witness_loads(rep["outputs"]["1"]["witness"]))
    code, rep = run(tmp_path, {"protocol": "partition", "seed": 0, "params": {"table": [[0, 0], [0, 1]]}}, "and")
    assert code == cli.EXIT_REJECTED and rep["reason"] == "table is not partitionable"
