import json

import numpy as np
import pytest

from cascadia import reference as R
from cascadia.cli import main, parse_config
from cascadia.errors import UsageError
from cascadia.graph_core import save_graph


@pytest.fixture
def files(tmp_path):
    save_graph(R.graph(), tmp_path / "six.json")
    (tmp_path / "two.json").write_text('{"nodes": 2, "edges": [[1, 2]]}')
    (tmp_path / "split.json").write_text('{"nodes": 3, "edges": [[1, 2]]}')
    return tmp_path


def test_defaults():
    conf = parse_config("tail", {"lam": 0.5})
    assert conf["lam_star"] == 0.5 and conf["rule"] == "break_all" and conf["alpha"] == 1.5


def test_lambda_out_of_range():
    with pytest.raises(UsageError):
        parse_config("tail", {"lam": 1.5})
    assert main(["tail", "--lambda", "1.5", "--graph", "x", "--out", "y"]) == 1


def test_flags_override_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"replicas": 100000, "seed": 4}))
    conf = parse_config("tail", {"replicas": 10}, p)
    assert conf["replicas"] == 10 and conf["seed"] == 4


def test_unknown_config_key(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"replicaz": 1}))
    with pytest.raises(UsageError, match="replicaz"):
        parse_config("tail", {}, p)


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("CASCADIA_THREADS", "3")
    assert parse_config("tail", {})["threads"] == 3
    assert parse_config("tail", {"threads": 2})["threads"] == 2


def test_repro_example_regimes(capsys):
    assert main(["repro-example"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 9
    assert main(["repro-example", "--lambda-star", "0.7", "--regime", "high-emergency"]) == 0
    assert "ends after edge 10" in capsys.readouterr().out
    assert main(["repro-example", "--lambda-star", "0.7"]) == 1


def test_repro_example_detects_corrupted_golden(tmp_path, capsys):
    bad = R.V_AFTER_7_10_11.copy()
    bad[4, 1] += 1e-6
    (tmp_path / "g.json").write_text(json.dumps({"ptdf": {"7,10,11": bad.tolist()}}))
    assert main(["repro-example", "--golden", str(tmp_path / "g.json")]) == 4
    assert "FAIL ptdf after [7, 10, 11]" in capsys.readouterr().out


def test_dump_ptdf(capsys):
    assert main(["repro-example", "--dump-ptdf"]) == 0
    assert "# V after failing [7, 10, 11]" in capsys.readouterr().out


def test_opf_solve(files, capsys):
    assert main(["opf-solve", "--graph", str(files / "two.json"), "--demand", "1,0", "--lambda", "0.5"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert np.allclose(res["generation"], [0.75, 0.25]) and res["kkt_residual"] <= 1e-7


def test_cascade_jsonl(files):
    out = files / "t.jsonl"
    assert main(["cascade", "--graph", str(files / "six.json"), "--demand", "3,1,2,0.5,1,1",
                 "--lambda-star", "0.55", "--out", str(out)]) == 0
    lines = [json.loads(x) for x in out.read_text().splitlines()]
    assert [r["first_edge"] for r in lines] == list(range(1, 12))
    assert all({"steps", "S", "z"} <= set(r) for r in lines)


def test_disconnected_graph_rejected(files, capsys):
    assert main(["cascade", "--graph", str(files / "split.json"), "--demand", "1,1,1"]) == 2
    assert "not connected" in capsys.readouterr().err


def test_tie_analyze(files, capsys):
    assert main(["tie-analyze", "--graph", str(files / "six.json"), "--gamma", ",".join(map(str, R.GAMMA)),
                 "--lambda-star", "0.55", "--failed", "7,10,11", "--pair", "5,6"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["skew_symmetric"] and all(res["conditions"])
    assert main(["tie-analyze", "--graph", str(files / "six.json"), "--gamma", ",".join(map(str, R.GAMMA)),
                 "--failed", "1,5,6,7,8"]) == 2


def test_tail_outputs_and_replay(files):
    args = ["tail", "--graph", str(files / "two.json"), "--replicas", "5000", "--seed", "3",
            "--partition-replicas", "100"]
    assert main(args + ["--out", str(files / "a")]) == 0
    for name in ("survival.csv", "summary.json", "scenarios.csv", "manifest.json"):
        assert (files / "a" / name).exists()
    summary = json.loads((files / "a" / "summary.json").read_text())
    assert summary["c_theoretical"] == pytest.approx(0.25) and summary["hill_k"] == 25
    assert main(["tail", "--config", str(files / "a" / "manifest.json"), "--out", str(files / "b")]) == 0
    for name in ("survival.csv", "summary.json", "scenarios.csv"):
        assert (files / "a" / name).read_bytes() == (files / "b" / name).read_bytes()


def test_conjecture(files):
    assert main(["conjecture", "--max-nodes", "3", "--gammas", "2", "--out", str(files / "c")]) == 0
    rep = json.loads((files / "c" / "report.json").read_text())
    assert rep["graphs"] == 3 and rep["counterexamples"] == [] and rep["agreement_rate"] == 1.0


def test_missing_subcommand():
    assert main([]) == 1
