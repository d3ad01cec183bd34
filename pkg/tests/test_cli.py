import csv
import json

import pytest

from pdsplit.cli import main


def test_solve_converges(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code = main(["solve", "--algo", "ipds", "--problem", "lasso", "--synth", "40,6,2,0.1",
                 "--lambda", "0.05", "--out", str(out)])
    assert code == 0
    line = capsys.readouterr().out
    assert "status=converged" in line and "gap=" in line and "wall_seconds=" in line
    assert next(csv.reader(out.open())) == ["k", "objective", "primal_residual",
                                            "dual_residual"]


def test_solve_max_iters_exit_code(capsys):
    code = main(["solve", "--algo", "pdapds", "--synth", "40,6,2,1", "--batches", "3",
                 "--max-iters", "5"])
    assert code == 2
    assert "status=max_iters" in capsys.readouterr().out


def test_validation_error_exit_code(capsys):
    assert main(["solve", "--algo", "ipds", "--synth", "40,6,2,1", "--gamma", "3"]) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_algorithm_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["solve", "--algo", "newton"])
    assert info.value.code != 0


def test_bad_synth_spec():
    with pytest.raises(SystemExit):
        main(["solve", "--synth", "1,2"])


def test_validate_verb(capsys):
    assert main(["validate", "--algo", "dist-padmm", "--synth", "40,6,2,1", "--batches",
                 "4", "--graph", "complete", "--dump-config"]) == 0
    cfg_line, report_line = capsys.readouterr().out.strip().splitlines()
    assert json.loads(cfg_line)["graph"] == "complete"
    rep = json.loads(report_line)
    assert rep["edges"] == 6 and rep["margin"] > 0


def test_config_file_and_override(tmp_path, capsys):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"algo": "condat", "problem": "lasso", "synth": [30, 5, 2, 0.1]}))
    assert main(["validate", "--config", str(p), "--alpha", "0.2", "--dump-config"]) == 0
    cfg = json.loads(capsys.readouterr().out.splitlines()[0])
    assert cfg["algo"] == "condat" and cfg["alpha"] == 0.2


def test_data_file(tmp_path, capsys):
    p = tmp_path / "d.txt"
    p.write_text("".join(f"{1 if i % 3 else -1} 1:{i / 10} 2:{(i % 4) - 1.5}\n"
                         for i in range(20)))
    assert main(["solve", "--algo", "fb", "--data", str(p), "--lambda", "0.01"]) == 0


def test_missing_data_file(tmp_path):
    assert main(["solve", "--data", str(tmp_path / "none.txt")]) == 1


def test_edge_list_graph(tmp_path, capsys):
    g = tmp_path / "g.txt"
    g.write_text("1 2\n2 3\n3 4\n1 4\n1 3\n")
    assert main(["validate", "--algo", "pdapds", "--synth", "40,6,2,1", "--batches", "4",
                 "--graph", str(g)]) == 0
    assert json.loads(capsys.readouterr().out)["edges"] == 5


def test_sweep_verb(capsys):
    code = main(["sweep", "--algo", "condat", "--problem", "lasso", "--synth", "30,5,2,0.1",
                 "--seeds", "0,1", "--grid", "rho-frac=0.5,0.9"])
    assert code == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 4


def test_sweep_bad_grid():
    assert main(["sweep", "--synth", "30,5,2,0.1", "--grid", "algo=fb"]) == 1
