import json
import subprocess
import sys

import pytest

from ndar import DGP2, io
from ndar.cli import main


@pytest.fixture
def workspace(tmp_path):
    net = tmp_path / "net.csv"
    par = tmp_path / "par.json"
    pan = tmp_path / "panel.csv"
    io.write_json(DGP2.to_dict(), par)
    assert main(["gen-network", "--kind", "uniform", "--n", "30", "--seed", "4", "--out", str(net)]) == 0
    assert main([
        "simulate", "--network", str(net), "--params", str(par), "--t", "200",
        "--presample-rows", "3", "--seed", "9", "--out", str(pan),
    ]) == 0
    return tmp_path


def test_gen_network_outputs(tmp_path, capsys):
    out = tmp_path / "sbm.csv"
    assert main([
        "gen-network", "--kind", "sbm", "--n", "60", "--blocks", "6", "--assignment", "random",
        "--seed", "1", "--format", "dense", "--out", str(out),
    ]) == 0
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["config"]["blocks"] == 6
    assert summary["metadata"]["seed"] == 1
    assert "density" in capsys.readouterr().out
    assert io.read_network(out).n_nodes == 60


def test_gen_network_from_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"kind": "powerlaw", "n": 40, "gamma": 2.2}')
    out = tmp_path / "n.csv"
    assert main(["gen-network", "--config", str(cfg), "--seed", "3", "--out", str(out)]) == 0
    assert json.loads(out.with_suffix(".json").read_text())["config"]["seed"] == 3


def test_seed_recorded_when_missing(tmp_path):
    out = tmp_path / "n.csv"
    assert main(["gen-network", "--kind", "uniform", "--n", "10", "--out", str(out)]) == 0
    assert isinstance(json.loads(out.with_suffix(".json").read_text())["metadata"]["seed"], int)


def test_simulate_sidecar(workspace):
    side = json.loads((workspace / "panel.json").read_text())
    assert side["m"] == 3 and side["t_len"] == 200
    assert side["metadata"]["seed"] == 9
    assert side["metadata"]["law"] == "normal"
    assert side["metadata"]["stationarity_margin"] > 0


def test_fit_json(workspace, capsys):
    out = workspace / "fit.json"
    code = main([
        "fit", "--panel", str(workspace / "panel.csv"), "--network", str(workspace / "net.csv"),
        "--p", "1", "--q", "2", "--format", "json", "--out", str(out),
    ])
    assert code == 0
    printed = json.loads(capsys.readouterr().out)
    stored = json.loads(out.read_text())
    assert printed["parameters"] == stored["parameters"]
    assert list(stored["parameters"]) == DGP2.names()
    assert stored["convergence"]["converged"] is True
    assert set(stored["metadata"]["inputs"]) == {str(workspace / "panel.csv"), str(workspace / "net.csv")}


def test_fit_table(workspace, capsys):
    main(["fit", "--panel", str(workspace / "panel.csv"), "--network", str(workspace / "net.csv"), "--p", "1", "--q", "1"])
    assert "Estimate" in capsys.readouterr().out


def test_fit_not_converged_exit_code(workspace):
    code = main([
        "fit", "--panel", str(workspace / "panel.csv"), "--network", str(workspace / "net.csv"),
        "--p", "1", "--q", "2", "--max-iter", "1",
    ])
    assert code == 1


def test_select(workspace, capsys):
    out = workspace / "sel.json"
    code = main([
        "select", "--panel", str(workspace / "panel.csv"), "--network", str(workspace / "net.csv"),
        "--rmax", "2", "--reference", "1", "2", "--out", str(out),
    ])
    assert code == 0
    text = capsys.readouterr().out
    assert text.startswith("p,q,loglik,bic,converged")
    assert "chosen: p=" in text
    stored = json.loads(out.read_text())
    assert len(stored["grid"]) == 9
    assert out.with_suffix(".csv").read_text().count("\n") == 10


@pytest.mark.filterwarnings("ignore:stationarity margin")
def test_mc(tmp_path, capsys):
    design = tmp_path / "design.json"
    design.write_text(json.dumps({
        "network": {"kind": "uniform", "n": 15}, "theta0": DGP2.to_dict(),
        "t_len": 60, "burn_in": 50, "replications": 3,
    }))
    out = tmp_path / "mc.json"
    assert main(["mc", "--design", str(design), "--seed", "2", "--out", str(out)]) == 0
    stored = json.loads(out.read_text())
    assert stored["design"]["seed"] == 2
    assert stored["successful"] == 3
    assert "CP" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv_tail",
    [
        ["fit", "--panel", "missing.csv", "--network", "missing.csv", "--p", "1", "--q", "1"],
        ["gen-network", "--kind", "uniform", "--out", "x.csv"],
    ],
)
def test_usage_errors(tmp_path, capsys, argv_tail, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv_tail) == 2
    assert capsys.readouterr().err.startswith("ndar: ")


def test_schema_error_message(workspace, capsys):
    bad = workspace / "bad.csv"
    bad.write_text("src,dst\n0,1\n1,zz\n")
    code = main(["fit", "--panel", str(workspace / "panel.csv"), "--network", str(bad), "--p", "1", "--q", "1"])
    assert code == 2
    assert "ndar: SchemaError:" in capsys.readouterr().err


def test_bad_design(tmp_path, capsys):
    design = tmp_path / "design.json"
    design.write_text('{"network": {"kind": "uniform", "n": 15}, "theta0": {"p": 0, "q": 0, "omega": 1}, "fit_config": {"x": 1}}')
    assert main(["mc", "--design", str(design)]) == 2


def test_entry_point_exit_codes(tmp_path):
    run = subprocess.run([sys.executable, "-m", "ndar.cli", "fit"], capture_output=True, text=True)
    assert run.returncode == 2
    run = subprocess.run(
        [sys.executable, "-m", "ndar.cli", "gen-network", "--kind", "uniform", "--n", "12", "--seed", "1",
         "--out", str(tmp_path / "n.csv")],
        capture_output=True, text=True,
    )
    assert run.returncode == 0, run.stderr
