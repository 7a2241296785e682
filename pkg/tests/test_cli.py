import json

import pytest

from treepark.cli import main
from treepark.numerics import parse_rational


def run(tmp_path, *argv, sub="out"):
    out = tmp_path / sub
    return main([*argv, "--out", str(out)]), out


def test_bound_upper_certificate(tmp_path):
    code, out = run(tmp_path, "bound-upper", "--d", "2", "--arrival", "two:0.08698", "--depth", "50",
                    "--scale", "200")
    assert code == 0
    cert = json.loads((out / "certificate.json").read_text())
    assert {"kind", "method", "d", "arrival", "alpha", "n", "scale", "margin"} <= set(cert)
    assert cert["alpha"] == "0.08698" and parse_rational(cert["margin"]) > 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["outputs"] == ["certificate.json"]
    assert main(["replay", str(out / "certificate.json")]) == 0


def test_refusal_exit_code(tmp_path):
    code, out = run(tmp_path, "bound-upper", "--arrival", "two:0.03", "--depth", "20", "--scale", "60")
    assert code == 3
    assert (out / "refusal.json").exists()


def test_qn_table_no_cars(tmp_path):
    code, out = run(tmp_path, "qn-table", "--d", "2", "--arrival", "two:0", "--depth", "40", "--no-figure")
    assert code == 0
    lines = (out / "qn_table.csv").read_text().splitlines()
    assert lines[0] == "alpha,n,q_n"
    assert len(lines) == 42
    assert all(parse_rational(line.split(",")[2]) == 1 for line in lines[1:])


def test_bound_lower(tmp_path, capsys):
    code, out = run(tmp_path, "bound-lower", "--d", "2")
    assert code == 0
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["alpha"].startswith("0.0317541")
    assert parse_rational(cert["alpha"]) > parse_rational("0.03175")


def test_config_errors(tmp_path):
    assert run(tmp_path, "qn-table", "--arrival", "two:0.3333", "--scale", "2")[0] == 2
    assert run(tmp_path, "qn-table", "--arrival", "nope:1")[0] == 2
    assert run(tmp_path, "qn-table", "--family", "two")[0] == 2
    assert main(["bound-upper"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"no_such_flag": 1}')
    assert main(["qn-table", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2


def test_icx_exit_codes(tmp_path, capsys):
    code, _ = run(tmp_path, "icx-check", "--arrival-a", "two:0.05", "--arrival-b", "three:0.05",
                  "--depth", "3", "--no-figure")
    assert code == 0
    code, out = run(tmp_path, "icx-check", "--arrival-a", "three:0.05", "--arrival-b", "two:0.05",
                    "--depth", "2", "--no-figure", sub="rev")
    assert code == 4
    assert "depth 0, t=1" in capsys.readouterr().err
    assert (out / "icx_check.csv").read_text().startswith("depth,t,margin\n")


def test_resource_guard_exit(tmp_path):
    code, _ = run(tmp_path, "simulate", "--offspring", "poisson:3", "--arrival", "two:0.05", "--depth", "30",
                  "--trials", "5", "--no-figure")
    assert code == 5
    code, _ = run(tmp_path, "verify-identities", "--arrival", "two:0.05", "--depth", "20", "--scale", "exact",
                  sub="cap")
    assert code == 5


def test_config_file_and_env_default(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"arrival": "two:0.2", "depth": 12, "scale": 60}))
    monkeypatch.setenv("TREEPARK_OUT", str(tmp_path / "envout"))
    assert main(["bound-upper", "--config", str(cfg)]) == 0
    cert = json.loads((tmp_path / "envout" / "certificate.json").read_text())
    assert cert["n"] == 12 and cert["scale"] == 60


@pytest.mark.parametrize("argv", [
    ["simulate", "--arrival", "two:0.05", "--depth", "6", "--trials", "1500", "--seed", "3"],
    ["qn-table", "--family", "two", "--alpha-grid", "0:0.2:0.05", "--depth", "12", "--depths", "4,8,12"],
    ["ex-table", "--family", "three", "--alpha-grid", "0.05:0.15:0.05", "--depth", "12"],
    ["verify-identities", "--arrival", "two:0.05", "--depth", "6", "--scale", "exact"],
    ["oracle-check", "--instances", "20"],
])
def test_manifest_replay_is_byte_identical(tmp_path, argv):
    code, first = run(tmp_path, *argv, sub="a")
    assert code == 0
    second = tmp_path / "b"
    assert main(["replay", str(first / "manifest.json"), "--out", str(second)]) == 0
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_simulate_outputs(tmp_path):
    code, out = run(tmp_path, "simulate", "--arrival", "two:0.05", "--depth", "4", "--trials", "200",
                    "--no-figure")
    assert code == 0
    rows = (out / "simulate.csv").read_text().splitlines()
    assert rows[0] == "n,trials,q_hat,q_se,ex_hat,ex_se"
    assert "e-" in rows[1] or "e+" in rows[1]
    hist = (out / "tau_hist.csv").read_text().splitlines()
    assert hist[0] == "m,count" and hist[-1].startswith(">4,")
    assert sum(int(r.split(",")[1]) for r in hist[1:]) == 200


def test_identities_exact_run(tmp_path):
    code, out = run(tmp_path, "verify-identities", "--arrival", "two:0.0863", "--depth", "5", "--scale", "exact")
    assert code == 0
    assert json.loads((out / "constant.json").read_text())["constant"] == "rederived"
