import json

import numpy as np
import pytest

from gsns.cli import fmt_float, main, parse_int_list, parse_modes, run_experiment, to_json
from gsns.config import FORMAT_VERSION, ConfigError, parse_config

MINIMAL = {"n": 2, "epsilon": 0.01,
           "forcing": [{"k": [0, 1], "e1": 1, "e2": 1}, {"k": [1, 1], "e1": 1, "e2": 1}]}


def cfg_file(tmp_path, **extra):
    data = {**MINIMAL, "dt": 0.01, "scheme": "rk4", "seed": 3, "t_final": 1.0, **extra}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return p


def test_minimal_config_defaults():
    cfg = parse_config(json.dumps(MINIMAL))
    assert cfg["dt"] == 1e-3 and cfg["scheme"] == "euler_maruyama" and cfg["seed"] == 0
    assert cfg["horseshoe"]["n_starts"] == 64 and cfg["horseshoe"]["max_iter"] == 500
    assert cfg["horseshoe"]["method"] == "nelder-mead" and cfg["horseshoe"]["tau"] == 1
    assert cfg["stationary"]["thin"] == 100
    assert cfg.seeds == [0]
    assert len(cfg.config_hash) == 64
    assert cfg.header()["format_version"] == FORMAT_VERSION


@pytest.mark.parametrize("change,field", [
    ({"forcing": [{"k": [0, 1], "e1": 1, "e2": 0}]}, "forcing[0]"),
    ({"forcing": [{"k": [0, 1], "e1": 1, "e2": 1}, {"k": [0, 1], "e1": 2, "e2": 2}]},
     "forcing[1].k"),
    ({"forcing": [{"k": [3, 1], "e1": 1, "e2": 1}]}, "forcing[0].k"),
    ({"bogus": 1}, ""),
    ({"epsilon": -1}, "epsilon"),
    ({"lyapunov": {"p": 100}}, "lyapunov.p"),
    ({"horseshoe": {"J": [0, 4, 4]}}, "horseshoe.J"),
    ({"scheme": "leapfrog"}, "scheme"),
])
def test_config_rejections(change, field):
    with pytest.raises(ConfigError) as info:
        parse_config(json.dumps({**MINIMAL, **change}))
    assert info.value.path == field


def test_malformed_json():
    with pytest.raises(ConfigError):
        parse_config("{n: 2")


def test_float_formatting():
    assert fmt_float(0.1) == "0.10000000000000001"
    assert float(fmt_float(1 / 3)) == 1 / 3
    assert fmt_float(float("nan")) == "NaN"
    text = to_json({"a": [0.1, 2], "b": {"c": True, "d": None}})
    assert json.loads(text) == {"a": [0.1, 2], "b": {"c": True, "d": None}}


def test_list_parsers():
    assert parse_modes("0,1; 1,1") == [(0, 1), (1, 1)]
    assert parse_int_list("S0..S3", "--seeds") == [0, 1, 2, 3]
    assert parse_int_list("0,4,8", "--j") == [0, 4, 8]
    with pytest.raises(ConfigError):
        parse_int_list("a,b", "--j")


def test_hypo_check_standard_set(tmp_path, capsys):
    out = tmp_path / "h.json"
    assert main(["hypo-check", "--n", "4", "--force", "1,0;1,1", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["hypoelliptic"] is True and rep["uncovered"] == []
    assert rep["format_version"] == FORMAT_VERSION


def test_hypo_check_failing_set(tmp_path):
    out = tmp_path / "h.json"
    assert main(["hypo-check", "--n", "3", "--force", "0,1", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["hypoelliptic"] is False and [1, 0] in rep["uncovered"]


def test_simulate_csv(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["simulate", "--config", str(cfg_file(tmp_path)), "--out", str(out),
                 "--record-every", "10"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith(f"# format_version={FORMAT_VERSION} config_hash=")
    header = lines[1].split(",")
    assert header[0] == "t" and header[1] == "q_-2_1_1" and len(header) == 25
    data = np.loadtxt(out, delimiter=",", skiprows=2)
    assert data.shape == (11, 25)
    np.testing.assert_allclose(data[:, 0], np.arange(11) * 0.1)


def test_simulate_blow_up_record(tmp_path, capsys):
    x0 = [{"k": [0, 1], "q1": 50, "q2": 50}, {"k": [1, 1], "q1": 50, "q2": -50},
          {"k": [1, 0], "q1": 30, "q2": 10}]
    p = cfg_file(tmp_path, dt=0.5, scheme="euler_maruyama", t_final=100, x0=x0)
    code = main(["simulate", "--config", str(p), "--out", str(tmp_path / "x.csv")])
    assert code != 0
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["error"] == "BlowUpError" and rec["command"] == "simulate"
    assert rec["time"] > 0
    assert not (tmp_path / "x.csv").exists()


def test_config_error_record(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({**MINIMAL, "forcing": [{"k": [0, 1], "e1": 1, "e2": 0}]}))
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "x.csv")]) == 2
    rec = json.loads(capsys.readouterr().err.strip())
    assert rec["error"] == "ConfigError" and rec["field"] == "forcing[0]"


def test_lyapunov_and_entropy(tmp_path, capsys):
    p = cfg_file(tmp_path, lyapunov={"t_total": 5, "p": 24})
    out = tmp_path / "ly.json"
    assert main(["lyapunov", "--config", str(p), "--seeds", "0..1", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert len(rep["exponents"]) == 24 and len(rep["per_seed"]) == 2
    assert rep["config"]["seeds"] == [0, 1]
    capsys.readouterr()
    assert main(["entropy", "--lyapunov", str(out)]) == 0
    h, se = map(float, capsys.readouterr().out.split())
    assert h == pytest.approx(sum(x for x in rep["exponents"] if x > 0))
    assert se >= 0


def test_entropy_rejects_partial(tmp_path, capsys):
    p = cfg_file(tmp_path, lyapunov={"t_total": 2, "p": 2})
    out = tmp_path / "ly.json"
    assert main(["lyapunov", "--config", str(p), "--out", str(out)]) == 0
    assert main(["entropy", "--lyapunov", str(out)]) == 1


def test_stationary_outputs(tmp_path):
    p = cfg_file(tmp_path)
    out, rep = tmp_path / "m.csv", tmp_path / "r.json"
    assert main(["stationary", "--config", str(p), "--samples", "120", "--thin", "10",
                 "--out", str(out), "--report", str(rep)]) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=2)
    assert data.shape == (120, 24)
    r = json.loads(rep.read_text())
    assert r["exact_mean_sq_norm"] == pytest.approx(37.5)
    assert r["burn_in"] == pytest.approx(0.25 * 120 * 10 * 0.01)


def test_free_set_command(tmp_path):
    words = tmp_path / "w.txt"
    words.write_text("1,2,1\n2,2,2\n1,1,1\n2,1,2\n")
    out = tmp_path / "f.json"
    assert main(["free-set", "--r", "2", "--n", "3", "--words", str(words),
                 "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["max_trace_set"] == [1, 2] and rep["size"] == 2
    assert rep["ratio"] == pytest.approx(2 / 3)


def test_horseshoe_command_fixed_j(tmp_path):
    hs = {"J": [0, 1], "horizon": 3, "measure_samples": 200, "measure_burn_in": 50,
          "measure_thin": 20, "ensemble_size": 300, "n_starts": 4, "max_iter": 30,
          "method": "gradient"}
    p = cfg_file(tmp_path, horseshoe=hs)
    out = tmp_path / "c.json"
    assert run_experiment(p, "horseshoe", out) == 0
    cert = json.loads(out.read_text())
    assert cert["J"] == [0, 1] and [w["s"] for w in cert["words"]] == ["11", "12", "21", "22"]
    assert set(cert["balls"]) == {"c1", "c2", "radius"}
    assert cert["density"] == pytest.approx(2 / 3)
    assert cert["all_realized"] == all(w["success"] for w in cert["words"])


def test_run_experiment_rejects_other_commands(tmp_path):
    with pytest.raises(ValueError):
        run_experiment(tmp_path / "x", "hypo-check", tmp_path / "y")


def test_determinism_simulate_and_lyapunov(tmp_path):
    p = cfg_file(tmp_path, lyapunov={"t_total": 2, "p": 3})
    for cmd in ("simulate", "lyapunov", "stationary"):
        extra = ["--samples", "20", "--thin", "5"] if cmd == "stationary" else []
        outs = []
        for run in range(2):
            out = tmp_path / f"{cmd}{run}.out"
            assert main([cmd, "--config", str(p), "--out", str(out), *extra]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


def test_thread_count_does_not_change_output(tmp_path, monkeypatch):
    p = cfg_file(tmp_path, lyapunov={"t_total": 2, "p": 3})
    outs = []
    for threads in ("1", "3"):
        monkeypatch.setenv("GSNS_NUM_THREADS", threads)
        out = tmp_path / f"l{threads}.json"
        assert main(["lyapunov", "--config", str(p), "--seeds", "0..2", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
