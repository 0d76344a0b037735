import json

import numpy as np
import pytest

from torusquant.cli import main

GOLDEN_SPECTRUM = "n_1,E\n0,0.0\n-1,1.0\n1,1.0\n-2,4.0\n2,4.0\n"


def write(tmp_path, job, name="job.json"):
    p = tmp_path / name
    p.write_text(json.dumps(job))
    return str(p)


def loop_job(expr="0.7", H=None):
    job = {
        "command": "holonomy", "m": 2, "n_max": 3, "lambda": [0.3, -0.2],
        "perturbation": {"controlled_axes": [1], "num_params": 2,
                         "Lambda": [{"axis": 1, "param": 1, "expr": expr},
                                    {"axis": 1, "param": 2, "expr": "-0.4"}]},
        "path": {"t": [0, 1, 2, 3, 4], "s": [[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]},
    }
    if H is not None:
        job["H"] = H
    return job


def test_spectrum_csv_golden(tmp_path, capsys):
    cfg = write(tmp_path, {"command": "spectrum", "m": 1, "n_max": 2, "lambda": [0], "H": "I1^2"})
    assert main(["spectrum", "--config", cfg, "--format", "csv"]) == 0
    assert capsys.readouterr().out == GOLDEN_SPECTRUM


def test_out_directory(tmp_path, capsys):
    cfg = write(tmp_path, {"m": 1, "n_max": 2, "lambda": [0], "H": "I1^2", "format": "csv"})
    out = tmp_path / "run"
    assert main(["spectrum", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "spectrum.csv").read_text() == GOLDEN_SPECTRUM
    report = json.loads((out / "report.json").read_text())
    assert report["command"] == "spectrum" and report["passed"]
    assert report["config"]["lambda"] == [0.0]
    assert "wall_time_s" not in report
    assert json.loads(capsys.readouterr().out) == report


def test_timing_flag_adds_wall_time(tmp_path, capsys):
    cfg = write(tmp_path, {"m": 1, "n_max": 2, "H": "I1"})
    assert main(["spectrum", "--config", cfg, "--out", str(tmp_path / "o"), "--timing"]) == 0
    assert json.loads(capsys.readouterr().out)["wall_time_s"] >= 0


def test_constant_lambda_loop_is_identity(tmp_path, capsys):
    cfg = write(tmp_path, loop_job(H="I2^2"))
    assert main(["holonomy", "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    U = np.array(out["re"]) + 1j * np.array(out["im"])
    assert np.max(np.abs(U - np.eye(len(U)))) <= 1e-8


def test_evolve_revival(tmp_path, capsys):
    job = {"command": "evolve", "m": 1, "n_max": 3, "H": "I1", "t": [0, 6.283185307179586],
           "psi0": [{"n": [1], "re": 0.6}, {"n": [-2], "im": 0.8}]}
    assert main(["evolve", "--config", write(tmp_path, job)]) == 0
    states = json.loads(capsys.readouterr().out)["states"]
    assert len(states) == 2

    def coeffs(state):
        return {tuple(t["n"]): complex(t["re"], t["im"]) for t in state["psi"]["terms"]}

    a, b = coeffs(states[0]), coeffs(states[1])
    assert set(a) == set(b) and max(abs(a[n] - b[n]) for n in a) <= 1e-10


def test_classical_flow_csv(tmp_path, capsys):
    job = {"command": "classical-flow", "format": "csv",
           "classical": {"H": "(p1^2 + q1^2)/2", "q0": [1], "p0": [0], "t_end": 1, "dt": 0.5}}
    assert main(["classical-flow", "--config", write(tmp_path, job)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("t,q1,p1") and len(lines) == 4


def test_action_with_correspondence(tmp_path, capsys):
    job = {"command": "action", "m": 1, "n_max": 6, "lambda": [0],
           "action": {"H": "((p1^2 + q1^2)/2)^2", "energies": [0.25, 1, 4, 9, 16], "correspondence": True}}
    out = tmp_path / "o"
    assert main(["action", "--config", write(tmp_path, job), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["metrics"]["correspondence"]["fit"]["degree"] == 2
    levels = json.loads((out / "action.json").read_text())["levels"]
    assert levels[1]["action"] == pytest.approx(1.0, abs=1e-10)


def test_check_subset_via_config(tmp_path, capsys):
    # the full ``tq check`` run is exercised by the acceptance suite
    cfg = write(tmp_path, {"command": "check", "suites": ["spectrum", "commutation"]})
    assert main(["check", "--config", cfg, "--seed", "3"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert [s["suite"] for s in report["suites"]] == ["spectrum", "commutation"]
    assert report["passed"] and report["seed"] == 3 and report["config"]["seed"] == 3


def test_unknown_suite_exit_2(tmp_path, capsys):
    assert main(["check", "--config", write(tmp_path, {"suites": ["nope"]})]) == 2


def test_reports_are_byte_deterministic(tmp_path, capsys):
    cfg = write(tmp_path, loop_job(expr="0.7 + 0.2*s2", H="I2^2"))
    texts = []
    for k in range(2):
        assert main(["holonomy", "--config", cfg, "--out", str(tmp_path / f"r{k}")]) == 0
        texts.append((tmp_path / f"r{k}" / "report.json").read_bytes())
    assert texts[0] == texts[1]


@pytest.mark.parametrize("job,code", [
    ({"m": 1, "n_max": 2, "lamda": [0], "H": "I1"}, 2),
    ({"m": 2, "n_max": 2, "lambda": [0], "H": "I1"}, 2),
    ({"command": "evolve", "m": 1, "n_max": 2, "H": "I1"}, 2),
    ({"m": 1, "n_max": 2, "lambda": [0], "H": "sqrt(I1)"}, 3),
    ({"m": 1, "n_max": 2, "lambda": [0], "H": "I1 +"}, 2),
])
def test_exit_codes(tmp_path, capsys, job, code):
    assert main(["spectrum", "--config", write(tmp_path, job)]) == code
    assert "error" in capsys.readouterr().err


def test_noncommuting_perturbation_exit_4(tmp_path, capsys):
    # Lambda depends on phi1 while H depends on I1
    assert main(["holonomy", "--config", write(tmp_path, loop_job(expr="cos(phi1)", H="I1^2"))]) == 4
    assert "holonomy.commutes_with_H" in capsys.readouterr().err


def test_invalid_json_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{")
    assert main(["spectrum", "--config", str(p)]) == 2


def test_config_required(capsys):
    assert main(["spectrum"]) == 2


def test_psi0_outside_window(tmp_path, capsys):
    job = {"command": "evolve", "m": 1, "n_max": 1, "H": "I1", "t": 1, "psi0": [{"n": [5], "re": 1}]}
    assert main(["evolve", "--config", write(tmp_path, job)]) == 2


def test_path_from_csv_relative_to_config(tmp_path, capsys):
    (tmp_path / "loop.csv").write_text("t,s1,s2\n0,0,0\n1,1,0\n2,1,1\n3,0,1\n4,0,0\n")
    job = loop_job(H="I2^2")
    job["path"] = {"csv": "loop.csv"}
    inline = tmp_path / "inline"
    from_csv = tmp_path / "csv"
    inline.mkdir()
    from_csv.mkdir()
    assert main(["holonomy", "--config", write(inline, loop_job(H="I2^2"))]) == 0
    a = capsys.readouterr().out
    assert main(["holonomy", "--config", write(tmp_path, job)]) == 0
    assert capsys.readouterr().out == a
    job["path"] = {"csv": "missing.csv"}
    assert main(["holonomy", "--config", write(from_csv, job)]) == 2
