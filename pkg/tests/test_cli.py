import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from jetvar.cli import build_parser, format_float, main
from jetvar.solver import cubic_spline_oracle

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path, doc, name="problem.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if isinstance(doc, dict) else doc)
    return str(path)


def read_csv(path):
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    return rows[0], np.array(rows[1:], dtype=float)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_format_float_roundtrips():
    for x in (0.1, 1 / 3, -2.5e-300, 123456789.123456789):
        assert float(format_float(x)) == x


def test_parser_requires_a_command():
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args([])
    assert info.value.code == 2


def test_verify_passes(capsys):
    code, out, _ = run(["verify", "--seed", "42", "--samples", "5"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert sum(line.endswith("PASS") for line in lines) >= 12
    assert not any(line.endswith("FAIL") for line in lines)
    assert lines[-1].startswith("17/17 groups passed")


def test_verify_rejects_bad_counts(capsys):
    with pytest.raises(SystemExit) as info:
        main(["verify", "--max-k", "0"])
    assert info.value.code == 2


def test_force_on_harmonic_solution(tmp_path, capsys):
    out_path = tmp_path / "force.csv"
    code, _, err = run(["force", "--config", str(CONFIGS / "harmonic.json"), "--output", str(out_path),
                        "--tol", "1e-9"], capsys)
    assert code == 0 and "wrote 65 rows" in err
    header, data = read_csv(out_path)
    assert header == ["t", "x0_0", "F0"]
    assert np.max(np.abs(data[:, 2])) <= 1e-9
    assert np.allclose(data[:, 1], np.sin(data[:, 0]), atol=1e-15)


def test_force_tolerance_failure_exits_one(tmp_path, capsys):
    doc = {
        "problem": {"dim": 1, "k": 1},
        "lagrangian": {"preset": "harmonic"},
        "curve": {"preset": "line"},
        "interval": {"t0": 0.0, "t1": 1.0},
    }
    code, out, err = run(["force", "--config", write_config(tmp_path, doc), "--tol", "1e-9"], capsys)
    assert code == 1 and "exceeds" in err
    assert out.startswith("t,x0_0,F0\n")


def test_momentum_headers(tmp_path, capsys):
    out_path = tmp_path / "m.csv"
    code, _, _ = run(["momentum", "--config", str(CONFIGS / "momentum_cubic.json"), "--output", str(out_path)],
                     capsys)
    assert code == 0
    header, data = read_csv(out_path)
    assert header == ["t", "x0_0", "x0_1", "x1_0", "x1_1", "p0_0", "p0_1", "p1_0", "p1_1"]
    assert data.shape == (11, 9)
    # L = x0''^2 + ...: top momentum is dL/dx0'' = 2 x0'' = -2 sin t
    assert np.allclose(data[:, 6], -2 * np.sin(data[:, 0]), atol=1e-12)
    assert np.allclose(data[:, 1], np.sin(data[:, 0]), atol=1e-15)


def test_vary_reports_matching_sides(capsys):
    code, out, _ = run(["vary", "--config", str(CONFIGS / "vary.json")], capsys)
    assert code == 0
    values = dict(line.split(None, 1) for line in out.strip().splitlines())
    lhs, rhs = float(values["lhs"]), float(values["rhs"])
    assert abs(lhs - rhs) <= 1e-6 * max(1.0, abs(lhs))
    assert float(values["bulk"]) + float(values["boundary"]) == pytest.approx(rhs)


def test_panel_override(capsys, monkeypatch):
    monkeypatch.setenv("JETVAR_PANELS", "6")
    code, out, _ = run(["vary", "--config", str(CONFIGS / "vary.json")], capsys)
    assert code == 0 and "panels     6" in out
    monkeypatch.setenv("JETVAR_PANELS", "many")
    code, _, err = run(["vary", "--config", str(CONFIGS / "vary.json")], capsys)
    assert code == 2 and "JETVAR_PANELS" in err


def test_integrate_writes_trajectory(tmp_path, capsys):
    doc = {
        "problem": {"dim": 1, "k": 1},
        "lagrangian": {"preset": "harmonic"},
        "interval": {"t0": 0.0, "t1": 1.0},
        "initial": {"state": [[1.0, 0.0]]},
        "solver": {"h": 0.05},
        "output": {"csv": str(tmp_path / "traj.csv")},
    }
    code, out, _ = run(["integrate", "--config", write_config(tmp_path, doc)], capsys)
    assert code == 0 and out == ""
    header, data = read_csv(tmp_path / "traj.csv")
    assert header == ["t", "x0_0", "x0_1", "residual"]
    assert data.shape == (21, 4)
    assert np.allclose(data[:, 1], np.cos(data[:, 0]), atol=1e-6)
    assert np.max(data[:, 3]) <= 1e-10


def test_bvp_matches_spline(tmp_path, capsys):
    out_path = tmp_path / "bvp.csv"
    code, _, _ = run(["bvp", "--config", str(CONFIGS / "flat_cubic.json"), "--output", str(out_path)], capsys)
    assert code == 0
    header, data = read_csv(out_path)
    assert header == ["t", "x0_0", "x0_1", "x0_2", "x0_3", "residual"]
    spline = cubic_spline_oracle([(0.0, 0.0), (1.0, 1.0)], 1.0, 1.0)
    assert np.max(np.abs(data[:, 1] - spline(data[:, 0]))) <= 1e-7


def test_free_final_bvp(tmp_path, capsys):
    out_path = tmp_path / "free.csv"
    code, _, _ = run(["bvp", "--config", str(CONFIGS / "free_end_harmonic.json"), "--output", str(out_path)],
                     capsys)
    assert code == 0
    _, data = read_csv(out_path)
    assert abs(data[-1, 2]) <= 1e-6
    assert data[0, 2] == pytest.approx(math.tan(1.0), rel=1e-7)


def test_cubic_on_the_sphere(tmp_path, capsys):
    doc = json.loads((CONFIGS / "sphere_cubic.json").read_text())
    doc["solver"] = {"h": 0.125}
    out_path = tmp_path / "cubic.csv"
    code, _, _ = run(["cubic", "--config", write_config(tmp_path, doc), "--output", str(out_path)], capsys)
    assert code == 0
    header, data = read_csv(out_path)
    assert header[:3] == ["t", "x0_0", "x0_1"] and header[-1] == "residual" and len(header) == 10
    assert np.allclose(data[-1, [1, 2, 5, 6]], [1.5, -0.2, 0.8, 0.5], atol=1e-8)
    assert np.max(data[:, -1]) <= 1e-6


def test_cubic_rejects_a_lagrangian(tmp_path, capsys):
    doc = json.loads((CONFIGS / "sphere_cubic.json").read_text())
    doc["lagrangian"] = {"preset": "accel_squared"}
    code, _, err = run(["cubic", "--config", write_config(tmp_path, doc)], capsys)
    assert code == 2 and "lagrangian" in err


def test_csv_is_byte_identical_across_runs(tmp_path):
    outputs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        subprocess.run(
            [sys.executable, "-m", "jetvar.cli", "bvp", "--config", str(CONFIGS / "flat_cubic.json"),
             "--output", str(path)],
            check=True, capture_output=True,
        )
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1] and len(outputs[0]) > 1000


@pytest.mark.parametrize(
    "doc, fragment",
    [
        ({"problem": {"dim": 1, "k": 1}, "lagrangian": {"preset": "nope"},
          "curve": {"preset": "sine"}, "interval": {"t0": 0, "t1": 1}}, "nope"),
        ({"problem": {"dim": 1, "k": 1}, "lagrangian": {"preset": "harmonic", "expression": "x0"},
          "curve": {"preset": "sine"}, "interval": {"t0": 0, "t1": 1}}, "exactly one"),
        ({"problem": {"dim": 1, "k": 1}, "lagrangian": {"preset": "harmonic"},
          "curve": {"preset": "sine"}, "interval": {"t0": 1, "t1": 0}}, "t0"),
        ({"problem": {"dim": 1, "k": 1}, "lagrangian": {"preset": "harmonic"},
          "interval": {"t0": 0, "t1": 1}}, "curve"),
        ({"problem": {"dim": 1, "k": 1}, "lagrangian": {"preset": "harmonic"},
          "curve": {"preset": "sine"}, "interval": {"t0": 0, "t1": 1}, "extras": {}}, "extras"),
    ],
)
def test_bad_configs_exit_two(tmp_path, capsys, doc, fragment):
    code, _, err = run(["force", "--config", write_config(tmp_path, doc)], capsys)
    assert code == 2
    assert fragment in err


def test_expression_errors_report_position(tmp_path, capsys):
    doc = {
        "problem": {"dim": 1, "k": 1},
        "lagrangian": {"expression": "0.5*x0'^2 + x0'''"},
        "curve": {"preset": "sine"},
        "interval": {"t0": 0, "t1": 1},
    }
    code, _, err = run(["force", "--config", write_config(tmp_path, doc)], capsys)
    assert code == 2
    assert "lagrangian.expression" in err and "line 1, column 13" in err


def test_malformed_json_reports_position(tmp_path, capsys):
    code, _, err = run(["force", "--config", write_config(tmp_path, '{"problem": {"dim": 1,}}')], capsys)
    assert code == 2 and "line 1" in err and "column" in err


def test_missing_file_exits_two(tmp_path, capsys):
    code, _, _ = run(["force", "--config", str(tmp_path / "absent.json")], capsys)
    assert code == 2


def test_non_convergence_exits_one(tmp_path, capsys):
    doc = {
        "problem": {"dim": 1, "k": 1},
        "lagrangian": {"preset": "harmonic"},
        "interval": {"t0": 0.0, "t1": 3.141592653589793},
        "boundary": {"initial": [[0.0]], "final": [[1.0]]},
        "solver": {"h": 0.05, "shoot_max_iter": 3},
    }
    code, _, err = run(["bvp", "--config", write_config(tmp_path, doc)], capsys)
    assert code == 1 and err
