"""Command-line interface: config handling, outputs and exit codes."""

from __future__ import annotations

import io
import json
import math

import pytest

from circleflow.cli import SCHEMA, ConfigError, RunConfig, load_config, main


def run(argv):
    buf = io.StringIO()
    code = main(argv, stdout=buf)
    return code, buf.getvalue()


def csv_rows(text):
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return [ln.split(",") for ln in lines]


# ------------------------------------------------------------------ simulate


def test_simulate_time_zero_single_row():
    code, out = run(["simulate", "--replicates", "1", "--times", "0"])
    assert code == 0
    assert out.startswith(SCHEMA)
    rows = csv_rows(out.split(SCHEMA)[1])
    assert rows[0] == ["replicate", "t", "atom_theta", "weight"]
    assert rows[1:] == [["0", "0", "0", "1"]]


def test_simulate_deterministic(tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"run{i}.csv"
        assert run(["simulate", "--replicates", "2", "--horizon", "2", "--out", str(path)])[0] == 0
        outs.append((path.read_bytes(), (tmp_path / f"run{i}_anchors.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_simulate_coalescing_weights_are_one():
    code, out = run(["simulate", "--replicates", "3", "--horizon", "3",
                     "--m-plus", "coalescing", "--m-minus", "coalescing"])
    assert code == 0
    block = out.split(SCHEMA)[1]
    rows = csv_rows(block)[1:]
    assert rows and all(float(r[3]) == 1.0 for r in rows)


def test_simulate_floats_have_17_digits():
    _, out = run(["simulate", "--replicates", "1", "--times", "0.5", "--seed", "3"])
    theta = csv_rows(out.split(SCHEMA)[1])[1][2]
    assert float(theta) == float(f"{float(theta):.17g}")


# -------------------------------------------------------------------- verify


def test_verify_flow_property_passes(tmp_path, capsys):
    out = tmp_path / "v.csv"
    code, _ = run(["verify", "--checks", "flow-property", "--replicates", "5", "--out", str(out)])
    assert code == 0
    assert "PASS flow-property" in capsys.readouterr().err
    rec = json.loads((tmp_path / "v.jsonl").read_text().splitlines()[0])
    assert rec["passed"] and rec["stats"]["max_distance"] <= 1e-9
    assert out.read_text().startswith(SCHEMA)


def test_verify_failing_check_exit_one():
    # a strict u-law tolerance on few samples fails
    code, _ = run(["verify", "--checks", "u-law", "--replicates", "50", "--l", "1.5707963267948966",
                   "--dt", "0.001"])
    assert code == 1


def test_verify_unknown_check():
    assert run(["verify", "--checks", "nonsense"])[0] == 2


def test_verify_reflected_needs_pi():
    assert run(["verify", "--checks", "reflected", "--l", "1.0"])[0] == 2


# --------------------------------------------------------------------- chaos


def test_chaos_rejects_non_wiener(capsys):
    assert run(["chaos", "--m-plus", "uniform"])[0] == 2
    assert "dirac:0.5" in capsys.readouterr().err


def test_chaos_table_small():
    code, out = run(["chaos", "--m-plus", "dirac:0.5", "--m-minus", "dirac:0.5", "--l",
                     str(math.pi / 2), "--replicates", "200", "--dt", "1e-4"])
    rows = csv_rows(out)
    assert rows[0] == ["order", "l2_error", "se"]
    errs = [float(r[1]) for r in rows[1:]]
    assert len(errs) == 4 and errs[0] > 0
    assert ("# verdict: decreasing" in out) == (code == 0)


# -------------------------------------------------------------------- config


def test_config_file_with_flag_override(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"l": 1.0, "dt": 0.01, "m-plus": "beta:2.0"}))
    cfg = load_config(str(p), {"dt": 0.001})
    assert cfg.l == 1.0 and cfg.dt == 0.001 and cfg.m_plus == "beta:2.0"


def test_config_unknown_field(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ConfigError, match="bogus"):
        load_config(str(p), {})


def test_config_parse_error_reports_line(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text('{\n"l": 1.0,\n oops\n}')
    assert run(["simulate", "--config", str(p)])[0] == 2
    assert "line 3" in capsys.readouterr().err


@pytest.mark.parametrize("kw, field", [
    ({"l": 4.0}, "l"),
    ({"dt": -1.0}, "dt"),
    ({"replicates": 0}, "replicates"),
    ({"m_plus": "dirac:0.3"}, "m_plus"),
])
def test_config_validation(kw, field):
    with pytest.raises(ConfigError, match=field):
        RunConfig(**kw).validate()
