import json
import re
import subprocess
import sys

import pytest

from cloaksim import __version__
from cloaksim.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main
from cloaksim.config import ConfigError, config_hash, load_config, parse_config
from cloaksim.experiments import fmt, read_table, thread_count

SMALL_SWEEP = """{
  "schema": 1,
  "experiment": "delta-sweep",
  "output": "out",
  "deltas": [0.1, 0.001, 1e-05],
  "n_max": 8
}
"""


def write(tmp_path, text, name="cfg.json"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_schema_verb_prints_valid_json(capsys):
    assert main(["schema"]) == EXIT_OK
    schema = json.loads(capsys.readouterr().out)
    assert "experiment" in schema["properties"]


def test_validate_accepts_shipped_configs():
    from pathlib import Path
    configs = sorted((Path(__file__).parents[1] / "scripts" / "configs").glob("*.json"))
    assert configs
    for path in configs:
        assert main(["validate", str(path)]) == EXIT_OK


def test_malformed_json_reports_its_line(tmp_path, capsys):
    p = write(tmp_path, '{\n  "schema": 1,\n  "experiment": "delta-sweep",\n  "output": "x"\n  "n_max": 4\n}\n')
    assert main(["validate", str(p)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert f"{p}:5:" in err


def test_schema_violation_reports_its_line(tmp_path):
    text = SMALL_SWEEP.replace('"n_max": 8', '"n_max": 999')
    with pytest.raises(ConfigError) as info:
        parse_config(text, "cfg.json")
    assert info.value.line == 6
    assert "n_max" in str(info.value)


def test_nested_key_error_points_at_nested_line(tmp_path):
    text = '{\n "schema": 1,\n "experiment": "cloak-demo",\n "output": "o",\n "source": {\n   "radius": 3.0\n }\n}\n'
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == 6


def test_unknown_key_and_bad_ordering_are_rejected():
    with pytest.raises(ConfigError):
        parse_config(SMALL_SWEEP.replace('"n_max": 8', '"n_max": 8, "typo": 1'))
    with pytest.raises(ConfigError) as info:
        parse_config(SMALL_SWEEP.replace("[0.1, 0.001, 1e-05]", "[0.1, 0.5]"))
    assert info.value.line == 5


def test_degenerate_geometry_is_a_config_error(tmp_path):
    text = SMALL_SWEEP.replace('"n_max": 8', '"n_max": 8,\n  "geometry": {"r2": 2.0, "r3": 1.0}')
    assert main(["validate", str(write(tmp_path, text))]) == EXIT_CONFIG


def test_missing_file_is_a_config_error(tmp_path):
    assert main(["validate", str(tmp_path / "absent.json")]) == EXIT_CONFIG


def test_run_writes_provenance_tagged_tables(tmp_path):
    p = write(tmp_path, SMALL_SWEEP)
    assert main(["run", str(p)]) == EXIT_OK
    cfg = load_config(p)
    out = tmp_path / "out"
    first = (out / "sweep.csv").read_text().splitlines()[0]
    assert first == f"# version={__version__} config-hash={cfg.config_hash}"
    assert cfg.config_hash == config_hash(json.loads(SMALL_SWEEP))
    header, rows = read_table(out / "summary.csv")
    assert len(rows) == 1 and rows[0]["status"] == "ok"
    _, sweep = read_table(out / "sweep.csv")
    assert len(sweep) == 3
    assert not (out / "PARTIAL").exists()


def test_floats_are_written_round_trip_exact():
    for x in (0.1, 1 / 3, 1e-300, 2.0**-1074, 123456789.123456789):
        assert float(fmt(x)) == x
    assert fmt(True) == "1" and fmt(3) == "3"


def test_rerun_is_byte_identical_across_thread_counts(tmp_path, monkeypatch):
    p = write(tmp_path, SMALL_SWEEP)
    monkeypatch.setenv("CLOAKSIM_THREADS", "1")
    assert main(["run", str(p)]) == EXIT_OK
    first = {f.name: f.read_bytes() for f in (tmp_path / "out").iterdir()}
    monkeypatch.setenv("CLOAKSIM_THREADS", "3")
    assert main(["run", str(p)]) == EXIT_OK
    second = {f.name: f.read_bytes() for f in (tmp_path / "out").iterdir()}
    assert first == second


def test_thread_count_reads_environment(monkeypatch):
    monkeypatch.setenv("CLOAKSIM_THREADS", "5")
    assert thread_count() == 5
    monkeypatch.setenv("CLOAKSIM_THREADS", "0")
    assert thread_count() == 1
    monkeypatch.setenv("CLOAKSIM_THREADS", "lots")
    assert thread_count() >= 1


def test_ill_conditioned_grid_exits_with_solver_code(tmp_path, capsys):
    text = """{
  "schema": 1,
  "experiment": "oracle-compare",
  "output": "out",
  "deltas": [1e-8],
  "n_max": 8,
  "grid": {"n_r": [16], "max_condition": 1000.0}
}
"""
    assert main(["run", str(write(tmp_path, text))]) == EXIT_SOLVER
    err = capsys.readouterr().err
    assert "condition estimate" in err
    out = tmp_path / "out"
    assert (out / "PARTIAL").exists()
    _, rows = read_table(out / "summary.csv")
    assert rows[0]["status"] == "failed"


def test_solver_failure_from_modal_solve_exits_with_solver_code(tmp_path, monkeypatch):
    import numpy as np

    import cloaksim.experiments as ex

    def broken(*args, **kwargs):
        raise np.linalg.LinAlgError("singular transfer matrix")

    monkeypatch.setattr(ex, "solve_field", broken)
    assert main(["run", str(write(tmp_path, SMALL_SWEEP))]) == EXIT_SOLVER
    assert (tmp_path / "out" / "PARTIAL").exists()


def test_module_entry_point_runs(tmp_path):
    res = subprocess.run([sys.executable, "-m", "cloaksim", "validate", str(write(tmp_path, SMALL_SWEEP))],
                         capture_output=True, text=True)
    assert res.returncode == EXIT_OK
    assert re.search(r"config-hash=[0-9a-f]{16}", res.stdout)
