import csv
import json
import subprocess
import sys

import pytest

from gridpump import __version__
from gridpump.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main

ONSET = """scenario = "stabilizer_onset"
code = "square"
cycles = 2
dim = 200
noise.enabled = false
"""


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_run_writes_csv_and_sidecar(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, ONSET), "--out", str(out), "--seed", "4"]) == EXIT_OK
    rows = read_csv(out / "stabilizer_onset.csv")
    assert rows[0] == ["cycle", "S_z", "S_z_stderr", "S_x", "S_x_stderr"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "2"]
    assert all(float(x) == float(x) for r in rows[1:] for x in r)
    side = json.loads((out / "stabilizer_onset.json").read_text())
    assert side["scenario"] == "stabilizer_onset"
    assert side["columns"] == rows[0]
    assert side["seed"] == 4 and side["config"]["seed"] == 4
    assert side["version"] == __version__
    assert side["wall_clock_s"] >= 0
    assert side["config"]["noise"]["enabled"] is False
    assert str(out / "stabilizer_onset.csv") in capsys.readouterr().out


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("GRIDPUMP_OUT", str(tmp_path / "env"))
    assert main(["run", write(tmp_path, ONSET)]) == EXIT_OK
    assert (tmp_path / "env" / "stabilizer_onset" / "stabilizer_onset.csv").is_file()


def test_unknown_key_exits_2(tmp_path, capsys):
    assert main(["run", write(tmp_path, ONSET + "epsilonn = 1.0\n")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "epsilonn" in err and "line 6" in err


def test_missing_config_exits_2(tmp_path):
    assert main(["run", str(tmp_path / "nope.toml")]) == EXIT_CONFIG


def test_bad_override_exits_2(tmp_path):
    assert main(["run", write(tmp_path, ONSET), "--traj", "0"]) == EXIT_CONFIG


def test_truncation_exits_3(tmp_path, capsys):
    assert main(["run", write(tmp_path, ONSET), "--dim", "20", "--out", str(tmp_path)]) == EXIT_NUMERICAL
    assert "numerical error" in capsys.readouterr().err


def test_sweep_subcommand(tmp_path):
    text = 'code = "square"\ndim = 200\nnoise.enabled = false\nscan.points = 3\n'
    assert main(["sweep", write(tmp_path, text), "--out", str(tmp_path / "s")]) == EXIT_OK
    rows = read_csv(tmp_path / "s" / "epsilon_sweep.csv")
    assert rows[0] == ["k", "eps", "value", "stderr", "analytic"]
    assert len(rows) == 1 + 2 * 3


def test_charfn_subcommand(tmp_path):
    text = 'noise.enabled = false\ncycles = 0\ndim = 200\nscan.grid = 3\nscan.extent = 2.0\n'
    assert main(["charfn", write(tmp_path, text), "--out", str(tmp_path / "c")]) == EXIT_OK
    rows = read_csv(tmp_path / "c" / "charfn.csv")
    assert rows[0] == ["a", "b", "re", "im"] and len(rows) == 10


def test_shot_noise_column(tmp_path):
    text = 'code = "square"\ndim = 200\nnoise.enabled = false\nscan.points = 3\nshots = 200\nseed = 3\n'
    out = tmp_path / "shots"
    assert main(["sweep", write(tmp_path, text), "--out", str(out)]) == EXIT_OK
    first = read_csv(out / "epsilon_sweep.csv")
    assert first[0][-1] == "shot_value"
    for row in first[1:]:
        v = float(row[-1])
        assert -1.0 <= v <= 1.0 and (v + 1) * 100 == pytest.approx(round((v + 1) * 100))
    assert main(["sweep", write(tmp_path, text), "--out", str(out)]) == EXIT_OK
    assert read_csv(out / "epsilon_sweep.csv") == first


def test_analytic_subcommand(capsys):
    assert main(["analytic", "1", "0.37"]) == EXIT_OK
    rows = dict(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows["k"] == "1"
    assert float(rows["readout_max"]) > float(rows["readout_unbiased"])
    assert main(["analytic", "2", "1.5"]) == EXIT_CONFIG


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "gridpump", "run", write(tmp_path, ONSET), "--out", str(tmp_path / "m")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "m" / "stabilizer_onset.csv").is_file()


def test_noisy_run_is_reproducible_across_workers(tmp_path):
    text = 'scenario = "stabilizer_onset"\ncycles = 1\ndim = 120\nn_traj = 4\nseed = 9\nmode = "sampled"\n'
    cfg = write(tmp_path, text)
    outs = []
    for i, workers in enumerate(("1", "2")):
        out = tmp_path / f"w{i}"
        assert main(["run", cfg, "--out", str(out), "--workers", workers]) == EXIT_OK
        outs.append((out / "stabilizer_onset.csv").read_bytes())
    assert outs[0] == outs[1]
