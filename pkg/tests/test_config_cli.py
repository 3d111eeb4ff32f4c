import json
import math
import os
import subprocess
import sys
import warnings

import numpy as np
import pytest

from axialize import cli, presets
from axialize.config import load_config, load_config_text
from axialize.exceptions import FitFailureError, InvalidConfigError
from axialize.modes import cooling_window

TWO_PI = 2 * math.pi


def cfg(text, *overrides):
    return load_config_text(text, "test.toml", overrides)


def test_defaults_reproduce_reference_trap():
    c = cfg('experiment = "modes"')
    assert c.modes.omega_z / TWO_PI == pytest.approx(141e3, rel=1e-12)
    assert c.drive is None
    assert c.seed == 0 and not c.analytic


def test_experiment_required_and_checked():
    with pytest.raises(InvalidConfigError, match="experiment"):
        cfg("seed = 1")
    with pytest.raises(InvalidConfigError, match="expected one of"):
        cfg('experiment = "spin-echo"')


def test_unknown_field_reports_line():
    text = 'experiment = "modes"\n\n[trap]\nU0_V = 4.0\nUo_V = 4.0\n'
    with pytest.raises(InvalidConfigError) as e:
        cfg(text)
    assert "trap.Uo_V" in str(e.value) and "line 5" in str(e.value)
    with pytest.raises(InvalidConfigError, match=r"unknown section \[laser\]"):
        cfg('experiment = "modes"\n[laser]\nx = 1\n')


def test_type_errors():
    with pytest.raises(InvalidConfigError, match="expected number.*line 3|line 3"):
        cfg('experiment = "modes"\n[trap]\nB_T = "strong"\n')
    with pytest.raises(InvalidConfigError, match="list of numbers"):
        cfg('experiment = "amplitude-sweep"\n[amplitude_sweep]\nV0_mV = [1, "two"]\n')
    with pytest.raises(InvalidConfigError):
        cfg('experiment = "modes"\nseed = true\n')
    with pytest.raises(InvalidConfigError):
        cfg('experiment = "modes"\nseed = -1\n')
    with pytest.raises(InvalidConfigError):
        cfg('experiment = "modes" = 3')


def test_override_precedence():
    c = cfg('experiment = "modes"\nseed = 3\n[trap]\nB_T = 1.2\n', "seed=5", "trap.B_T=0.98")
    assert c.seed == 5
    assert c.modes.omega_c == pytest.approx(cfg('experiment = "modes"').modes.omega_c)
    with pytest.raises(InvalidConfigError):
        cfg('experiment = "modes"', "no-equals-sign")


def test_drive_units_and_exclusions():
    c = cfg('experiment = "modes"\n[drive]\ncoupling_kHz = 5.6\ndetuning_kHz = 2.0\n')
    assert c.drive.delta == pytest.approx(0.5 * TWO_PI * 2e3)
    assert c.drive.omega_a == pytest.approx(c.modes.omega_c + TWO_PI * 2e3)
    assert c.drive.coupling(c.modes) == pytest.approx(TWO_PI * 5.6e3)
    with pytest.raises(InvalidConfigError, match="mutually exclusive"):
        cfg('experiment = "modes"\n[drive]\ncoupling_kHz = 5.6\nV0_mV = 200\n')
    with pytest.raises(InvalidConfigError, match="mutually exclusive"):
        cfg('experiment = "modes"\n[drive]\ncoupling_kHz = 1\ndetuning_kHz = 0\nfrequency_kHz = 376\n')
    s = cfg('experiment = "modes"\n[drive]\nV0_mV = 200\ncalibration = "simion"\n')
    assert s.drive.coupling(s.modes) == pytest.approx(TWO_PI * 8.2e3)
    g = cfg('experiment = "modes"\n[drive]\nV0_mV = 200\n')
    ion, r0 = g.trap.ion, presets.R0
    assert g.drive.epsilon == pytest.approx(ion.q * 0.2 / (2 * ion.mass * r0 ** 2))
    with pytest.raises(InvalidConfigError, match="needs the trap"):
        cfg('experiment = "modes"\n[trap]\ncyclotron_frequency_kHz = 379.5\n'
            'magnetron_frequency_kHz = 23.9\naxial_frequency_kHz = 141\n'
            '[drive]\nV0_mV = 200\n')


def test_cooling_choices():
    c = cfg('experiment = "modes"\n[cooling]\nbeta_per_s = 100\nbalanced = true\n')
    assert c.cool.alpha == pytest.approx(50 * c.modes.omega_c)
    with pytest.raises(InvalidConfigError, match="choose one"):
        cfg('experiment = "modes"\n[cooling]\nalpha_per_s2 = 1e8\nmagnetron_rate_per_s = 3\n')
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        b = cfg('experiment = "modes"\n[cooling.beam]\ndetuning_MHz = -23\n')
    assert b.cooling_beam is not None
    assert cooling_window(b.cool, b.modes)


def test_load_config_file(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('experiment = "modes"\nseed = 9\n')
    assert load_config(p).seed == 9
    with pytest.raises(InvalidConfigError, match="cannot read"):
        load_config(tmp_path / "missing.toml")


# --- CLI ----------------------------------------------------------------------

def run(tmp_path, name, *args, config=None):
    argv = [name, "--out", str(tmp_path / name)] + list(args)
    if config is not None:
        p = tmp_path / f"{name}.toml"
        p.write_text(config)
        argv += ["--config", str(p)]
    return cli.main(argv), tmp_path / name


@pytest.mark.parametrize("name", ["modes", "amplitude-sweep", "phase-scan", "avoided-crossing",
                                  "trajectory"])
def test_every_subcommand_analytic(tmp_path, name, capsys):
    code, out = run(tmp_path, name, "--analytic", "--jobs", "1",
                    config="[trajectory]\nduration_ms = 0.5\n[drive]\ncoupling_kHz = 3.0\n")
    assert code == 0, capsys.readouterr().err
    man = json.loads((out / "manifest.json").read_text())
    assert man["experiment"] == name
    assert set(man["outputs_sha256"]) == {f for f in os.listdir(out) if f != "manifest.json"}
    for f in os.listdir(out):
        if f.endswith(".csv"):
            header = (out / f).read_text().splitlines()[0]
            assert "_" in header  # every column names its unit


def test_avoided_crossing_needs_drive(tmp_path, capsys):
    code, _ = run(tmp_path, "avoided-crossing", "--analytic")
    assert code == cli.EXIT_CONFIG
    assert "[drive]" in capsys.readouterr().err


def test_exit_codes(tmp_path, capsys, monkeypatch):
    code, _ = run(tmp_path, "modes", config="[trap]\nbogus = 1\n")
    assert code == cli.EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err
    code, _ = run(tmp_path, "modes", "--set", "trap.B_T=0.05", "--analytic")
    assert code == cli.EXIT_PHYSICS
    assert "UnstableTrap" in capsys.readouterr().err
    with pytest.raises(SystemExit) as e:
        cli.main(["modes", "--seed", "-4"])
    assert e.value.code == 2

    def boom(*a, **k):
        raise FitFailureError("no convergence")
    monkeypatch.setattr(cli, "run_experiment", boom)
    code, _ = run(tmp_path, "phase-scan")
    assert code == cli.EXIT_FIT


def test_manifest_rerun_reproduces_outputs(tmp_path):
    first = tmp_path / "a"
    argv = ["phase-scan", "--out", str(first), "--jobs", "1", "--seed", "17",
            "--set", "statistics.photons_per_point=5000", "--set", "phase_scan.points=9"]
    assert cli.main(argv) == 0
    man = json.loads((first / "manifest.json").read_text())
    again = list(man["argv"])
    again[again.index("--out") + 1] = str(tmp_path / "b")
    assert cli.main(again) == 0
    man2 = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert man2["outputs_sha256"] == man["outputs_sha256"]
    assert man["seed"] == 17


def test_jobs_do_not_change_results(tmp_path):
    common = ["--seed", "3", "--set", "statistics.photons_per_point=5000",
              "--set", "phase_scan.points=9"]
    assert cli.main(["phase-scan", "--out", str(tmp_path / "j1"), "--jobs", "1"] + common) == 0
    assert cli.main(["phase-scan", "--out", str(tmp_path / "j2"), "--jobs", "2"] + common) == 0
    a = json.loads((tmp_path / "j1" / "manifest.json").read_text())["outputs_sha256"]
    b = json.loads((tmp_path / "j2" / "manifest.json").read_text())["outputs_sha256"]
    assert a == b


def test_dat_output(tmp_path):
    code, out = run(tmp_path, "avoided-crossing", "--analytic", "--dat",
                    config="[drive]\ncoupling_kHz = 5.6\n")
    assert code == 0
    dats = [f for f in os.listdir(out) if f.endswith(".dat")]
    assert dats
    arr = np.loadtxt(out / dats[0])
    assert arr.ndim == 2


def test_console_script(tmp_path):
    r = subprocess.run([sys.executable, "-m", "axialize.cli", "modes", "--analytic",
                        "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "kHz" in r.stdout
