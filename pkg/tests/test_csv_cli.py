import math
import subprocess
import sys

import numpy as np
import pytest

from dnss import cli, csvio, experiments
from dnss.errors import ConfigError

BASE = """
[system]
larmor_hz = 2.1e6
a_perp_hz = 44e3
detuning_hz = 1e6
pulse_width_s = 40e-9

[sequence]
preset = dnss_detuned
n_pulses = 336
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# --- csv --------------------------------------------------------------------

def test_format_value():
    assert csvio.format_value(0.1) == "1.00000000000e-01"
    assert csvio.format_value(np.float64(-2.5e-7)) == "-2.50000000000e-07"
    assert csvio.format_value(3) == "3" and csvio.format_value(np.int64(4)) == "4"
    assert csvio.format_value(True) == "true" and csvio.format_value(np.bool_(False)) == "false"
    assert csvio.format_value(None) == "" and csvio.format_value("X+up") == "X+up"
    # twelve significant digits
    assert len(csvio.format_value(math.pi).split("e")[0].replace(".", "")) == 12


def test_csv_round_trip(tmp_path):
    path = tmp_path / "a.csv"
    csvio.write_csv(path, [("x", [1.0, 2.0]), ("n", [1, 2])], {"k": 1.5, "s": "a b"})
    meta, header, rows = csvio.read_csv(path)
    assert meta == {"k": "1.50000000000e+00", "s": "a b"}
    assert header == ["x", "n"]
    assert rows == [["1.00000000000e+00", "1"], ["2.00000000000e+00", "2"]]
    with pytest.raises(ValueError):
        csvio.render_csv([("x", [1]), ("y", [1, 2])])


# --- config -----------------------------------------------------------------

def test_unknown_key_suggests(tmp_path):
    path = write(tmp_path, BASE.replace("detuning_hz", "detunning_hz") + "[experiment]\nkind = dips\n")
    with pytest.raises(ConfigError) as exc:
        experiments.load_config(path)
    assert "detunning_hz" in str(exc.value) and "'detuning_hz'" in str(exc.value)


def test_all_errors_reported(tmp_path):
    text = BASE.replace("detuning_hz", "detunning_hz") + (
        "[experiment]\nkind = traces\n[grids]\ntau = 3e-7, 2e-7, 11\n[outputs]\npath = x\n"
    )
    with pytest.raises(ConfigError) as exc:
        experiments.load_config(write(tmp_path, text))
    msg = str(exc.value)
    for part in ("detunning_hz", "kind must be one of", "start < stop", "unknown section [outputs]"):
        assert part in msg


def test_negative_duration_has_location(tmp_path):
    seq = tmp_path / "short.seq"
    seq.write_text("param t = 100e-9;\nrepeat 4 {\n  wait t;\n  pulse pi x;\n  wait t;\n}\n")
    text = BASE.replace("preset = dnss_detuned\nn_pulses = 336", "file = short.seq") + (
        "[bindings]\nt = 15e-9\n[experiment]\nkind = trace\n[grids]\ntau = 2e-7, 3e-7, 11\n"
    )
    with pytest.raises(ConfigError) as exc:
        experiments.load_config(write(tmp_path, text))
    assert "short.seq:3:3" in str(exc.value) and "NegativeDuration" in str(exc.value)


def test_syntax_error_has_location(tmp_path):
    (tmp_path / "bad.seq").write_text("wait tau;\npulse pi z q;\n")
    text = BASE.replace("preset = dnss_detuned\nn_pulses = 336", "file = bad.seq") + (
        "[experiment]\nkind = dips\n"
    )
    with pytest.raises(ConfigError) as exc:
        experiments.load_config(write(tmp_path, text))
    assert "bad.seq:2:12" in str(exc.value)


def test_grid_rules():
    errors = []
    assert experiments._grid("1, 2, 1", "tau", errors) is None
    assert experiments._grid("1, 2", "tau", errors) is None
    assert experiments._grid("1, 2, 3, 4", "tau", errors) is None
    assert len(errors) == 3
    assert np.allclose(experiments._grid("1, 2, 3", "tau", errors), [1, 1.5, 2])


def test_angular_convention():
    sec = {k: dict(v) for k, v in experiments.FIGURE_PRESETS["fig3b"].items()}
    sec["system"] = {k: repr(float(v) * 2 * math.pi) if k.endswith("_hz") else v
                     for k, v in sec["system"].items()}
    cfg = experiments.build_config(sec, frequency_convention="angular")
    ref = experiments.figure_config("fig3b")
    assert math.isclose(cfg.params.larmor_hz, ref.params.larmor_hz)
    assert math.isclose(cfg.params.detuning_hz, ref.params.detuning_hz)


def test_every_preset_validates():
    for name in experiments.FIGURE_PRESETS:
        assert cli.main(["validate", "--preset", name]) == 0


# --- cli --------------------------------------------------------------------

def test_dips_output(capsys):
    assert cli.main(["dips", "--larmor-hz", "2.1e6"]) == 0
    out = capsys.readouterr().out.strip()
    fields = dict(x.split("=") for x in out.split())
    assert fields["tau_plus"] == fields["tau_minus"] == "2.380952e-07"
    assert fields["converged"] == "true"
    assert cli.main(["dips", "--larmor-hz", "2.1e6", "--harmonic", "2"]) == 0
    assert "tau_plus=7.142857e-07" in capsys.readouterr().out
    assert cli.main(["dips", "--larmor-hz", "2.1e6", "--sequence", "dnss_flip", "--eps", "0"]) == 0
    assert "tau_plus=2.380952e-07" in capsys.readouterr().out


def test_dips_errors(capsys):
    rc = cli.main(["dips", "--larmor-hz", "2.1e6", "--detuning-hz", "4e6", "--pulse-width-s",
                   "40e-9", "--sequence", "dnss_detuned"])
    assert rc == 2 and "OutOfRegime" in capsys.readouterr().err
    assert cli.main(["dips", "--larmor-hz", "2.1e6", "--sequence", "udd"]) == 2


def test_dips_not_converged(monkeypatch, capsys):
    from dnss import floquet
    real = floquet.predict_dips
    monkeypatch.setattr(floquet, "predict_dips", lambda *a, **k: real(*a, max_iter=1, **k))
    rc = cli.main(["dips", "--larmor-hz", "2.1e6", "--detuning-hz", "1e6", "--pulse-width-s",
                   "40e-9", "--sequence", "dnss_detuned"])
    assert rc == 1 and "converged=false" in capsys.readouterr().out


def test_spectrum_and_theta_commands(tmp_path, capsys):
    common = ["--larmor-hz", "2.1e6", "--a-perp-hz", "44e3", "--detuning-hz", "1e6",
              "--pulse-width-s", "40e-9", "--sequence", "dnss_detuned", "--out", str(tmp_path)]
    assert cli.main(["spectrum", *common, "--tau", "2.2e-7,2.6e-7,21", "--plot-script"]) == 0
    meta, header, rows = csvio.read_csv(tmp_path / "spectrum.csv")
    assert header[0] == "tau_s" and len(rows) == 21 and meta["spectrum"] == "full"
    assert (tmp_path / "spectrum.gp").exists()
    assert cli.main(["theta", *common, "--tau-larmor", "0.9,1.1,5"]) == 0
    meta, header, rows = csvio.read_csv(tmp_path / "theta.csv")
    assert header == ["tau_s", "theta_rad", "in_regime", "axis_x2"] and len(rows) == 5
    assert float(rows[2][0]) == pytest.approx(1 / 4.2e6)


def test_run_config_kinds(tmp_path):
    for kind, extra in [
        ("trace", "initial_nuclear = up, down\n[grids]\ntau = 2.2e-7, 2.6e-7, 11\n"),
        ("dips", ""),
        ("theta", "[grids]\ntau = 2.2e-7, 2.6e-7, 5\n"),
        ("spectrum", "spectrum = unperturbed\n[grids]\ntau = 2.2e-7, 2.6e-7, 5\n"),
        ("polarize", "tau = 2.3e-7\nn_max = 20\n"),
    ]:
        path = write(tmp_path, BASE + f"[experiment]\nkind = {kind}\n{extra}[output]\npath = {kind}.csv\n",
                     f"{kind}.ini")
        assert cli.main(["run", "--config", path, "--out", str(tmp_path / "o")]) == 0
        meta, header, rows = csvio.read_csv(tmp_path / "o" / f"{kind}.csv")
        assert meta["experiment"] == kind and meta["larmor_hz"] == "2.10000000000e+06"
        assert rows


def test_run_is_byte_identical(tmp_path):
    path = write(tmp_path, BASE.replace("n_pulses = 336", "n_pulses = 8") + (
        "[experiment]\nkind = sweep\ntp_list = 0, 40e-9\n"
        "[grids]\ntau = 2.2e-7, 2.6e-7, 9\ndetuning_hz = 0, 2e6, 3\n"
    ))
    cli.main(["run", "--config", path, "--out", str(tmp_path / "a")])
    cli.main(["run", "--config", path, "--out", str(tmp_path / "b"), "--jobs", "2"])
    for name in ("sweep_tp0.csv", "sweep_tp1.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_argument_errors(capsys):
    assert cli.main(["run"]) == 2
    assert cli.main(["run", "--preset", "fig9"]) == 2
    assert "did you mean" in capsys.readouterr().err
    assert cli.main(["validate", "--config", "/nonexistent.ini"]) == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "dnss", "dips", "--larmor-hz", "2.1e6"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.startswith("harmonic=1 ")
