import json
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from fluxlink import cli, emission
from fluxlink.emission import PulseEnvelope

SMALL = {
    "spectrum": """
        [spectrum]
        dims = [10, 4, 4]
        sweep_points = 5
        """,
    "chevron": """
        [chevron]
        detuning_points = 5
        duration_max_us = 0.4
        duration_points = 21
        """,
    "reset": """
        [reset]
        t_pulse_us = 0.2
        t_buffer_us = 0.3
        n_save = 50
        """,
    "threshold": """
        [threshold]
        duration_us = 6.0
        n_save = 60
        """,
    "release": """
        [release]
        g_mhz = 0.1
        duration_us = 4.0
        samples = 401
        """,
    "shape": """
        [shape]
        samples = 1001
        """,
}

EXPECTED_FILES = {
    "spectrum": {"levels.csv", "flux_sweep.csv"},
    "chevron": {"chevron.csv"},
    "reset": {"reset_trace.csv"},
    "threshold": {"threshold_trace.csv"},
    "release": {"release.csv"},
    "shape": {"target_field.csv", "g_numeric.csv", "g_analytic.csv"},
}


def write_config(tmp_path, experiment, body="", name="run.toml"):
    path = tmp_path / name
    path.write_text(f'experiment = "{experiment}"\n' + textwrap.dedent(body))
    return path


def run(tmp_path, experiment, body=None, out="out", extra=()):
    cfg = write_config(tmp_path, experiment, SMALL[experiment] if body is None else body)
    out_dir = tmp_path / out
    code = cli.main(["run", str(cfg), "--out", str(out_dir), *extra])
    return code, out_dir


def summary(out_dir):
    return json.loads((out_dir / "summary.json").read_text())


@pytest.mark.parametrize("experiment", cli.EXPERIMENTS)
def test_every_experiment_runs(tmp_path, experiment):
    code, out = run(tmp_path, experiment)
    assert code == 0
    assert {p.name for p in out.iterdir()} == EXPECTED_FILES[experiment] | {"summary.json"}
    doc = summary(out)
    assert doc["experiment"] == experiment
    assert doc["tool"]["name"] == "fluxlink" and doc["tool"]["backend"] in ("numba", "numpy")
    assert set(doc["files"]) == EXPECTED_FILES[experiment]
    # only the section of the experiment that ran is recorded
    assert not (set(cli.EXPERIMENTS) - {experiment}) & set(doc["config"])


def test_outputs_are_byte_identical(tmp_path):
    _, a = run(tmp_path, "chevron", out="a")
    _, b = run(tmp_path, "chevron", out="b")
    for name in EXPECTED_FILES["chevron"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    da, db = summary(a), summary(b)
    da["config"]["output"].pop("dir"), db["config"]["output"].pop("dir")
    assert da == db


def test_threshold_summary(tmp_path):
    _, out = run(tmp_path, "threshold")
    res = summary(out)["results"]
    assert res["reset_threshold_formula"] == pytest.approx(0.993, abs=1e-9)
    assert res["reset_threshold"] == pytest.approx(0.993, abs=2e-3)
    assert res["plateau_p_g0"] == pytest.approx(res["reset_threshold"], abs=2e-3)


def test_spectrum_summary_matches_library(tmp_path):
    _, out = run(tmp_path, "spectrum", SMALL["spectrum"].replace("[10, 4, 4]", "[10, 5, 4]"))
    res = summary(out)["results"]
    assert res["omega_q_mhz"] == pytest.approx(77.16, abs=0.5)
    assert res["sweep_min_flux_quanta"] == pytest.approx(9.5)


def test_device_override_reaches_the_model(tmp_path):
    body = SMALL["release"] + "\n[device]\nkappa_mhz = 0.8\n"
    _, out = run(tmp_path, "release", body)
    doc = summary(out)
    assert doc["config"]["device"]["kappa"] == 0.8
    assert doc["results"]["energy_balance_error"] < 1e-4


def test_shape_round_trip_through_release(tmp_path):
    code, shaped = run(tmp_path, "shape")
    assert code == 0
    (tmp_path / "g.csv").write_text((shaped / "g_numeric.csv").read_text())
    body = '[release]\npulse_file = "g.csv"\nf0_re = 0.5\n'
    code, released = run(tmp_path, "release", body, out="rel")
    assert code == 0
    res = summary(released)["results"]
    assert res["emitted_excitations"] == pytest.approx(0.25, rel=0.02)
    target = PulseEnvelope.load(shaped / "target_field.csv")
    g = PulseEnvelope.load(tmp_path / "g.csv")
    out = emission.heisenberg_evolve(g, 0.4, 0.5).output_at(target.times)
    assert emission.rms_relative(out, target.samples, emission.support_mask(target.samples)) < 0.02


# --- configuration errors: exit 2 and nothing written ---------------------


@pytest.mark.parametrize("body,fragment", [
    ("[chevron]\ng_mhz = \"fast\"\n", "line 3"),
    ("[chevron]\ng_mhz = 1.0\nspeed = 2\n", "chevron.speed"),
    ("[chevrons]\n", "unknown section"),
    ("[device]\nflux_f_quanta = \"half\"\n", "device.flux_f_quanta"),
    ("[device]\nkappa_mhz = -1.0\n", "kappa"),
    ("[chevron]\ng_mhz = 1.0\ng_mhz =\n", "malformed TOML"),
    ("[chevron]\ninitial = \"x1\"\n", "chevron.initial"),
])
def test_config_errors(tmp_path, capsys, body, fragment):
    code, out = run(tmp_path, "chevron", body)
    assert code == cli.EXIT_CONFIG
    assert not out.exists()
    assert fragment in capsys.readouterr().err


def test_bandwidth_above_kappa_rejected(tmp_path, capsys):
    code, out = run(tmp_path, "shape", "[shape]\ngamma_ph_mhz = 0.5\n")
    assert code == cli.EXIT_CONFIG and not out.exists()
    assert "shape.gamma_ph_mhz" in capsys.readouterr().err


def test_unknown_experiment_and_missing_file(tmp_path):
    code, out = run(tmp_path, "sweep", "")
    assert code == cli.EXIT_CONFIG and not out.exists()
    assert cli.main(["run", str(tmp_path / "nope.toml")]) == cli.EXIT_CONFIG


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise FloatingPointError("overflow")

    monkeypatch.setitem(cli.RUNNERS, "reset", boom)
    code, out = run(tmp_path, "reset")
    assert code == cli.EXIT_NUMERIC and not out.exists()


def test_threads_flag_and_environment(tmp_path, monkeypatch):
    monkeypatch.delenv(cli.THREADS_ENV, raising=False)
    assert cli.resolve_threads(None) == 1
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    assert cli.resolve_threads(None) == 3
    assert cli.resolve_threads(2) == 2
    _, a = run(tmp_path, "chevron", out="env")
    _, b = run(tmp_path, "chevron", out="flag", extra=["--threads", "1"])
    assert (a / "chevron.csv").read_bytes() == (b / "chevron.csv").read_bytes()
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    code, out = run(tmp_path, "chevron", out="bad")
    assert code == cli.EXIT_CONFIG and not out.exists()


# --- compare-pulses ------------------------------------------------------


@pytest.fixture
def pulses(tmp_path):
    t = np.linspace(-2, 2, 201)
    a = PulseEnvelope.from_times(t, np.exp(-t ** 2) * (1 + 0.2j))
    a.save(tmp_path / "a.csv", "mhz")
    PulseEnvelope(a.t0, a.dt, -a.samples).save(tmp_path / "neg.csv", "mhz")
    PulseEnvelope.from_times(t[::2], a.samples[::2]).save(tmp_path / "coarse.csv", "mhz")
    return tmp_path, a


def compare(capsys, *args):
    code = cli.main(["compare-pulses", *map(str, args)])
    return code, capsys.readouterr()


def test_compare_identical_and_negated(pulses, capsys):
    d, a = pulses
    code, out = compare(capsys, d / "a.csv", d / "a.csv")
    assert code == 0 and float(out.out) == 0.0
    code, out = compare(capsys, d / "a.csv", d / "neg.csv")
    expected = 2 * np.sqrt(np.mean(np.abs(a.samples) ** 2)) / np.max(np.abs(a.samples))
    assert float(out.out) == pytest.approx(expected, rel=1e-12)


def test_compare_grid_mismatch(pulses, capsys):
    d, _ = pulses
    code, out = compare(capsys, d / "a.csv", d / "coarse.csv")
    assert code == cli.EXIT_CONFIG and "--interp" in out.err
    code, out = compare(capsys, d / "a.csv", d / "coarse.csv", "--interp")
    assert code == 0 and float(out.out) < 1e-3


def test_compare_with_support(pulses, capsys):
    d, a = pulses
    # disagree only where the support field is negligible
    tail = a.samples.copy()
    tail[np.abs(a.times) > 1.8] += 1.0
    PulseEnvelope(a.t0, a.dt, tail).save(d / "tail.csv", "mhz")
    PulseEnvelope.from_times(a.times, np.exp(-4 * a.times ** 2)).save(d / "field.csv")
    code, full = compare(capsys, d / "a.csv", d / "tail.csv")
    assert float(full.out) > 0.1
    code, masked = compare(capsys, d / "a.csv", d / "tail.csv", "--support", d / "field.csv")
    assert code == 0 and float(masked.out) == 0.0


def test_console_script_entry_point(tmp_path):
    cfg = write_config(tmp_path, "reset", SMALL["reset"])
    proc = subprocess.run([sys.executable, "-m", "fluxlink.cli", "run", str(cfg), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "final_p_g0 = " in proc.stdout
    assert (tmp_path / "o" / "summary.json").exists()
