"""Command-line front end.

    fluxlink run CONFIG [--out DIR] [--threads N]
    fluxlink compare-pulses A B [--interp]

A run config is TOML with one top-level ``experiment`` key and a section per
concern.  Numeric keys carry their unit in the name (``kappa_mhz``,
``t_pulse_us``).  Every run writes CSV traces plus ``summary.json`` into the
output directory; nothing is written unless the whole run succeeds.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, _kernels
from . import circuit, dynamics, emission

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
THREADS_ENV = "FLUXLINK_THREADS"
EXPERIMENTS = ("spectrum", "chevron", "reset", "threshold", "release", "shape")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.field = field


NUMERIC_ERRORS = (
    circuit.NumericError,
    circuit.LabelingError,
    dynamics.IntegrationDivergedError,
    emission.DepletedSourceError,
    emission.DomainError,
    np.linalg.LinAlgError,
    FloatingPointError,
)


# --------------------------------------------------------------------------
# schema: config key -> (kind, default)

_REQUIRED = object()

# device overrides map onto DeviceParams fields; flux values are in flux quanta
DEVICE_KEYS = {
    "e_c_f_ghz": "E_C_f", "e_l_f_ghz": "E_L_f", "e_j_f_ghz": "E_J_f", "alpha": "alpha",
    "e_j_s_ghz": "E_J_s", "n_s": "N_s", "n_snails": "n_snails", "e_c_s_ghz": "E_C_s",
    "e_l_s_ghz": "E_L_s", "c3_s_mhz": "c3_s", "c3_source": "c3_source", "omega_r_ghz": "omega_r",
    "e_c_r_ghz": "E_C_r", "kappa_mhz": "kappa", "chi_fr_mhz": "chi_fr", "g_fs_mhz": "g_fs",
    "g_sr_mhz": "g_sr", "flux_f_quanta": "phi_ext_f", "flux_s_quanta": "phi_ext_s",
    "area_ratio": "area_ratio",
}
_DEVICE_INT = {"n_s", "n_snails"}
_DEVICE_STR = {"c3_source"}

SCHEMA = {
    "": {"experiment": ("str", _REQUIRED)},
    "device": {"preset": ("str", "table1"),
               **{k: ("int" if k in _DEVICE_INT else "str" if k in _DEVICE_STR else "float", None)
                  for k in DEVICE_KEYS}},
    "thermal": {"gamma_total_per_us": ("float", None), "temperature_mk": ("float", dynamics.CALIBRATED_TEMPERATURE),
                "omega_f_ghz": ("float", dynamics.CALIBRATED_OMEGA_F)},
    "spectrum": {"dims": ("ints3", list(circuit.DEFAULT_DIMS)),
                 "flux_basis_dim": ("int", circuit.DEFAULT_FLUX_BASIS_DIM),
                 "n_labels": ("int", 12), "sweep_start_quanta": ("float", 9.4),
                 "sweep_stop_quanta": ("float", 9.6), "sweep_points": ("int", 41)},
    "chevron": {"g_mhz": ("float", 1.27), "detuning_min_mhz": ("float", -3.0),
                "detuning_max_mhz": ("float", 3.0), "detuning_points": ("int", 61),
                "duration_max_us": ("float", 2.0), "duration_points": ("int", 201),
                "buffer_us": ("float", 0.0), "initial": ("str", "e0")},
    "reset": {"g_mhz": ("float", 1.27), "t_pulse_us": ("float", 0.2), "t_buffer_us": ("float", 1.0),
              "mode": ("str", "pulsed"), "n_save": ("int", 400)},
    "threshold": {"g_mhz": ("float", 1.27), "duration_us": ("float", 10.0), "n_save": ("int", 400)},
    "release": {"g_mhz": ("float", 0.1), "duration_us": ("float", 10.0), "samples": ("int", 2001),
                "pulse_file": ("str", None), "f0_re": ("float", 1.0), "f0_im": ("float", 0.0),
                "lo_phase_rad": ("float", 0.0)},
    "shape": {"gamma_ph_mhz": ("float", 0.2), "samples": ("int", emission.DEFAULT_SAMPLES),
              "window": ("float", emission.DEFAULT_WINDOW), "f0_re": ("float", 0.5),
              "f0_im": ("float", 0.0), "quadrature": ("str", "trapezoid")},
    "output": {"dir": ("str", "out"), "formats": ("strs", ["csv", "json"])},
}


def _locate(text: str, section: str, key: str | None = None) -> int | None:
    """Line number (1-based) of ``key`` inside ``[section]``, or of the header."""
    current = ""
    key_re = re.compile(rf"^\s*[\"']?{re.escape(key)}[\"']?\s*=") if key else None
    for lineno, line in enumerate(text.splitlines(), 1):
        header = re.match(r"^\s*\[\s*([^\]]+?)\s*\]", line)
        if header:
            current = header.group(1).strip("\"'")
            if key is None and current == section:
                return lineno
            continue
        if key_re and current == section and key_re.match(line):
            return lineno
    return None


def _coerce(kind: str, value, where: str, line):
    def bad(expected):
        return ConfigError(f"expected {expected}, got {value!r}", line, where)

    if kind == "str":
        if not isinstance(value, str):
            raise bad("a string")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad("an integer")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad("a number")
        value = float(value)
        if not math.isfinite(value):
            raise bad("a finite number")
        return value
    if kind == "ints3":
        if not (isinstance(value, list) and len(value) == 3
                and all(isinstance(v, int) and not isinstance(v, bool) for v in value)):
            raise bad("a list of three integers")
        return list(value)
    if kind == "strs":
        if not (isinstance(value, list) and all(isinstance(v, str) for v in value)):
            raise bad("a list of strings")
        return list(value)
    raise AssertionError(kind)


def parse_config(text: str) -> dict:
    """Parse and type-check a config, filling defaults.  Raises ConfigError."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed TOML: {exc}", int(m.group(1)) if m else None) from None

    resolved: dict = {}
    for section, entries in raw.items():
        if isinstance(entries, dict):
            if section not in SCHEMA or section == "":
                raise ConfigError(f"unknown section [{section}]", _locate(text, section), section)
        elif section not in SCHEMA[""]:
            raise ConfigError("unknown top-level key", _locate(text, "", section), section)

    for section, keys in SCHEMA.items():
        entries = raw if section == "" else raw.get(section, {})
        out = {}
        for key, value in entries.items():
            if section == "" and isinstance(value, dict):
                continue
            name = f"{section}.{key}" if section else key
            if key not in keys:
                raise ConfigError(f"unknown key; allowed: {', '.join(sorted(keys))}",
                                  _locate(text, section, key), name)
            out[key] = _coerce(keys[key][0], value, name, _locate(text, section, key))
        for key, (_, default) in keys.items():
            if key not in out:
                if default is _REQUIRED:
                    raise ConfigError("missing required key", None, key)
                if default is not None:
                    out[key] = default
        if section == "":
            resolved.update(out)
        else:
            resolved[section] = out

    if resolved["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}",
                          _locate(text, "", "experiment"), "experiment")
    bad_formats = set(resolved["output"]["formats"]) - {"csv", "json"}
    if bad_formats:
        raise ConfigError(f"unsupported formats {sorted(bad_formats)}",
                          _locate(text, "output", "formats"), "output.formats")
    resolved["_text"] = text
    return resolved


# --------------------------------------------------------------------------
# validation: build every domain object before any computation


@dataclass
class Job:
    experiment: str
    config: dict  # resolved config, JSON-ready
    device: circuit.DeviceParams
    thermal: dynamics.ThermalModel
    extra: dict


def _field_error(text, section, key, exc):
    return ConfigError(str(exc), _locate(text, section, key), f"{section}.{key}" if key else section)


def build_device(cfg: dict) -> circuit.DeviceParams:
    text, dev = cfg["_text"], cfg["device"]
    try:
        params = circuit.preset(dev["preset"])
    except circuit.InvalidParameterError as exc:
        raise _field_error(text, "device", "preset", exc) from None
    changes = {}
    for key, fname in DEVICE_KEYS.items():
        if key in dev:
            value = dev[key]
            changes[fname] = circuit.flux_to_phase(value) if key.startswith("flux_") else value
    try:
        return params.replace(**changes)
    except circuit.InvalidParameterError as exc:
        key = next((k for k, f in DEVICE_KEYS.items() if f == str(exc).split()[0]), None)
        raise _field_error(text, "device", key, exc) from None


def build_thermal(cfg: dict) -> dynamics.ThermalModel:
    th = cfg["thermal"]
    gamma = th.get("gamma_total_per_us", dynamics.CALIBRATED_GAMMA)
    try:
        return dynamics.thermal_rates(gamma, th["temperature_mk"], th["omega_f_ghz"])
    except ValueError as exc:
        raise _field_error(cfg["_text"], "thermal", None, exc) from None


def _require(cond: bool, cfg, section, key, message):
    if not cond:
        raise ConfigError(message, _locate(cfg["_text"], section, key), f"{section}.{key}")


def validate(cfg: dict, base_dir: Path) -> Job:
    device = build_device(cfg)
    thermal = build_thermal(cfg)
    exp = cfg["experiment"]
    sec = cfg.get(exp, {})
    extra: dict = {}
    if exp == "spectrum":
        try:
            circuit._check_dims(sec["dims"], circuit.DEFAULT_DIMENSION_CAP)
        except (circuit.InvalidParameterError, circuit.DimensionOverflowError) as exc:
            raise _field_error(cfg["_text"], exp, "dims", exc) from None
        _require(sec["flux_basis_dim"] >= circuit.MIN_FLUXONIUM_DIM, cfg, exp, "flux_basis_dim",
                 f"must be at least {circuit.MIN_FLUXONIUM_DIM}")
        _require(sec["sweep_points"] >= 1, cfg, exp, "sweep_points", "must be positive")
        _require(sec["n_labels"] >= 2, cfg, exp, "n_labels", "must be at least 2")
    elif exp == "chevron":
        _require(sec["detuning_points"] >= 1, cfg, exp, "detuning_points", "must be positive")
        _require(sec["duration_points"] >= 2, cfg, exp, "duration_points", "must be at least 2")
        _require(sec["duration_max_us"] > 0, cfg, exp, "duration_max_us", "must be positive")
        _require(sec["buffer_us"] >= 0, cfg, exp, "buffer_us", "must be non-negative")
        _require(sec["initial"] in dynamics.BASIS, cfg, exp, "initial", f"must be one of {dynamics.BASIS}")
    elif exp == "reset":
        _require(sec["mode"] in ("pulsed", "continuous"), cfg, exp, "mode", "must be 'pulsed' or 'continuous'")
        _require(sec["t_pulse_us"] >= 0, cfg, exp, "t_pulse_us", "must be non-negative")
        _require(sec["t_buffer_us"] >= 0, cfg, exp, "t_buffer_us", "must be non-negative")
        _require(sec["t_pulse_us"] + sec["t_buffer_us"] > 0, cfg, exp, "t_pulse_us", "total duration must be positive")
        _require(sec["n_save"] >= 1, cfg, exp, "n_save", "must be positive")
    elif exp == "threshold":
        _require(sec["duration_us"] > 0, cfg, exp, "duration_us", "must be positive")
        _require(sec["n_save"] >= 1, cfg, exp, "n_save", "must be positive")
    elif exp == "release":
        _require(sec["f0_re"] != 0 or sec["f0_im"] != 0, cfg, exp, "f0_re", "source amplitude must be non-zero")
        if "pulse_file" in sec:
            path = base_dir / sec["pulse_file"]
            try:
                extra["pulse"] = emission.PulseEnvelope.load(path)
            except (OSError, ValueError) as exc:
                raise _field_error(cfg["_text"], exp, "pulse_file", exc) from None
        else:
            _require(sec["g_mhz"] >= 0, cfg, exp, "g_mhz", "must be non-negative")
            _require(sec["duration_us"] > 0, cfg, exp, "duration_us", "must be positive")
            _require(sec["samples"] >= 2, cfg, exp, "samples", "must be at least 2")
    elif exp == "shape":
        _require(sec["gamma_ph_mhz"] > 0, cfg, exp, "gamma_ph_mhz", "must be positive")
        _require(sec["gamma_ph_mhz"] < device.kappa, cfg, exp, "gamma_ph_mhz",
                 f"photon bandwidth must be below kappa = {device.kappa} MHz")
        _require(sec["samples"] >= 3, cfg, exp, "samples", "must be at least 3")
        _require(sec["window"] > 0, cfg, exp, "window", "must be positive")
        _require(sec["quadrature"] in ("trapezoid", "riemann"), cfg, exp, "quadrature",
                 "must be 'trapezoid' or 'riemann'")
        _require(sec["f0_re"] != 0 or sec["f0_im"] != 0, cfg, exp, "f0_re", "source amplitude must be non-zero")
    resolved = {k: v for k, v in cfg.items() if not k.startswith("_")}
    resolved["device"] = {"preset": cfg["device"]["preset"], **device.to_dict()}
    resolved["thermal"] = {**cfg["thermal"], "gamma_total_per_us": thermal.gamma_total,
                           "gamma_up_per_us": thermal.gamma_up, "gamma_down_per_us": thermal.gamma_down}
    # keep only the section of the experiment that runs
    for name in EXPERIMENTS:
        if name != exp:
            resolved.pop(name, None)
    resolved[exp] = dict(sec)
    return Job(exp, resolved, device, thermal, extra)


# --------------------------------------------------------------------------
# experiment runners: each returns ({filename: csv text}, results dict)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def _model(job: Job, g: float) -> dynamics.EffectiveModel:
    return dynamics.EffectiveModel(g=g, kappa=job.device.kappa, chi_fr=job.device.chi_fr)


def run_spectrum(job: Job, threads: int):
    sec, p = job.config["spectrum"], job.device
    spec = circuit.diagonalize_system(p, tuple(sec["dims"]), sec["flux_basis_dim"], sec["n_labels"])
    e0 = spec.eigenvalues[0]
    levels = [(k, *spec.labels[k], spec.eigenvalues[k] - e0, spec.overlaps[k]) for k in sorted(spec.labels)]
    fluxes = np.linspace(sec["sweep_start_quanta"], sec["sweep_stop_quanta"], sec["sweep_points"])
    sweep = circuit.flux_sweep(p, circuit.flux_to_phase(fluxes), dim=sec["flux_basis_dim"], threads=threads)
    zpf = circuit.zero_point_fluctuations(spec)
    results = {
        "omega_q_mhz": spec.transition_frequency((0, 0, 0), (1, 0, 0)) * 1e3,
        "omega_q_bare_mhz": circuit.fluxonium_transition(p, p.phi_ext_f, dim=sec["flux_basis_dim"]) * 1e3,
        "chi_fr_mhz": circuit.dispersive_shift(spec, "f", "r"),
        "phi2_g1_e0": circuit.phi2_matrix_element(spec),
        "phi_zpf_f": zpf.phi_zpf_f, "phi_zpf_s": zpf.phi_zpf_s, "phi_zpf_r": zpf.phi_zpf_r,
        "c3_mhz": p.c3,
        "sweep_min_flux_quanta": float(fluxes[int(np.argmin(sweep.frequency))]),
        "sweep_min_frequency_mhz": float(np.min(sweep.frequency)) * 1e3,
    }
    files = {
        "levels.csv": _csv(["index", "n_f", "n_s", "n_r", "energy_ghz", "overlap"], levels),
        "flux_sweep.csv": _csv(["flux_f_quanta", "flux_s_quanta", "frequency_ghz"],
                               zip(fluxes, sweep.phi_ext_s / circuit.TWO_PI, sweep.frequency)),
    }
    return files, results


def run_chevron(job: Job, threads: int):
    sec = job.config["chevron"]
    det = np.linspace(sec["detuning_min_mhz"], sec["detuning_max_mhz"], sec["detuning_points"])
    dur = np.linspace(0.0, sec["duration_max_us"], sec["duration_points"])
    cmap = dynamics.rabi_chevron(_model(job, sec["g_mhz"]), det, dur, thermal=job.thermal,
                                 rho0=dynamics.DensityMatrix.pure(sec["initial"]),
                                 t_buffer=sec["buffer_us"], threads=threads)
    rows = ((d, t, cmap.population[i, j]) for i, d in enumerate(det) for j, t in enumerate(dur))
    i0 = int(np.argmin(np.abs(det)))
    return ({"chevron.csv": _csv(["detuning_mhz", "duration_us", "p_e0"], rows)},
            {"dt_us": cmap.dt, "min_p_e0_at_smallest_detuning": float(np.min(cmap.population[i0]))})


def _trace_csv(trace: dynamics.SimulationTrace) -> str:
    pops = trace.populations
    return _csv(["time_us"] + [f"p_{b}" for b in dynamics.BASIS],
                ([t, *row] for t, row in zip(trace.times, pops)))


def run_reset(job: Job, threads: int):
    sec = job.config["reset"]
    res = dynamics.reset_simulation(_model(job, sec["g_mhz"]), job.thermal, sec["t_pulse_us"],
                                    sec["t_buffer_us"], sec["mode"], n_save=sec["n_save"])
    final = res.trace.final
    results = {"final_p_g0": final["g0"], "final_qubit_ground": final["g0"] + final["g1"],
               "initial_p_g0": float(res.trace.populations[0, 0])}
    if res.plateau is not None:
        results["plateau_p_g0"] = res.plateau
    return {"reset_trace.csv": _trace_csv(res.trace)}, results


def run_threshold(job: Job, threads: int):
    sec = job.config["threshold"]
    model = _model(job, sec["g_mhz"])
    res = dynamics.reset_simulation(model, job.thermal, sec["duration_us"], 0.0, "continuous",
                                    n_save=sec["n_save"])
    ss = dynamics.steady_state(model, job.thermal)
    gamma_eff = dynamics.TWO_PI * dynamics.effective_decay_rate(abs(model.g), model.kappa)
    results = {
        "reset_threshold": float(ss.populations[0]),
        "reset_threshold_formula": dynamics.reset_threshold(job.thermal, gamma_eff),
        "plateau_p_g0": res.plateau,
        "gamma_eff_per_us": gamma_eff,
        "thermal_ground_population": job.thermal.ground_population,
    }
    return {"threshold_trace.csv": _trace_csv(res.trace)}, results


def run_release(job: Job, threads: int):
    sec, kappa = job.config["release"], job.device.kappa
    f0 = complex(sec["f0_re"], sec["f0_im"])
    if "pulse" in job.extra:
        env = job.extra["pulse"]
    else:
        t = np.linspace(0.0, sec["duration_us"], sec["samples"])
        env = emission.PulseEnvelope.from_times(t, np.full(t.size, sec["g_mhz"]))
    tr = emission.heisenberg_evolve(env, kappa, f0)
    iq = emission.quadrature_trace(tr, sec["lo_phase_rad"])
    rows = zip(tr.times, tr.f_amp.real, tr.f_amp.imag, tr.r_amp.real, tr.r_amp.imag,
               tr.r_out.real, tr.r_out.imag, iq)
    header = ["time_us", "f_re", "f_im", "r_re", "r_im", "r_out_re_sqrt_per_us", "r_out_im_sqrt_per_us",
              "i_quadrature_sqrt_per_us"]
    balance = tr.energy_balance()
    results = {
        "emitted_excitations": float(tr.emitted()[-1]),
        "remaining_source": float(abs(tr.f_amp[-1]) ** 2),
        "evacuation_residual": emission.evacuation_check(env, tr, f0),
        "energy_balance_error": float(np.max(np.abs(balance - abs(f0) ** 2)) / abs(f0) ** 2),
        "dt_us": tr.dt,
    }
    return {"release.csv": _csv(header, rows)}, results


def run_shape(job: Job, threads: int):
    sec, kappa = job.config["shape"], job.device.kappa
    f0 = complex(sec["f0_re"], sec["f0_im"])
    rep = emission.shape_sech(sec["gamma_ph_mhz"], kappa, f0, sec["samples"], sec["window"], sec["quadrature"])
    files = {
        "target_field.csv": rep.target.to_csv("sqrt_per_us"),
        "g_numeric.csv": rep.g_numeric.to_csv("mhz"),
        "g_analytic.csv": rep.g_analytic.to_csv("mhz"),
    }
    results = {
        "analytic_vs_numeric_rms": rep.analytic_vs_numeric,
        "round_trip_rms_numeric": rep.round_trip_numeric,
        "round_trip_rms_analytic": rep.round_trip_analytic,
        "evacuation_residual": rep.evacuation_residual,
        "target_excitations": rep.target.energy(),
    }
    return files, results


RUNNERS = {"spectrum": run_spectrum, "chevron": run_chevron, "reset": run_reset,
           "threshold": run_threshold, "release": run_release, "shape": run_shape}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def summary_json(job: Job, results: dict, files) -> str:
    doc = {
        "tool": {"name": "fluxlink", "version": __version__, "backend": _kernels.BACKEND},
        "experiment": job.experiment,
        "config": job.config,
        "results": results,
        "files": sorted(files),
    }
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return 1


def run(config_path, out: str | None = None, threads: int | None = None) -> int:
    path = Path(config_path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text)
        if out is not None:
            cfg["output"]["dir"] = out
        job = validate(cfg, path.parent)
        n_threads = resolve_threads(threads)
    except ConfigError as exc:
        print(f"config error: {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            files, results = RUNNERS[job.experiment](job, n_threads)
    except NUMERIC_ERRORS as exc:
        module = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"numeric error ({module}.{type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    formats = set(job.config["output"]["formats"])
    outputs = dict(files) if "csv" in formats else {}
    if "json" in formats:
        outputs["summary.json"] = summary_json(job, results, outputs)
    out_dir = Path(job.config["output"]["dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, content in sorted(outputs.items()):
        (out_dir / name).write_text(content, encoding="utf-8")
    for key in sorted(results):
        print(f"{key} = {results[key]}")
    return EXIT_OK


# --------------------------------------------------------------------------
# compare-pulses


class GridMismatchError(ValueError):
    pass


def compare_pulses(a: emission.PulseEnvelope, b: emission.PulseEnvelope, interp: bool = False,
                   support: emission.PulseEnvelope | None = None, fraction: float = 0.01) -> float:
    """RMS of ``|a - b|`` normalized by the peak of ``|a|`` over the union support.

    With ``support`` (for example the target field of a shaping run) only
    samples where ``|support|`` exceeds ``fraction`` of its peak count.  The
    coupling that follows a completed release is arbitrary, so shaped pulses
    are only comparable where the photon is actually being emitted.
    """
    same = (len(a) == len(b) and math.isclose(a.t0, b.t0, rel_tol=1e-9, abs_tol=1e-12)
            and math.isclose(a.dt, b.dt, rel_tol=1e-9))
    if same:
        va, vb = a.samples, b.samples
    elif not interp:
        raise GridMismatchError("pulse grids differ; pass --interp to resample onto the union grid")
    else:
        t0, t1 = min(a.t0, b.t0), max(a.t_end, b.t_end)
        dt = min(a.dt, b.dt)
        t = t0 + dt * np.arange(int(round((t1 - t0) / dt)) + 1)
        va, vb = a.at(t), b.at(t)
    peak = float(np.max(np.abs(va)))
    if peak == 0:
        raise ValueError("reference pulse is identically zero")
    if support is None:
        mask = np.ones(va.shape, dtype=bool)
    else:
        t = a.times if same else t
        mask = emission.support_mask(support.at(t), fraction)
        if not mask.any():
            raise ValueError("support pulse does not overlap the compared grid")
    return float(np.sqrt(np.mean(np.abs(va - vb)[mask] ** 2)) / peak)


def _compare_main(args) -> int:
    try:
        a = emission.PulseEnvelope.load(args.a)
        b = emission.PulseEnvelope.load(args.b)
        support = emission.PulseEnvelope.load(args.support) if args.support else None
        value = compare_pulses(a, b, args.interp, support, args.support_fraction)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(repr(value))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fluxlink", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"fluxlink {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the experiment described by a TOML config")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (overrides output.dir)")
    p_run.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    p_cmp = sub.add_parser("compare-pulses", help="RMS relative difference of two pulse files")
    p_cmp.add_argument("a")
    p_cmp.add_argument("b")
    p_cmp.add_argument("--interp", action="store_true", help="resample onto the union grid")
    p_cmp.add_argument("--support", metavar="FIELD", help="only compare where |FIELD| is above --support-fraction of its peak")
    p_cmp.add_argument("--support-fraction", type=float, default=0.01)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run(args.config, args.out, args.threads)
    return _compare_main(args)


if __name__ == "__main__":
    sys.exit(main())
