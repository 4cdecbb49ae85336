import math

import numpy as np
import pytest
from scipy.integrate import quad

from fluxlink import dynamics as dyn
from fluxlink.dynamics import NO_LOSS, DensityMatrix, EffectiveModel

TWO_PI = 2 * math.pi


def first_null(trace, label="e0"):
    p = trace.population(label)
    i = int(np.argmax((p[1:-1] < p[:-2]) & (p[1:-1] <= p[2:]))) + 1
    a, b, c = p[i - 1], p[i], p[i + 1]
    return trace.times[i] + 0.5 * (a - c) / (a - 2 * b + c) * (trace.times[1] - trace.times[0])


# --- closed-form oracles -------------------------------------------------


def test_lossless_swap_time():
    # pi / (2 g) with g = 2 pi * 1.27 MHz
    model = EffectiveModel(g=1.27, kappa=1e-9)
    tr = dyn.lindblad_evolve(model, NO_LOSS, DensityMatrix.pure("e0"), None, (0.0, 0.4), 1e-4)
    assert first_null(tr) == pytest.approx(1 / (4 * 1.27), abs=2e-4)
    np.testing.assert_allclose(tr.population("e0"), np.cos(TWO_PI * 1.27 * tr.times) ** 2, atol=1e-9)


def test_damped_oscillation_frequency():
    g, kappa = 1.27, 0.4
    model = EffectiveModel(g=g, kappa=kappa)
    tr = dyn.lindblad_evolve(model, NO_LOSS, DensityMatrix.pure("e0"), None, (0.0, 1.5), 1e-4)
    omega = TWO_PI * math.sqrt(g * g - kappa * kappa / 16)
    # exact e0 amplitude of the damped two-mode problem
    t = tr.times
    f = np.exp(-TWO_PI * kappa * t / 4) * (np.cos(omega * t) + TWO_PI * kappa / (4 * omega) * np.sin(omega * t))
    np.testing.assert_allclose(tr.population("e0"), np.abs(f) ** 2, atol=1e-8)


def test_no_drive_no_loss_is_static():
    model = EffectiveModel(g=0.0, kappa=1e-12)
    rho0 = DensityMatrix.diagonal([0.1, 0.2, 0.3, 0.4])
    tr = dyn.lindblad_evolve(model, NO_LOSS, rho0, None, (0.0, 2.0))
    np.testing.assert_allclose(tr.populations, np.tile([0.1, 0.2, 0.3, 0.4], (len(tr.times), 1)), atol=1e-12)


def test_photon_loss_orientation():
    model = EffectiveModel(g=0.0, kappa=0.4)
    tr = dyn.lindblad_evolve(model, NO_LOSS, DensityMatrix.pure("g1"), None, (0.0, 1.0))
    np.testing.assert_allclose(tr.population("g1"), np.exp(-TWO_PI * 0.4 * tr.times), rtol=1e-6)
    np.testing.assert_allclose(tr.population("g0"), 1 - np.exp(-TWO_PI * 0.4 * tr.times), atol=1e-7)


def test_qubit_decay_orientation():
    thermal = dyn.ThermalModel(gamma_up=0.0, gamma_down=2.0)
    model = EffectiveModel(g=0.0, kappa=0.4)
    tr = dyn.lindblad_evolve(model, thermal, DensityMatrix.pure("e0"), None, (0.0, 1.0))
    np.testing.assert_allclose(tr.population("e0"), np.exp(-2.0 * tr.times), rtol=1e-6)


# --- rate helpers --------------------------------------------------------


@pytest.mark.parametrize("g,kappa,expected", [(0.0, 0.4, 0.0), (1.27, 0.4, 0.2), (0.05, 0.4, 0.025),
                                              (0.14, 0.4, 0.2)])
def test_effective_decay_rate(g, kappa, expected):
    assert dyn.effective_decay_rate(g, kappa) == pytest.approx(expected)


def test_thermal_limits_and_detailed_balance():
    cold = dyn.thermal_rates(1.0, 0.0, 0.081)
    assert cold.gamma_up == 0.0 and cold.gamma_down == 1.0
    hot = dyn.thermal_rates(1.0, math.inf, 0.081)
    assert hot.gamma_up == pytest.approx(0.5) and hot.gamma_down == pytest.approx(0.5)
    th = dyn.thermal_rates(0.3, 20.0, 0.081)
    ratio = math.exp(-6.62607015e-34 * 0.081e9 / (1.380649e-23 * 0.020))
    assert th.gamma_up / th.gamma_down == pytest.approx(ratio, rel=1e-9)
    assert th.gamma_total == pytest.approx(0.3)


def test_heating_trace_limits():
    th = dyn.thermal_rates(0.1, 20.0, 0.081)
    assert dyn.heating_trace(0.01, th, 0.0) == pytest.approx(0.01)
    assert dyn.heating_trace(0.01, th, 1e4) == pytest.approx(th.gamma_up / th.gamma_total)
    with pytest.raises(ValueError):
        dyn.heating_trace(1.5, th, 0.0)


def test_readout_average_matches_quadrature():
    th = dyn.calibrated_thermal()
    closed = dyn.readout_averaged_population(0.007, th, 5.0, 10.0)
    numeric = quad(lambda t: dyn.heating_trace(0.007, th, t), 5.0, 15.0, epsabs=1e-13)[0] / 10.0
    assert closed == pytest.approx(numeric, abs=1e-9)
    assert dyn.readout_averaged_population(0.2, NO_LOSS, 5.0, 10.0) == 0.2
    assert dyn.readout_averaged_population(0.2, th, 5.0, 0.0) == dyn.heating_trace(0.2, th, 5.0)


def test_reset_threshold_examples():
    assert dyn.reset_threshold(dyn.ThermalModel(0.0, 0.1), 1.0) == 1.0
    th = dyn.calibrated_thermal()
    assert dyn.reset_threshold(th, TWO_PI * 0.2) == pytest.approx(0.993, abs=1e-12)
    fast = dyn.reset_threshold(th, TWO_PI * dyn.effective_decay_rate(1.27, 4.0))
    assert 0.998 <= fast <= 0.9995


def test_calibration_frozen():
    # 99.3 % threshold, kappa/2pi = 0.4 MHz, 20 mK, 81 MHz
    assert dyn.CALIBRATED_GAMMA == pytest.approx(0.0197869, rel=1e-5)


# --- steady states -------------------------------------------------------


def test_steady_state_matches_long_evolution():
    th = dyn.thermal_rates(0.5, 40.0, 0.081)
    model = EffectiveModel(g=1.27, kappa=0.4, delta=0.3)
    ss = dyn.steady_state(model, th)
    tr = dyn.lindblad_evolve(model, th, DensityMatrix.pure("g0"), None, (0.0, 40.0), save_every=10)
    np.testing.assert_allclose(tr.populations[-1], ss.populations, atol=1e-6)


def test_continuous_plateau_matches_steady_state():
    th = dyn.calibrated_thermal()
    model = EffectiveModel(g=1.27, kappa=0.4)
    res = dyn.reset_simulation(model, th, 6.0, 0.0, "continuous")
    assert res.plateau == pytest.approx(dyn.reset_threshold(th, TWO_PI * 0.2), abs=1e-3)
    long = dyn.reset_simulation(model, th, 15.0, 0.0, "continuous")
    assert long.plateau == pytest.approx(dyn.steady_state(model, th).populations[0], abs=1e-5)


def test_zero_pump_stays_thermal():
    th = dyn.calibrated_thermal()
    res = dyn.reset_simulation(EffectiveModel(g=0.0, kappa=0.4), th, 1.0, 1.0)
    assert res.final_ground == pytest.approx(th.ground_population, abs=1e-10)


def test_pulsed_reset_segments():
    th = dyn.calibrated_thermal()
    res = dyn.reset_simulation(EffectiveModel(g=1.27, kappa=0.4), th, 0.2, 1.0, "pulsed")
    assert res.trace.times[0] == 0.0 and res.trace.times[-1] == pytest.approx(1.2)
    assert np.all(np.diff(res.trace.times) > 0)
    assert res.final_ground > 0.95
    with pytest.raises(ValueError):
        dyn.reset_simulation(EffectiveModel(), th, 0.2, 0.0, "sometimes")


# --- chevrons ------------------------------------------------------------


def test_chevron_symmetry_and_consistency():
    model = EffectiveModel(g=1.27, kappa=0.4)
    det = np.array([-1.5, -0.5, 0.0, 0.5, 1.5])
    dur = np.linspace(0.0, 0.6, 31)
    cmap = dyn.rabi_chevron(model, det, dur, threads=2)
    np.testing.assert_allclose(cmap.population, cmap.population[::-1], atol=1e-10)
    ref = dyn.lindblad_evolve(model, NO_LOSS, DensityMatrix.pure("e0"), None, (0.0, 0.6), cmap.dt)
    idx = np.round(dur / cmap.dt).astype(int)
    np.testing.assert_allclose(cmap.population[2], ref.population("e0")[idx], atol=1e-12)


def test_chevron_buffer_lets_photon_leak():
    model = EffectiveModel(g=1.27, kappa=0.4)
    dur = np.linspace(0.0, 0.2, 11)
    plain = dyn.rabi_chevron(model, [0.0], dur)
    buffered = dyn.rabi_chevron(model, [0.0], dur, t_buffer=0.5)
    # e0 is untouched by photon loss once the pump is off
    np.testing.assert_allclose(plain.population, buffered.population, atol=1e-10)
    with pytest.raises(ValueError):
        dyn.rabi_chevron(model, [], dur)


def test_stark_shift_breaks_detuning_symmetry():
    model = EffectiveModel(g=1.27, kappa=0.4, chi_fs=0.4, chi_sr=0.0, xi_per_g=1.0)
    cmap = dyn.rabi_chevron(model, [-1.0, 1.0], np.linspace(0, 0.4, 21))
    assert np.max(np.abs(cmap.population[0] - cmap.population[1])) > 1e-2


# --- error paths ---------------------------------------------------------


def test_step_size_guard():
    model = EffectiveModel(g=1.27, kappa=0.4)
    with pytest.raises(dyn.StepSizeError):
        dyn.lindblad_evolve(model, NO_LOSS, DensityMatrix.pure("e0"), None, (0.0, 1.0), dt=0.1)
    with pytest.raises(dyn.StepSizeError):
        dyn.lindblad_evolve(model, NO_LOSS, DensityMatrix.pure("e0"), None, (0.0, 1.0), dt=0.003)


def test_divergence_reports_time():
    bad = DensityMatrix(np.diag([1.0, 1.0, 0.0, 0.0]))
    with pytest.raises(dyn.IntegrationDivergedError) as info:
        dyn.lindblad_evolve(EffectiveModel(), NO_LOSS, bad, None, (0.0, 0.1))
    assert info.value.time == 0.0


def test_envelope_driven_matches_constant():
    from fluxlink.emission import PulseEnvelope

    model = EffectiveModel(g=1.27, kappa=0.4)
    t = np.linspace(0.0, 1.0, 101)
    env = PulseEnvelope.from_times(t, np.full(t.size, 1.27))
    a = dyn.lindblad_evolve(model, NO_LOSS, DensityMatrix.pure("e0"), env, (0.0, 1.0), 1e-3)
    b = dyn.lindblad_evolve(model, NO_LOSS, DensityMatrix.pure("e0"), None, (0.0, 1.0), 1e-3)
    np.testing.assert_allclose(a.populations, b.populations, atol=1e-12)


def test_invalid_model():
    with pytest.raises(ValueError):
        EffectiveModel(kappa=0.0)
