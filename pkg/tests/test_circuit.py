import math

import numpy as np
import pytest

from fluxlink import circuit
from fluxlink.circuit import DeviceParams, flux_to_phase

TABLE1 = circuit.preset("table1")
HALF = flux_to_phase(9.5)


# --- frozen reference values for the table1 preset -----------------------
# (regenerate only on an intentional model change)
FROZEN_BARE_WQ_MHZ = 66.36524637
FROZEN_DRESSED_WQ_MHZ = 77.15918625
FROZEN_CHI_FR_MHZ = 0.34424246


@pytest.fixture(scope="module")
def spectrum():
    return circuit.diagonalize_system(TABLE1)


def test_harmonic_limit_without_junction():
    p = TABLE1.replace(E_J_f=0.0)
    w = np.sqrt(8 * p.E_C_f * p.E_L_f)
    levels, _, _ = circuit.fluxonium_levels(p, 5)
    np.testing.assert_allclose(np.diff(levels), w, rtol=1e-10)


def test_fluxonium_frequency_frozen():
    assert circuit.fluxonium_transition(TABLE1, HALF) * 1e3 == pytest.approx(FROZEN_BARE_WQ_MHZ, rel=1e-7)


def test_fluxonium_basis_converged():
    a = circuit.fluxonium_transition(TABLE1, HALF, dim=40)
    b = circuit.fluxonium_transition(TABLE1, HALF, dim=80)
    assert a == pytest.approx(b, rel=1e-5)


def test_fluxonium_dim_guard():
    with pytest.raises(circuit.InvalidParameterError):
        circuit.fluxonium_hamiltonian(TABLE1, dim=10)


def test_flux_sweep_symmetric_and_ordered():
    offsets = np.linspace(-0.2, 0.2, 17)
    serial = circuit.flux_sweep(TABLE1, flux_to_phase(9.5 + offsets))
    threaded = circuit.flux_sweep(TABLE1, flux_to_phase(9.5 + offsets), threads=4)
    np.testing.assert_array_equal(serial.frequency, threaded.frequency)
    np.testing.assert_allclose(serial.frequency, serial.frequency[::-1], rtol=1e-9)
    assert np.argmin(serial.frequency) == 8
    np.testing.assert_allclose(serial.phi_ext_s, serial.phi_ext_f / TABLE1.area_ratio)


def test_flux_sweep_error_names_flux(monkeypatch):
    def boom(*args, **kwargs):
        raise np.linalg.LinAlgError("no convergence")

    monkeypatch.setattr(circuit, "fluxonium_transition", boom)
    with pytest.raises(circuit.NumericError, match="phi_ext_f=1.25"):
        circuit.flux_sweep(TABLE1, [1.25])


def test_dressed_spectrum_frozen(spectrum):
    wq = spectrum.transition_frequency("g0", "e0") * 1e3
    assert wq == pytest.approx(FROZEN_DRESSED_WQ_MHZ, rel=1e-6)
    assert circuit.dispersive_shift(spectrum) == pytest.approx(FROZEN_CHI_FR_MHZ, rel=1e-5)


def test_dressed_labels(spectrum):
    assert spectrum.labels[0] == (0, 0, 0)
    assert spectrum.labels[1] == (1, 0, 0)
    # the second and third fluxonium levels sit below the readout resonator
    assert spectrum.index("g1") == 4 and spectrum.index("e1") == 5
    assert all(ov >= circuit.LABEL_THRESHOLD for ov in spectrum.overlaps.values())
    assert spectrum.energy("g1") == pytest.approx(TABLE1.omega_r, abs=0.05)


def test_label_threshold_enforced():
    h = circuit.build_system_hamiltonian(TABLE1, dims=(4, 3, 3))
    with pytest.raises(circuit.LabelingError) as info:
        circuit.dress_spectrum(h, (4, 3, 3), threshold=0.999999)
    assert info.value.overlaps


def test_dimension_cap():
    with pytest.raises(circuit.DimensionOverflowError):
        circuit.build_system_hamiltonian(TABLE1, dims=(30, 30, 30))
    with pytest.raises(circuit.InvalidParameterError):
        circuit.build_system_hamiltonian(TABLE1, dims=(10, 2, 5))


def test_hamiltonian_is_hermitian():
    h = circuit.build_system_hamiltonian(TABLE1, dims=(6, 4, 4)).data
    assert np.max(np.abs(h - h.conj().T)) == 0.0


def test_parity_forbids_first_order_conversion():
    p = TABLE1.replace(c3_s=0.0)
    spec = circuit.diagonalize_system(p, dims=(8, 6, 4))
    phi_s = spec.operators.phi_s
    assert abs(spec.matrix_element(phi_s, "g1", "e0")) < 1e-10
    # the second-order element that the three-wave mixing relies on survives
    assert circuit.phi2_matrix_element(spec) > 1e-4


def test_uncoupled_zpf_is_harmonic():
    p = TABLE1.replace(g_fs=0.0, g_sr=0.0, c3_s=0.0)
    spec = circuit.diagonalize_system(p, dims=(6, 5, 5))
    zpf = circuit.zero_point_fluctuations(spec)
    assert zpf.phi_zpf_s == pytest.approx(circuit.harmonic_zpf(p.E_C_s, p.E_L_s)[0], rel=1e-10)
    assert zpf.phi_zpf_r == pytest.approx(circuit.harmonic_zpf(p.E_C_r, p.E_L_r)[0], rel=1e-10)


def test_zpf_rejects_zero():
    with pytest.raises(circuit.NumericError):
        circuit.ModeZpf(0.1, 0.0, 0.2)


def test_snail_c3_matches_finite_difference():
    alpha, E_J, N, phi = 0.29, 65.0, 3, flux_to_phase(0.41)
    pmin = circuit.snail_potential_minimum(alpha, E_J, N, phi)

    def U(x):
        return -alpha * E_J * np.cos(x) - N * E_J * np.cos((phi - x) / N)

    h = 1e-2
    third = (U(pmin + 2 * h) - 2 * U(pmin + h) + 2 * U(pmin - h) - U(pmin - 2 * h)) / (2 * h ** 3)
    assert circuit.snail_c3(alpha, E_J, N, phi) == pytest.approx(third / 6 * 1e3, rel=1e-4)


def test_snail_c3_vanishes_without_flux():
    assert circuit.snail_c3(0.29, 65.0, 3, 0.0) == pytest.approx(0.0, abs=1e-9)


def test_snail_c3_array_scaling_near_table_value():
    c3 = circuit.snail_c3(TABLE1.alpha, TABLE1.E_J_s, TABLE1.N_s, TABLE1.phi_ext_s, n_snails=3)
    assert abs(c3) == pytest.approx(TABLE1.c3_s, rel=0.02)
    single = circuit.snail_c3(TABLE1.alpha, TABLE1.E_J_s, TABLE1.N_s, TABLE1.phi_ext_s)
    assert single == pytest.approx(9 * c3)


def test_coupling_rate_formula():
    zpf = circuit.ModeZpf(2.0, 0.5, 0.4)
    assert circuit.coupling_rate(350.0, 0.1j, zpf) == pytest.approx(6 * 350 * 0.1j * 0.4)


def test_pump_to_displacement():
    xi = circuit.pump_to_displacement(10.0, 7.0, 6.99, 2.0)
    assert xi == pytest.approx(10.0 / (0.5j + 10.0))
    with pytest.raises(circuit.NumericError):
        circuit.pump_to_displacement(1.0, 7.0, 7.0, 0.0)


def test_stark_shifts():
    assert circuit.stark_shifts(2 + 1j, -0.3, 0.1) == pytest.approx((-1.5, 0.5))


@pytest.mark.parametrize("field,value", [("E_C_f", 0.0), ("kappa", -1.0), ("alpha", 1.5),
                                         ("phi_ext_f", math.nan), ("N_s", 0), ("c3_source", "x")])
def test_device_validation(field, value):
    with pytest.raises(circuit.InvalidParameterError):
        TABLE1.replace(**{field: value})


def test_presets():
    assert circuit.preset("figS6").E_C_f == 0.9
    assert circuit.preset("figS6").E_L_f == 0.5
    with pytest.raises(circuit.InvalidParameterError):
        circuit.preset("nope")
    assert DeviceParams(c3_source="junctions").c3 == pytest.approx(
        circuit.snail_c3(0.5, 65.0, 3, flux_to_phase(0.27), 3))


def test_parse_label():
    assert circuit.parse_label("e0") == (1, 0, 0)
    assert circuit.parse_label("g1") == (0, 0, 1)
    with pytest.raises(circuit.LabelingError):
        circuit.parse_label("x9")
