"""Fluxonium-SNAIL-resonator Hamiltonian, its dressed spectrum and derived rates.

Unit conventions
----------------
* Hamiltonians are in GHz (frequency units, hbar = 1, energies quoted as E/h).
* Couplings ``g_fs``, ``g_sr``, the SNAIL cubic coefficient ``c3_s``,
  dispersive shifts and linewidths are in MHz (ordinary frequency, i.e. the
  quoted number is the angular value divided by 2*pi).
* External fluxes are phases in radians, ``phi_ext = 2*pi*Phi/Phi_0``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Mapping, Sequence

import numpy as np

from .operators import (
    OperatorMatrix,
    apply_function_to_hermitian,
    destroy,
    eig_hermitian,
    lift,
)

TWO_PI = 2.0 * math.pi
DEFAULT_FLUX_BASIS_DIM = 40
DEFAULT_DIMS = (10, 8, 5)
DEFAULT_DIMENSION_CAP = 20_000
LABEL_THRESHOLD = 0.4
MIN_FLUXONIUM_DIM = 20


class InvalidParameterError(ValueError):
    pass


class DimensionOverflowError(ValueError):
    pass


class LabelingError(RuntimeError):
    """Dressed-state labeling failed; ``overlaps`` lists the competing values."""

    def __init__(self, message: str, overlaps: Sequence[float] = ()):
        super().__init__(message)
        self.overlaps = tuple(overlaps)


class NumericError(RuntimeError):
    pass


def flux_to_phase(flux_quanta: float) -> float:
    """Convert an external flux in units of Phi_0 to the phase 2*pi*Phi/Phi_0."""
    return TWO_PI * flux_quanta


@dataclass(frozen=True)
class DeviceParams:
    """Static circuit parameters; defaults are the ``table1`` preset operating point.

    Energies ``E_*`` and ``omega_r`` are GHz; ``c3_s``, ``g_fs``, ``g_sr``,
    ``kappa`` and ``chi_fr`` are MHz.  ``N_s`` is the number of large
    junctions in one SNAIL loop and ``n_snails`` the number of SNAILs in the
    series array that forms the SNAIL resonator inductance.
    """

    E_C_f: float = 0.89
    E_L_f: float = 0.47
    E_J_f: float = 5.54
    alpha: float = 0.5
    E_J_s: float = 65.0
    N_s: int = 3
    n_snails: int = 3
    E_C_s: float = 0.39
    E_L_s: float = 15.4
    c3_s: float = 350.0
    c3_source: str = "table"
    omega_r: float = 6.245
    E_C_r: float = 0.39
    kappa: float = 0.4
    chi_fr: float = 0.55
    g_fs: float = 500.0
    g_sr: float = 130.0
    phi_ext_f: float = flux_to_phase(9.5)
    phi_ext_s: float = flux_to_phase(0.27)
    area_ratio: float = 35.0

    def __post_init__(self):
        for name in ("E_C_f", "E_L_f", "E_J_s", "E_C_s", "E_L_s", "omega_r", "E_C_r", "kappa",
                     "area_ratio"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameterError(f"{name} must be a positive finite number, got {value!r}")
        for name in ("E_J_f", "c3_s", "chi_fr", "g_fs", "g_sr", "phi_ext_f", "phi_ext_s"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value!r}")
        if self.E_J_f < 0:
            raise InvalidParameterError(f"E_J_f must be non-negative, got {self.E_J_f!r}")
        if not 0 < self.alpha < 1:
            raise InvalidParameterError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if int(self.N_s) != self.N_s or self.N_s < 1:
            raise InvalidParameterError(f"N_s must be a positive integer, got {self.N_s!r}")
        if int(self.n_snails) != self.n_snails or self.n_snails < 1:
            raise InvalidParameterError(f"n_snails must be a positive integer, got {self.n_snails!r}")
        if self.c3_source not in ("table", "junctions"):
            raise InvalidParameterError(f"c3_source must be 'table' or 'junctions', got {self.c3_source!r}")

    def replace(self, **changes) -> DeviceParams:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @property
    def c3(self) -> float:
        """Cubic SNAIL coefficient in MHz from the configured source."""
        if self.c3_source == "table":
            return self.c3_s
        return snail_c3(self.alpha, self.E_J_s, self.N_s, self.phi_ext_s, n_snails=self.n_snails)

    @property
    def omega_s(self) -> float:
        return math.sqrt(8.0 * self.E_C_s * self.E_L_s)

    @property
    def E_L_r(self) -> float:
        return self.omega_r ** 2 / (8.0 * self.E_C_r)


PRESETS: dict[str, DeviceParams] = {
    "table1": DeviceParams(),
    # the flux-spectroscopy fit quotes slightly different fluxonium energies
    "figS6": DeviceParams(E_C_f=0.9, E_L_f=0.5),
}


def preset(name: str) -> DeviceParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise InvalidParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# --------------------------------------------------------------------------
# single modes


def harmonic_zpf(E_C: float, E_L: float) -> tuple[float, float]:
    """Phase and charge zero-point fluctuations of the (E_C, E_L) oscillator."""
    phi_zpf = (2.0 * E_C / E_L) ** 0.25
    return phi_zpf, 1.0 / (2.0 * phi_zpf)


def oscillator_operators(E_C: float, E_L: float, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """``(n, phi)`` on the number basis of the (E_C, E_L) oscillator."""
    a = destroy(dim).data
    phi_zpf, n_zpf = harmonic_zpf(E_C, E_L)
    phi = phi_zpf * (a + a.conj().T)
    n = 1j * n_zpf * (a.conj().T - a)
    return n, phi


def fluxonium_hamiltonian(params: DeviceParams, dim: int = DEFAULT_FLUX_BASIS_DIM,
                          phi_ext: float | None = None) -> OperatorMatrix:
    """Fluxonium Hamiltonian ``4 E_C n^2 + E_L phi^2 / 2 - E_J cos(phi - phi_ext)``.

    Built in the harmonic basis of the fluxonium's own (E_C, E_L) oscillator;
    the cosine is evaluated through the spectral decomposition of the
    truncated phase operator.  The ground-state energy is subtracted.
    """
    if dim < MIN_FLUXONIUM_DIM:
        raise InvalidParameterError(f"fluxonium basis needs dim >= {MIN_FLUXONIUM_DIM}, got {dim}")
    phi_ext = params.phi_ext_f if phi_ext is None else phi_ext
    if not math.isfinite(phi_ext):
        raise InvalidParameterError(f"phi_ext must be finite, got {phi_ext!r}")
    n, phi = oscillator_operators(params.E_C_f, params.E_L_f, dim)
    h = 4.0 * params.E_C_f * n @ n + 0.5 * params.E_L_f * phi @ phi
    if params.E_J_f:
        cos_term = apply_function_to_hermitian(phi, lambda x: np.cos(x - phi_ext)).data
        h = h - params.E_J_f * cos_term
    h = 0.5 * (h + h.conj().T)
    e0 = eig_hermitian(h, subset=(0, 0))[0][0]
    return OperatorMatrix(h - e0 * np.eye(dim), "fock")


def fluxonium_levels(params: DeviceParams, n_levels: int, dim: int = DEFAULT_FLUX_BASIS_DIM,
                     phi_ext: float | None = None):
    """Lowest fluxonium energies (GHz, ground at 0) and the phase/charge
    operators projected onto those eigenstates."""
    phi_ext = params.phi_ext_f if phi_ext is None else phi_ext
    dim = max(dim, n_levels)
    h = fluxonium_hamiltonian(params, dim, phi_ext)
    w, v = eig_hermitian(h)
    v = v[:, :n_levels]
    n, phi = oscillator_operators(params.E_C_f, params.E_L_f, dim)
    return w[:n_levels] - w[0], v.conj().T @ phi @ v, v.conj().T @ n @ v


def fluxonium_transition(params: DeviceParams, phi_ext: float, transition=(0, 1),
                         dim: int = DEFAULT_FLUX_BASIS_DIM) -> float:
    a, b = transition
    h = fluxonium_hamiltonian(params, dim, phi_ext)
    w = eig_hermitian(h, subset=(0, max(a, b)))[0]
    return float(w[b] - w[a])


@dataclass(frozen=True)
class FluxSweep:
    phi_ext_f: np.ndarray
    phi_ext_s: np.ndarray
    frequency: np.ndarray  # GHz
    transition: tuple[int, int]


def flux_sweep(params: DeviceParams, phi_list, transition=(0, 1), dim: int = DEFAULT_FLUX_BASIS_DIM,
               couple_snail_flux: bool = True, threads: int | None = None) -> FluxSweep:
    """Fluxonium transition frequency versus external fluxonium phase.

    When ``couple_snail_flux`` is set the SNAIL phase is tied to the fluxonium
    phase through the loop-area ratio, ``phi_s = phi_f / area_ratio``.
    """
    phis = np.atleast_1d(np.asarray(phi_list, dtype=float))
    if phis.size == 0:
        raise InvalidParameterError("phi_list must be non-empty")

    def point(phi):
        try:
            return fluxonium_transition(params, float(phi), transition, dim)
        except Exception as exc:
            raise NumericError(f"diagonalization failed at phi_ext_f={float(phi)!r}: {exc}") from exc

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            freqs = list(pool.map(point, phis))
    else:
        freqs = [point(p) for p in phis]
    phis_s = phis / params.area_ratio if couple_snail_flux else np.full_like(phis, params.phi_ext_s)
    return FluxSweep(phis, phis_s, np.asarray(freqs), tuple(transition))


# --------------------------------------------------------------------------
# SNAIL


def _snail_potential(alpha, E_J, N, phi_ext):
    def U(p):
        return -alpha * E_J * np.cos(p) - N * E_J * np.cos((phi_ext - p) / N)

    def dU(p, order):
        # derivatives of -cos(p) cycle through sin, cos, -sin, -cos
        s = (np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x))
        first = alpha * E_J * s[(order - 1) % 4](p)
        inner = (phi_ext - p) / N
        second = N * E_J * (-1.0 / N) ** order * s[(order - 1) % 4](inner)
        return first + second

    return U, dU


def snail_potential_minimum(alpha, E_J_s, N_s, phi_ext_s) -> float:
    """Location of the SNAIL potential minimum (principal branch)."""
    phi_ext = math.remainder(phi_ext_s, TWO_PI)
    U, dU = _snail_potential(alpha, E_J_s, N_s, phi_ext)
    grid = np.linspace(-math.pi * N_s, math.pi * N_s, 4096 * N_s, endpoint=False)
    values = U(grid)
    k = int(np.argmin(values))
    # a second well of (nearly) equal depth makes the expansion point ambiguous
    rivals = grid[(values - values[k] < 1e-9 * E_J_s) & (np.abs(grid - grid[k]) > 1e-2)]
    if rivals.size:
        raise NumericError(f"SNAIL potential has degenerate minima at phi_ext_s={phi_ext_s!r}")
    p = grid[k]
    for _ in range(100):
        step = dU(p, 1) / dU(p, 2)
        p -= step
        if abs(step) < 1e-14:
            break
    else:
        raise NumericError(f"SNAIL minimum search did not converge at phi_ext_s={phi_ext_s!r}")
    if dU(p, 2) <= 0:
        raise NumericError("SNAIL stationary point is not a minimum")
    return float(p)


def snail_c3(alpha, E_J_s, N_s, phi_ext_s, n_snails: int = 1) -> float:
    """Cubic Taylor coefficient ``U'''(phi_min)/6`` of the SNAIL potential, in MHz.

    ``U(phi) = -alpha E_J cos(phi) - N E_J cos((phi_ext - phi)/N)``.  For an
    array of ``n_snails`` identical SNAILs in series the coefficient referred
    to the total array phase is divided by ``n_snails**2``.
    """
    p = snail_potential_minimum(alpha, E_J_s, N_s, phi_ext_s)
    _, dU = _snail_potential(alpha, E_J_s, N_s, math.remainder(phi_ext_s, TWO_PI))
    return float(dU(p, 3) / 6.0 / n_snails ** 2 * 1e3)


def snail_inductive_energy(alpha, E_J_s, N_s, phi_ext_s, n_snails: int = 1) -> float:
    """Linear inductive energy ``U''(phi_min)`` of the SNAIL array, in GHz."""
    p = snail_potential_minimum(alpha, E_J_s, N_s, phi_ext_s)
    _, dU = _snail_potential(alpha, E_J_s, N_s, math.remainder(phi_ext_s, TWO_PI))
    return float(dU(p, 2) / n_snails)


# --------------------------------------------------------------------------
# coupled system


@dataclass(frozen=True)
class SystemOperators:
    """Mode operators lifted to the product space f x s x r."""

    dims: tuple[int, int, int]
    fluxonium_energies: np.ndarray
    phi_f: np.ndarray
    n_f: np.ndarray
    phi_s: np.ndarray
    n_s: np.ndarray
    phi_r: np.ndarray
    n_r: np.ndarray
    terms: dict = field(repr=False)

    @property
    def phase(self) -> dict:
        return {"f": self.phi_f, "s": self.phi_s, "r": self.phi_r}


def _check_dims(dims, cap):
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 3:
        raise InvalidParameterError(f"dims must be three integers >= 3, got {dims}")
    total = dims[0] * dims[1] * dims[2]
    if total > cap:
        raise DimensionOverflowError(f"product dimension {total} exceeds cap {cap}")
    return dims


def system_operators(params: DeviceParams, dims=DEFAULT_DIMS, flux_basis_dim: int = DEFAULT_FLUX_BASIS_DIM,
                     cap: int = DEFAULT_DIMENSION_CAP) -> SystemOperators:
    """Lifted operators and the six Hamiltonian terms (GHz) on f x s x r.

    The fluxonium factor is its own eigenbasis (lowest ``dims[0]`` states of a
    ``flux_basis_dim`` harmonic-basis diagonalization); the SNAIL and the
    readout resonator are number bases of their linear modes.
    """
    d_f, d_s, d_r = dims = _check_dims(dims, cap)
    energies, phi_f1, n_f1 = fluxonium_levels(params, d_f, flux_basis_dim)
    n_s1, phi_s1 = oscillator_operators(params.E_C_s, params.E_L_s, d_s)
    n_r1, phi_r1 = oscillator_operators(params.E_C_r, params.E_L_r, d_r)
    num_s = np.diag(np.arange(d_s, dtype=float))
    num_r = np.diag(np.arange(d_r, dtype=float))

    L = lambda op, i: lift(op, i, dims).data  # noqa: E731
    phi_f, n_f = L(phi_f1, 0), L(n_f1, 0)
    phi_s, n_s = L(phi_s1, 1), L(n_s1, 1)
    phi_r, n_r = L(phi_r1, 2), L(n_r1, 2)
    terms = {
        "fluxonium": L(np.diag(energies), 0),
        "snail": L(params.omega_s * num_s, 1),
        "resonator": L(params.omega_r * num_r, 2),
        "cubic": params.c3 * 1e-3 * L(phi_s1 @ phi_s1 @ phi_s1, 1),
        "g_fs": params.g_fs * 1e-3 * phi_f @ phi_s,
        "g_sr": params.g_sr * 1e-3 * n_s @ n_r,
    }
    return SystemOperators(dims, energies, phi_f, n_f, phi_s, n_s, phi_r, n_r, terms)


def build_system_hamiltonian(params: DeviceParams, dims=DEFAULT_DIMS,
                             flux_basis_dim: int = DEFAULT_FLUX_BASIS_DIM,
                             cap: int = DEFAULT_DIMENSION_CAP) -> OperatorMatrix:
    """Three-mode Hamiltonian (GHz) up to third order in the SNAIL phase."""
    ops = system_operators(params, dims, flux_basis_dim, cap)
    h = sum(ops.terms.values())
    h = 0.5 * (h + h.conj().T)
    return OperatorMatrix(h, "product(f*s*r)")


LABEL_ALIASES = {"g": 0, "e": 1, "f": 2}


def parse_label(label) -> tuple[int, int, int]:
    """``'e0'`` -> (1, 0, 0); tuples pass through as (f, s, r)."""
    if isinstance(label, str):
        try:
            return (LABEL_ALIASES[label[0]], 0, int(label[1:]))
        except (KeyError, ValueError, IndexError):
            raise LabelingError(f"cannot parse state label {label!r}") from None
    f, s, r = label
    return (int(f), int(s), int(r))


@dataclass
class SystemSpectrum:
    eigenvalues: np.ndarray  # GHz, ascending
    eigenvectors: np.ndarray
    labels: dict  # dressed index -> (f, s, r)
    overlaps: dict  # dressed index -> |<bare|dressed>|^2
    dims: tuple[int, int, int]
    operators: SystemOperators | None = None

    def index(self, label) -> int:
        target = parse_label(label)
        for k, lab in self.labels.items():
            if lab == target:
                return k
        raise LabelingError(f"no dressed state carries label {target}")

    def energy(self, label) -> float:
        return float(self.eigenvalues[self.index(label)] - self.eigenvalues[0])

    def state(self, label) -> np.ndarray:
        return self.eigenvectors[:, self.index(label)]

    def transition_frequency(self, a, b) -> float:
        """``E_b - E_a`` in GHz."""
        return float(self.eigenvalues[self.index(b)] - self.eigenvalues[self.index(a)])

    def matrix_element(self, op, a, b) -> complex:
        return complex(self.state(a).conj() @ np.asarray(op) @ self.state(b))


def _bare_index(label, dims):
    f, s, r = label
    return (f * dims[1] + s) * dims[2] + r


def dress_spectrum(h, dims, n_labels: int = 12, threshold: float = LABEL_THRESHOLD,
                   operators: SystemOperators | None = None) -> SystemSpectrum:
    """Diagonalize ``h`` and label the lowest ``n_labels`` dressed states by
    maximal overlap with bare product states."""
    dims = tuple(int(d) for d in dims)
    w, v = eig_hermitian(h)
    weights = np.abs(v) ** 2
    labels, overlaps, claimed = {}, {}, {}
    for k in range(min(n_labels, w.size)):
        b = int(np.argmax(weights[:, k]))
        ov = float(weights[b, k])
        lab = tuple(int(x) for x in np.unravel_index(b, dims))
        if ov < threshold:
            raise LabelingError(
                f"dressed state {k} has maximal bare overlap {ov:.3f} < {threshold}", (ov,))
        if lab in claimed:
            other = claimed[lab]
            raise LabelingError(
                f"dressed states {other} and {k} both claim bare label {lab}",
                (overlaps[other], ov))
        claimed[lab] = k
        labels[k] = lab
        overlaps[k] = ov
    return SystemSpectrum(w, v, labels, overlaps, dims, operators)


def diagonalize_system(params: DeviceParams, dims=DEFAULT_DIMS, flux_basis_dim: int = DEFAULT_FLUX_BASIS_DIM,
                       n_labels: int = 12) -> SystemSpectrum:
    ops = system_operators(params, dims, flux_basis_dim)
    h = sum(ops.terms.values())
    h = 0.5 * (h + h.conj().T)
    return dress_spectrum(h, ops.dims, n_labels=n_labels, operators=ops)


@dataclass(frozen=True)
class ModeZpf:
    phi_zpf_f: float
    phi_zpf_s: float
    phi_zpf_r: float

    def __post_init__(self):
        for name in ("phi_zpf_f", "phi_zpf_s", "phi_zpf_r"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise NumericError(f"{name} must be strictly positive and finite, got {value!r}")

    @property
    def product(self) -> float:
        return self.phi_zpf_f * self.phi_zpf_s * self.phi_zpf_r


_MODE_EXCITATION = {"f": (1, 0, 0), "s": (0, 1, 0), "r": (0, 0, 1)}


def zero_point_fluctuations(spectrum: SystemSpectrum, phi_operators=None) -> ModeZpf:
    """Phase zero-point fluctuation of each mode from dressed matrix elements.

    ``phi_operators`` maps mode name (``'f'``, ``'s'``, ``'r'``) to the phase
    operator probed for that mode, or is a single operator used for all
    three (pass the SNAIL phase to get the participations entering the
    three-wave-mixing rate).  Defaults to each mode's own phase operator.
    """
    if phi_operators is None:
        if spectrum.operators is None:
            raise LabelingError("spectrum carries no operators; pass phi_operators")
        phi_operators = spectrum.operators.phase
    if not isinstance(phi_operators, Mapping):
        phi_operators = {m: phi_operators for m in "fsr"}
    ground = (0, 0, 0)
    values = {m: abs(spectrum.matrix_element(phi_operators[m], _MODE_EXCITATION[m], ground))
              for m in "fsr"}
    return ModeZpf(values["f"], values["s"], values["r"])


def coupling_rate(c3: float, xi: complex, zpf: ModeZpf) -> complex:
    """Conversion rate ``g = 6 c3 xi phi_f phi_s phi_r`` (units of ``c3``)."""
    return 6.0 * c3 * complex(xi) * zpf.phi_zpf_f * zpf.phi_zpf_s * zpf.phi_zpf_r


def pump_to_displacement(epsilon: float, omega_d: float, omega_s: float, kappa_s: float) -> complex:
    """Pump displacement ``xi = epsilon / (i kappa_s/4 + Delta)``.

    ``epsilon`` and ``kappa_s`` in MHz, frequencies in GHz; ``Delta`` is the
    pump detuning from the SNAIL mode, ``omega_d - omega_s``.
    """
    delta = (omega_d - omega_s) * 1e3
    denom = 1j * kappa_s / 4.0 + delta
    if denom == 0:
        raise NumericError("pump on resonance with a lossless SNAIL mode: displacement diverges")
    return complex(epsilon / denom)


def stark_shifts(xi: complex, chi_fs: float, chi_sr: float) -> tuple[float, float]:
    """Pump-induced shifts ``|xi|^2 chi`` of the fluxonium and the resonator."""
    n_pump = abs(xi) ** 2
    return n_pump * chi_fs, n_pump * chi_sr


def phi2_matrix_element(spectrum: SystemSpectrum, phi_s=None) -> float:
    """``|<g1| phi_s^2 |e0>|`` between dressed states."""
    if phi_s is None:
        if spectrum.operators is None:
            raise LabelingError("spectrum carries no operators; pass phi_s")
        phi_s = spectrum.operators.phi_s
    phi_s = np.asarray(phi_s)
    return abs(spectrum.matrix_element(phi_s @ phi_s, "g1", "e0"))


def dispersive_shift(spectrum: SystemSpectrum, a: str = "f", b: str = "r") -> float:
    """Cross-Kerr ``chi_ab = E_11 - E_10 - E_01 + E_00`` in MHz."""
    ea, eb = np.array(_MODE_EXCITATION[a]), np.array(_MODE_EXCITATION[b])
    e = lambda lab: spectrum.eigenvalues[spectrum.index(tuple(lab))]  # noqa: E731
    return float((e(ea + eb) - e(ea) - e(eb) + e((0, 0, 0))) * 1e3)
