"""Open-system dynamics of the pumped e0 <-> g1 conversion and the reset budget.

Rates follow the package convention: ``g``, ``kappa`` and detunings are
ordinary frequencies in MHz (angular value / 2*pi) and are multiplied by
2*pi exactly once, when the Liouvillian is assembled.  Qubit depolarization
rates ``gamma_up``/``gamma_down`` are plain rates in 1/us.  Times are in us.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
import scipy.constants as const

from . import _kernels
from .emission import PulseEnvelope

TWO_PI = 2.0 * math.pi
BASIS = ("g0", "e0", "g1", "e1")
G0, E0, G1, E1 = range(4)
STEP_FACTOR = 50.0
TRACE_TOL = 1e-6
POSITIVITY_TOL = 1e-6
HERMITIAN_TOL = 1e-9


class StepSizeError(ValueError):
    pass


class IntegrationDivergedError(RuntimeError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t = {time:.6g} us")
        self.time = time


@dataclass(frozen=True)
class EffectiveModel:
    """Two-mode effective model on the ordered basis ``(g0, e0, g1, e1)``.

    ``g``, ``kappa``, ``delta`` (pump detuning from the e0<->g1 transition)
    and ``chi_fr`` are MHz.  ``omega_f_tilde``/``omega_r_tilde`` (GHz) only
    document the Stark-shifted frame.  Setting ``xi_per_g`` (1/MHz) switches
    on explicit pump Stark shifts ``|xi(t)|^2 chi`` with ``xi = g * xi_per_g``.
    """

    g: complex = 1.27
    kappa: float = 0.4
    delta: float = 0.0
    chi_fr: float = 0.0
    omega_f_tilde: float = 0.081
    omega_r_tilde: float = 6.245
    chi_fs: float = 0.0
    chi_sr: float = 0.0
    xi_per_g: float | None = None
    basis: tuple = BASIS

    def __post_init__(self):
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ValueError(f"kappa must be positive, got {self.kappa!r}")
        if self.basis != BASIS:
            raise ValueError(f"basis is fixed to {BASIS}")

    def with_(self, **changes) -> EffectiveModel:
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class ThermalModel:
    """Qubit depolarization split into heating and decay (1/us)."""

    gamma_up: float
    gamma_down: float
    temperature: float = float("nan")  # mK
    omega_f: float = float("nan")  # GHz

    @property
    def gamma_total(self) -> float:
        return self.gamma_up + self.gamma_down

    @property
    def ground_population(self) -> float:
        total = self.gamma_total
        return 1.0 if total == 0 else self.gamma_down / total

    @property
    def excited_population(self) -> float:
        return 1.0 - self.ground_population


NO_LOSS = ThermalModel(0.0, 0.0)


def boltzmann_ratio(temperature_mk: float, omega_f_ghz: float) -> float:
    """``exp(-h f / k_B T)``; zero at T = 0."""
    if temperature_mk == 0:
        return 0.0
    if math.isinf(temperature_mk):
        return 1.0
    # h f / k_B in mK, divided by T last so tiny temperatures underflow cleanly to zero
    return math.exp(-(const.h * omega_f_ghz * 1e12 / const.k) / temperature_mk)


def thermal_rates(gamma_total: float, temperature: float, omega_f: float) -> ThermalModel:
    """Detailed-balance split of ``gamma_total`` (1/us) at ``temperature`` (mK)."""
    if gamma_total < 0 or temperature < 0 or omega_f <= 0:
        raise ValueError("gamma_total and temperature must be >= 0, omega_f > 0")
    ratio = boltzmann_ratio(temperature, omega_f)
    down = gamma_total / (1.0 + ratio)
    return ThermalModel(gamma_total - down, down, temperature, omega_f)


def effective_decay_rate(g: float, kappa: float) -> float:
    """Qubit decay rate under the conversion pump (MHz, same convention as inputs).

    ``4 g^2 / kappa`` below the crossover ``g = kappa/4`` where the damped
    two-mode eigenvalues turn complex, ``kappa/2`` above it.
    """
    if g < 0 or kappa <= 0:
        raise ValueError("need g >= 0 and kappa > 0")
    if g < kappa / 4.0:
        return 4.0 * g * g / kappa
    return kappa / 2.0


def heating_trace(P_e0, thermal: ThermalModel, t):
    """Excited population relaxing toward ``gamma_up/gamma`` from ``P_e0``."""
    if not 0 <= P_e0 <= 1:
        raise ValueError(f"P_e0 must be a probability, got {P_e0!r}")
    gamma = thermal.gamma_total
    t = np.asarray(t, dtype=float)
    if gamma == 0:
        out = np.full_like(t, P_e0)
    else:
        p_inf = thermal.gamma_up / gamma
        out = p_inf + (P_e0 - p_inf) * np.exp(-gamma * t)
    return float(out) if out.ndim == 0 else out


def readout_averaged_population(P_e0, thermal: ThermalModel, t_buffer: float, t_readout: float) -> float:
    """Mean of :func:`heating_trace` over ``[t_buffer, t_buffer + t_readout]``."""
    if t_buffer < 0 or t_readout < 0:
        raise ValueError("durations must be non-negative")
    if t_readout == 0:
        return heating_trace(P_e0, thermal, t_buffer)
    gamma = thermal.gamma_total
    if gamma == 0:
        return float(P_e0)
    p_inf = thermal.gamma_up / gamma
    window = -math.expm1(-gamma * t_readout) / (gamma * t_readout)
    return float(p_inf + (P_e0 - p_inf) * math.exp(-gamma * t_buffer) * window)


def reset_threshold(thermal: ThermalModel, gamma_eff: float) -> float:
    """Steady ground population under continuous pumping,
    ``(gamma_down + gamma_eff) / (gamma_up + gamma_down + gamma_eff)``.

    ``gamma_eff`` is a rate in 1/us (multiply an MHz value by 2*pi).
    """
    if min(thermal.gamma_up, thermal.gamma_down, gamma_eff) < 0:
        raise ValueError("rates must be non-negative")
    denom = thermal.gamma_total + gamma_eff
    if denom <= 0:
        raise ValueError("total rate must be positive")
    return (thermal.gamma_down + gamma_eff) / denom


def calibrate_gamma_total(threshold: float, gamma_eff: float, temperature: float, omega_f: float) -> float:
    """Total depolarization rate (1/us) for which :func:`reset_threshold`
    returns ``threshold`` at the given temperature."""
    ratio = boltzmann_ratio(temperature, omega_f)
    p_up = ratio / (1.0 + ratio)
    loss = 1.0 - threshold
    if not 0 < loss < p_up:
        raise ValueError("threshold must lie between the thermal ground population and 1")
    return loss * gamma_eff / (p_up - loss)


# operating-point preset: 20 mK, 81 MHz qubit, 99.3 % threshold at kappa/2pi = 0.4 MHz
CALIBRATED_TEMPERATURE = 20.0
CALIBRATED_OMEGA_F = 0.081
CALIBRATED_THRESHOLD = 0.993
CALIBRATED_GAMMA = calibrate_gamma_total(
    CALIBRATED_THRESHOLD, TWO_PI * 0.4 / 2.0, CALIBRATED_TEMPERATURE, CALIBRATED_OMEGA_F)


def calibrated_thermal() -> ThermalModel:
    return thermal_rates(CALIBRATED_GAMMA, CALIBRATED_TEMPERATURE, CALIBRATED_OMEGA_F)


# --------------------------------------------------------------------------
# density matrices and Liouvillians


def ket(label: str) -> np.ndarray:
    v = np.zeros(4, dtype=complex)
    v[BASIS.index(label)] = 1.0
    return v


def projector(i: int, j: int) -> np.ndarray:
    m = np.zeros((4, 4), dtype=complex)
    m[i, j] = 1.0
    return m


@dataclass
class DensityMatrix:
    entries: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex).reshape(4, 4)

    @classmethod
    def pure(cls, label: str, time: float = 0.0) -> DensityMatrix:
        v = ket(label)
        return cls(np.outer(v, v.conj()), time)

    @classmethod
    def thermal(cls, thermal: ThermalModel, time: float = 0.0) -> DensityMatrix:
        p = thermal.ground_population
        return cls(np.diag([p, 1.0 - p, 0.0, 0.0]), time)

    @classmethod
    def diagonal(cls, populations, time: float = 0.0) -> DensityMatrix:
        return cls(np.diag(np.asarray(populations, dtype=complex)), time)

    @property
    def populations(self) -> np.ndarray:
        return self.entries.diagonal().real.copy()

    def invariant_violation(self) -> str | None:
        return _violation(self.entries[None])[0]


def _violation(rhos: np.ndarray):
    """Return (message, index) of the first invariant violation in a stack."""
    if not np.all(np.isfinite(rhos)):
        bad = int(np.argmax(~np.isfinite(rhos).reshape(len(rhos), -1).all(axis=1)))
        return "non-finite density matrix", bad
    tr = np.trace(rhos, axis1=1, axis2=2)
    bad = np.flatnonzero(np.abs(tr - 1.0) > TRACE_TOL)
    if bad.size:
        return f"trace drifted to {tr[bad[0]].real:.9f}", int(bad[0])
    herm = np.max(np.abs(rhos - np.conj(np.transpose(rhos, (0, 2, 1)))), axis=(1, 2))
    bad = np.flatnonzero(herm > HERMITIAN_TOL)
    if bad.size:
        return f"Hermiticity error {herm[bad[0]]:.3e}", int(bad[0])
    mins = np.linalg.eigvalsh(0.5 * (rhos + np.conj(np.transpose(rhos, (0, 2, 1)))))[:, 0]
    bad = np.flatnonzero(mins < -POSITIVITY_TOL)
    if bad.size:
        return f"negative eigenvalue {mins[bad[0]]:.3e}", int(bad[0])
    return None, -1


def _hamiltonian_superop(h: np.ndarray) -> np.ndarray:
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def _dissipator(c: np.ndarray) -> np.ndarray:
    eye = np.eye(c.shape[0])
    cdc = c.conj().T @ c
    return np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T)


def collapse_operators(model: EffectiveModel, thermal: ThermalModel) -> list[np.ndarray]:
    """Jump operators in the 4-level truncation.

    Qubit decay lowers e -> g and heating raises g -> e in both photon
    sectors; photon loss lowers the resonator in both qubit sectors.
    """
    sigma = projector(G0, E0) + projector(G1, E1)
    r = projector(G0, G1) + projector(E0, E1)
    ops = []
    if thermal.gamma_down > 0:
        ops.append(math.sqrt(thermal.gamma_down) * sigma)
    if thermal.gamma_up > 0:
        ops.append(math.sqrt(thermal.gamma_up) * sigma.conj().T)
    ops.append(math.sqrt(TWO_PI * model.kappa) * r)
    return ops


def static_hamiltonian(model: EffectiveModel, delta: float | None = None) -> np.ndarray:
    """Rotating-frame drift (rad/us): g1 and e1 sit at ``-delta``, e1 also
    carries the cross-Kerr shift."""
    delta = model.delta if delta is None else delta
    h = np.zeros((4, 4), dtype=complex)
    h[G1, G1] = -TWO_PI * delta
    h[E1, E1] = TWO_PI * (model.chi_fr - delta)
    return h


def liouvillian_parts(model: EffectiveModel, thermal: ThermalModel, delta: float | None = None):
    """Static Liouvillian and the superoperators multiplied by g, g* and |xi|^2."""
    L0 = _hamiltonian_superop(static_hamiltonian(model, delta))
    for c in collapse_operators(model, thermal):
        L0 = L0 + _dissipator(c)
    conv = projector(G1, E0)  # f r^dagger maps e0 -> g1
    S_g = TWO_PI * _hamiltonian_superop(conv)
    S_gc = TWO_PI * _hamiltonian_superop(conv.conj().T)
    # Stark: |xi|^2 (chi_fs n_f + chi_sr n_r), sign of the e0<->g1 splitting
    n_f = np.diag([0, 1, 0, 1]).astype(complex)
    n_r = np.diag([0, 0, 1, 1]).astype(complex)
    S_stark = TWO_PI * _hamiltonian_superop(model.chi_fs * n_f + model.chi_sr * n_r)
    return L0, np.stack([S_g, S_gc, S_stark])


def max_step(model: EffectiveModel, g_max: float, thermal: ThermalModel = NO_LOSS) -> float:
    """Largest admissible step (us) for ``g_max``, ``kappa``, ``delta`` in MHz."""
    gamma = thermal.gamma_total / TWO_PI
    rates = [abs(g_max), model.kappa, abs(model.delta), gamma, abs(model.chi_fr)]
    return 1.0 / (STEP_FACTOR * max(max(rates), 1e-12))


def step_sample_times(t0: float, dt: float, nsteps: int) -> np.ndarray:
    """Three coefficient sample times per RK4 step: just after the step
    start, the midpoint and just before the step end."""
    eps = 1e-9 * dt
    starts = t0 + dt * np.arange(nsteps)
    return np.stack([starts + eps, starts + 0.5 * dt, starts + dt - eps], axis=1).reshape(-1)


def coupling_samples(g_env, t0: float, dt: float, nsteps: int) -> np.ndarray:
    times = step_sample_times(t0, dt, nsteps)
    if isinstance(g_env, PulseEnvelope):
        return g_env.at(times)
    if callable(g_env):
        return np.asarray(g_env(times), dtype=complex) * np.ones_like(times)
    return np.full(times.shape, complex(g_env))


@dataclass
class SimulationTrace:
    times: np.ndarray
    populations: np.ndarray  # (n_times, 4) over BASIS
    rho: np.ndarray | None = None  # (n_times, 4, 4)
    params: dict = field(default_factory=dict)
    dt: float = float("nan")
    field: dict | None = None

    def population(self, label: str) -> np.ndarray:
        return self.populations[:, BASIS.index(label)]

    @property
    def final(self) -> dict:
        return {b: float(self.populations[-1, i]) for i, b in enumerate(BASIS)}


def _steps(duration: float, dt: float) -> int:
    n = int(round(duration / dt))
    if n < 1 or abs(n * dt - duration) > 1e-9 * max(duration, 1.0):
        raise StepSizeError(f"duration {duration} is not an integer multiple of dt = {dt}")
    return n


def auto_step(model: EffectiveModel, g_max: float, duration: float, thermal: ThermalModel = NO_LOSS,
              safety: float = 2.0) -> float:
    """Step that divides ``duration`` evenly and sits below the step bound by ``safety``."""
    bound = max_step(model, g_max, thermal) / safety
    n = max(1, math.ceil(duration / bound - 1e-9))
    return duration / n


def lindblad_evolve(model: EffectiveModel, thermal: ThermalModel, rho0: DensityMatrix,
                    g_envelope=None, t_span=(0.0, 1.0), dt: float | None = None,
                    save_every: int = 1, check: bool = True) -> SimulationTrace:
    """Integrate the master equation with fixed-step RK4.

    Parameters
    ----------
    g_envelope : PulseEnvelope, callable, complex or None
        Conversion rate g(t) in MHz.  ``None`` uses the constant ``model.g``.
        Envelopes are zero outside their sampled support.
    t_span : (t0, t1)
        Integration window in us; ``t1 - t0`` must be a multiple of ``dt``.
    dt : float, optional
        Step in us; defaults to half the admissible bound.
    """
    t0, t1 = map(float, t_span)
    g_env = model.g if g_envelope is None else g_envelope
    if isinstance(g_env, PulseEnvelope):
        g_max = float(np.max(np.abs(g_env.samples))) if g_env.samples.size else 0.0
    elif callable(g_env):
        probe = np.asarray(g_env(np.linspace(t0, t1, 2001)))
        g_max = float(np.max(np.abs(probe)))
    else:
        g_max = abs(complex(g_env))
    bound = max_step(model, g_max, thermal)
    if dt is None:
        dt = auto_step(model, g_max, t1 - t0, thermal)
    if dt > bound * (1 + 1e-12):
        raise StepSizeError(f"dt = {dt:g} us exceeds the stability bound {bound:g} us")
    nsteps = _steps(t1 - t0, dt)
    if nsteps % save_every:
        raise StepSizeError("save_every must divide the number of steps")

    g_half = coupling_samples(g_env, t0, dt, nsteps)
    coeffs = np.stack([g_half, np.conj(g_half), np.zeros_like(g_half)])
    if model.xi_per_g is not None:
        coeffs[2] = np.abs(g_half * model.xi_per_g) ** 2
    L0, S = liouvillian_parts(model, thermal)
    y = _kernels.lindblad_rk4(L0[None], S, coeffs, rho0.entries.reshape(1, 16), dt, nsteps, save_every)[0]
    times = t0 + dt * save_every * np.arange(y.shape[0])
    rhos = y.reshape(-1, 4, 4)
    if check:
        msg, idx = _violation(rhos)
        if msg:
            raise IntegrationDivergedError(msg, float(times[idx]))
    pops = np.real(np.einsum("tii->ti", rhos))
    snapshot = {"model": asdict(model), "thermal": asdict(thermal), "backend": _kernels.BACKEND}
    return SimulationTrace(times, pops, rhos, snapshot, dt)


def steady_state(model: EffectiveModel, thermal: ThermalModel, g: complex | None = None) -> DensityMatrix:
    """Null vector of the time-independent Liouvillian (constant pump)."""
    g = model.g if g is None else g
    L0, S = liouvillian_parts(model, thermal)
    L = L0 + g * S[0] + np.conj(g) * S[1]
    if model.xi_per_g is not None:
        L = L + abs(g * model.xi_per_g) ** 2 * S[2]
    # replace one row by the trace condition
    A = L.copy()
    b = np.zeros(16, dtype=complex)
    A[0] = np.eye(4).reshape(-1)
    b[0] = 1.0
    rho = np.linalg.solve(A, b).reshape(4, 4)
    return DensityMatrix(0.5 * (rho + rho.conj().T))


# --------------------------------------------------------------------------
# sweeps


@dataclass
class ChevronMap:
    detunings: np.ndarray  # MHz
    durations: np.ndarray  # us
    population: np.ndarray  # e0 population, (n_detunings, n_durations)
    dt: float
    t_buffer: float = 0.0


def _aligned_step(durations: np.ndarray, bound: float) -> float:
    pts = np.unique(np.concatenate([[0.0], durations]))
    spacing = float(np.min(np.diff(pts)))
    dt = spacing / math.ceil(spacing / bound - 1e-9)
    ratio = durations / dt
    if np.max(np.abs(ratio - np.round(ratio))) > 1e-6:
        raise ValueError("durations must lie on a uniform grid starting at 0")
    return dt


def rabi_chevron(model: EffectiveModel, detunings, durations, g: complex | None = None,
                 thermal: ThermalModel = NO_LOSS, rho0: DensityMatrix | None = None,
                 t_buffer: float = 0.0, threads: int | None = None) -> ChevronMap:
    """e0 population after a square pump of each duration at each detuning.

    With ``t_buffer > 0`` every pulse is followed by free evolution of that
    length before the population is read.
    """
    detunings = np.atleast_1d(np.asarray(detunings, dtype=float))
    durations = np.atleast_1d(np.asarray(durations, dtype=float))
    if detunings.size == 0 or durations.size == 0:
        raise ValueError("detuning and duration grids must be non-empty")
    if np.any(durations < 0):
        raise ValueError("durations must be non-negative")
    g = model.g if g is None else g
    rho0 = DensityMatrix.pure("e0") if rho0 is None else rho0
    worst = model.with_(delta=float(np.max(np.abs(detunings))))
    dt = _aligned_step(durations, max_step(worst, abs(g), thermal) / 2.0)
    n_total = int(round(durations.max() / dt))
    idx = np.round(durations / dt).astype(int)

    L0s = np.stack([liouvillian_parts(model, thermal, delta=d)[0] for d in detunings])
    _, S = liouvillian_parts(model, thermal)
    g_half = np.full(3 * n_total, complex(g))
    coeffs = np.stack([g_half, np.conj(g_half), np.zeros_like(g_half)])
    if model.xi_per_g is not None:
        coeffs[2] = abs(complex(g) * model.xi_per_g) ** 2
    y0 = rho0.entries.reshape(1, 16)

    def row(b):
        if n_total == 0:
            return np.repeat(y0, 1, axis=0)
        try:
            return _kernels.lindblad_rk4(L0s[b:b + 1], S, coeffs, y0, dt, n_total, 1)[0]
        except Exception as exc:
            raise IntegrationDivergedError(f"chevron row delta={detunings[b]} MHz failed: {exc}", 0.0) from exc

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, range(detunings.size)))
    else:
        rows = [row(b) for b in range(detunings.size)]
    states = np.stack([r[idx] for r in rows])  # (n_det, n_dur, 16)

    if t_buffer > 0:
        nb = _steps(t_buffer, dt)
        flat = states.reshape(-1, 16)
        L0b = np.repeat(L0s, durations.size, axis=0)
        zero = np.zeros((3, 3 * nb), dtype=complex)
        states = _kernels.lindblad_rk4(L0b, S, zero, flat, dt, nb, nb)[:, -1].reshape(states.shape)

    rhos = states.reshape(-1, 4, 4)
    msg, k = _violation(rhos)
    if msg:
        i, j = divmod(k, durations.size)
        raise IntegrationDivergedError(
            f"{msg} (detuning {detunings[i]} MHz, duration {durations[j]} us)", float(durations[j]))
    pop = np.real(states[..., 5])  # diagonal element (e0, e0)
    return ChevronMap(detunings, durations, pop, dt, t_buffer)


@dataclass
class ResetResult:
    trace: SimulationTrace
    mode: str
    final_ground: float
    plateau: float | None = None


def square_pulse(g: complex, t_on: float, t_off: float) -> Callable:
    """Coupling that is ``g`` on ``[t_on, t_off)`` and zero elsewhere."""
    def envelope(t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= t_on) & (t < t_off), complex(g), 0j)
    return envelope


def reset_simulation(model: EffectiveModel, thermal: ThermalModel, t_pulse: float, t_buffer: float = 0.0,
                     mode: str = "pulsed", rho0: DensityMatrix | None = None,
                     dt: float | None = None, n_save: int = 400) -> ResetResult:
    """Reset from thermal equilibrium by pumping e0 -> g1.

    ``pulsed``: pump for ``t_pulse`` then wait ``t_buffer`` with the pump off.
    ``continuous``: the pump stays on for ``t_pulse + t_buffer``; the plateau
    is the mean g0 population over the final tenth of the run.
    """
    if mode not in ("pulsed", "continuous"):
        raise ValueError(f"mode must be 'pulsed' or 'continuous', got {mode!r}")
    if t_pulse < 0 or t_buffer < 0 or t_pulse + t_buffer <= 0:
        raise ValueError("need non-negative durations with a positive total")
    rho0 = DensityMatrix.thermal(thermal) if rho0 is None else rho0
    total = t_pulse + t_buffer
    if mode == "continuous":
        segments = [(total, model.g)]
    else:
        segments = [(t_pulse, model.g), (t_buffer, 0.0)]
    traces, t0, rho = [], 0.0, rho0
    for duration, g in segments:
        if duration <= 0:
            continue
        seg_dt = dt or auto_step(model, abs(model.g), duration, thermal)
        n = _steps(duration, seg_dt)
        stride = _stride(n, n_save)
        tr = lindblad_evolve(model, thermal, rho, g, (t0, t0 + duration), seg_dt, save_every=stride)
        traces.append(tr)
        t0 += duration
        rho = DensityMatrix(tr.rho[-1], t0)
    trace = _concat(traces)
    g0 = trace.population("g0")
    plateau = None
    if mode == "continuous":
        tail = trace.times >= trace.times[-1] - 0.1 * total
        plateau = float(np.mean(g0[tail]))
    return ResetResult(trace, mode, float(g0[-1]), plateau)


def _stride(n: int, n_save: int) -> int:
    stride = max(1, n // max(n_save, 1))
    while n % stride:
        stride -= 1
    return stride


def _concat(traces: list[SimulationTrace]) -> SimulationTrace:
    if len(traces) == 1:
        return traces[0]
    times = np.concatenate([traces[0].times] + [t.times[1:] for t in traces[1:]])
    pops = np.concatenate([traces[0].populations] + [t.populations[1:] for t in traces[1:]])
    rho = np.concatenate([traces[0].rho] + [t.rho[1:] for t in traces[1:]])
    params = dict(traces[0].params)
    params["segment_dt"] = [t.dt for t in traces]
    return SimulationTrace(times, pops, rho, params, min(t.dt for t in traces))
