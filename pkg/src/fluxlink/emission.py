"""Released-photon dynamics and inverse design of the conversion pulse.

The emitter is the linear two-mode system

    f' = -i g*(t) r,    r' = -i g(t) f - (kappa/2) r,    r_out = sqrt(kappa) r

(g real in the usual case) for the c-number amplitudes of the qubit (f) and resonator (r) modes.  Rates
``g``, ``kappa`` and ``gamma_ph`` are passed in MHz (angular / 2*pi) and
times in us; output fields carry units of sqrt(1/us) so that
``integral |r_out|^2 dt`` is an excitation number.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_simpson

from . import _kernels

TWO_PI = 2.0 * math.pi
STEP_FACTOR = 50.0
DEFAULT_SAMPLES = 2000
DEFAULT_WINDOW = 6.0
DEFAULT_FLOOR = 1e-9


class StepSizeError(ValueError):
    pass


class BandwidthError(ValueError):
    pass


class DomainError(ValueError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t = {time:.6g} us")
        self.time = time


class DepletedSourceError(RuntimeError):
    """The source amplitude ran out before the target was delivered."""

    def __init__(self, step: int, time: float, delivered: float, partial=None):
        super().__init__(
            f"source depleted at step {step} (t = {time:.6g} us) after delivering "
            f"{delivered:.4%} of the target")
        self.step = step
        self.time = time
        self.delivered = delivered
        self.partial = partial


@dataclass(frozen=True)
class PulseEnvelope:
    """Uniformly sampled complex time series starting at ``t0`` (us)."""

    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.atleast_1d(np.asarray(self.samples, dtype=complex))
        object.__setattr__(self, "samples", samples)
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if samples.size == 0:
            raise ValueError("envelope needs at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("envelope samples must be finite")

    @classmethod
    def from_times(cls, times, samples) -> PulseEnvelope:
        times = np.asarray(times, dtype=float)
        if times.size > 1:
            steps = np.diff(times)
            if np.max(np.abs(steps - steps[0])) > 1e-9 * max(abs(steps[0]), 1e-300) + 1e-12:
                raise ValueError("sample times must be uniformly spaced")
            dt = float((times[-1] - times[0]) / (times.size - 1))
        else:
            dt = 1.0
        return cls(float(times[0]), dt, samples)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.samples.size - 1)

    def __len__(self):
        return self.samples.size

    def at(self, t) -> np.ndarray:
        """Linear interpolation; zero outside the sampled support."""
        t = np.asarray(t, dtype=float)
        x = self.times
        re = np.interp(t, x, self.samples.real, left=0.0, right=0.0)
        im = np.interp(t, x, self.samples.imag, left=0.0, right=0.0)
        return re + 1j * im

    def energy(self) -> float:
        """Trapezoidal ``integral |samples|^2 dt``."""
        return float(np.trapezoid(np.abs(self.samples) ** 2, dx=self.dt)) if self.samples.size > 1 else 0.0

    def to_csv(self, unit: str | None = None) -> str:
        """Three columns ``time_us, re, im``; ``unit`` is appended to the value
        column names (``re_mhz``) when given."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        suffix = f"_{unit}" if unit else ""
        w.writerow(["time_us", "re" + suffix, "im" + suffix])
        for t, v in zip(self.times, self.samples):
            w.writerow([repr(float(t)), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()

    def save(self, path, unit: str | None = None) -> None:
        Path(path).write_text(self.to_csv(unit), encoding="utf-8")

    @classmethod
    def load(cls, path) -> PulseEnvelope:
        text = Path(path).read_text(encoding="utf-8")
        rows = [row for row in csv.reader(io.StringIO(text)) if row and not row[0].startswith("#")]
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: no samples")
        try:
            data = np.array([[float(x) for x in row[:3]] for row in rows])
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from None
        if data.shape[1] == 2:
            data = np.column_stack([data, np.zeros(len(data))])
        return cls.from_times(data[:, 0], data[:, 1] + 1j * data[:, 2])


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class FieldTrace:
    times: np.ndarray
    f_amp: np.ndarray
    r_amp: np.ndarray
    r_out: np.ndarray
    kappa: float  # MHz

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def emitted(self) -> np.ndarray:
        """Cumulative emitted excitation ``integral_0^t |r_out|^2`` (Simpson)."""
        p = np.abs(self.r_out) ** 2
        if p.size < 3:
            out = np.zeros_like(p)
            out[1:] = 0.5 * (p[1:] + p[:-1]) * self.dt
            return out
        return cumulative_simpson(p, dx=self.dt, initial=0.0)

    def output_at(self, times) -> np.ndarray:
        """Output field at ``times``; exact on the integration nodes, linear between them."""
        t = np.asarray(times, dtype=float)
        return np.interp(t, self.times, self.r_out.real) + 1j * np.interp(t, self.times, self.r_out.imag)

    def energy_balance(self) -> np.ndarray:
        """``|f|^2 + |r|^2 + emitted``; constant for any g(t)."""
        return np.abs(self.f_amp) ** 2 + np.abs(self.r_amp) ** 2 + self.emitted()


@dataclass(frozen=True)
class WavepacketSpec:
    """Target photon shape: ``'sech'`` with bandwidth ``gamma_ph`` (MHz), or
    ``'custom'`` with an explicit sampled envelope."""

    shape: str = "sech"
    gamma_ph: float = 0.2
    phase: float = 0.0
    samples: PulseEnvelope | None = None

    def __post_init__(self):
        if self.shape not in ("sech", "custom"):
            raise ValueError(f"shape must be 'sech' or 'custom', got {self.shape!r}")
        if self.shape == "custom" and self.samples is None:
            raise ValueError("custom wavepackets need samples")
        if self.shape == "sech" and not self.gamma_ph > 0:
            raise ValueError("gamma_ph must be positive")

    def target(self, times=None, kappa: float | None = None) -> PulseEnvelope:
        if self.shape == "custom":
            return self.samples
        if kappa is not None and self.gamma_ph >= kappa:
            raise BandwidthError(f"photon bandwidth {self.gamma_ph} MHz must be below kappa = {kappa} MHz")
        return sech_target(self.gamma_ph, self.phase, times)


def max_step(g_max: float, kappa: float) -> float:
    return 1.0 / (STEP_FACTOR * max(abs(g_max), kappa, 1e-12))


def heisenberg_evolve(g_env: PulseEnvelope, kappa: float, f0: complex = 1.0, dt: float | None = None) -> FieldTrace:
    """Integrate the emitter amplitudes over the support of ``g_env``.

    Starts from ``(f, r) = (f0, 0)`` at ``g_env.t0``.  ``dt`` defaults to the
    envelope sampling, refined by an integer factor if the step bound needs it.
    """
    g_max = float(np.max(np.abs(g_env.samples)))
    bound = max_step(g_max, kappa)
    if dt is None:
        dt = g_env.dt / math.ceil(g_env.dt / bound - 1e-9)
    if dt > bound * (1 + 1e-12):
        raise StepSizeError(f"dt = {dt:g} us exceeds the stability bound {bound:g} us")
    span = g_env.t_end - g_env.t0
    nsteps = int(round(span / dt))
    if nsteps < 1:
        raise ValueError("envelope support is empty")
    dt = span / nsteps
    from .dynamics import coupling_samples
    g_half = TWO_PI * coupling_samples(g_env, g_env.t0, dt, nsteps)
    kap = TWO_PI * kappa
    f, r = _kernels.heisenberg_rk4(g_half, kap, complex(f0), dt, nsteps)
    times = g_env.t0 + dt * np.arange(nsteps + 1)
    return FieldTrace(times, f, r, math.sqrt(kap) * r, kappa)


def constant_g_analytical(g: float, kappa: float, t, f0: complex = 1.0):
    """Closed-form amplitudes for a constant coupling switched on at t = 0.

    The eigenvalues are ``-kappa/4 +- sqrt(kappa^2/16 - g^2)`` (angular);
    the response oscillates for ``g > kappa/4`` and is overdamped below.
    Returns ``(f, r, r_out)``.
    """
    if g < 0:
        raise ValueError("g must be non-negative")
    t = np.asarray(t, dtype=float)
    gw, kw = TWO_PI * g, TWO_PI * kappa
    s = np.sqrt(complex(kw * kw / 16.0 - gw * gw))
    st = s * t
    # sinh(st)/s with its s -> 0 limit
    if abs(s) * max(float(np.max(np.abs(t))), 1e-300) < 1e-6:
        sinc = t * (1 + st ** 2 / 6.0)
    else:
        sinc = np.sinh(st) / s
    decay = np.exp(-kw * t / 4.0)
    f = f0 * decay * (np.cosh(st) + (kw / 4.0) * sinc)
    r = -1j * gw * f0 * decay * sinc
    return f, r, math.sqrt(kw) * r


def sech_time_grid(gamma_ph: float, n: int = DEFAULT_SAMPLES, window: float = DEFAULT_WINDOW) -> np.ndarray:
    """Symmetric grid ``[-window/gamma_ph, +window/gamma_ph]`` with ``gamma_ph`` in MHz."""
    half = window / gamma_ph
    return np.linspace(-half, half, n)


def sech_target(gamma_ph: float, phase: float = 0.0, times=None, unit_norm: bool = False) -> PulseEnvelope:
    """Hyperbolic-secant output field ``(1/4) sqrt(gamma) sech(gamma t / 2) e^{i phase}``.

    ``gamma_ph`` in MHz (angular bandwidth / 2*pi).  The literal prefactor
    carries 1/4 of an excitation, the coherent amplitude released by an
    equal superposition of g0 and e0; ``unit_norm`` doubles it to carry one.
    """
    if not gamma_ph > 0:
        raise ValueError("gamma_ph must be positive")
    times = sech_time_grid(gamma_ph) if times is None else np.asarray(times, dtype=float)
    gam = TWO_PI * gamma_ph
    psi = 0.25 * math.sqrt(gam) / np.cosh(gam * times / 2.0) * np.exp(1j * phase)
    if unit_norm:
        psi = 2.0 * psi
    return PulseEnvelope.from_times(times, psi)


def analytic_shaping_pulse(gamma_ph: float, kappa: float, times=None) -> PulseEnvelope:
    """Coupling g(t) (MHz) that releases a sech wavepacket of bandwidth ``gamma_ph``.

    Requires ``gamma_ph < kappa``; the released field is centred on t = 0.
    """
    if gamma_ph >= kappa:
        raise BandwidthError(f"photon bandwidth {gamma_ph} MHz must be below kappa = {kappa} MHz")
    times = sech_time_grid(gamma_ph) if times is None else np.asarray(times, dtype=float)
    gam = TWO_PI * gamma_ph
    ratio = kappa / gamma_ph
    x = gam * times
    with np.errstate(over="ignore", invalid="ignore"):
        ex = np.exp(x)
        radicand = (1.0 + ex) * ratio - ex
        bad = np.flatnonzero(~(radicand > 0))
        if bad.size:
            raise DomainError("negative radicand in the shaping pulse", float(times[bad[0]]))
        g = gam / (4.0 * np.cosh(x / 2.0)) * (1.0 - ex + (1.0 + ex) * ratio) / np.sqrt(radicand)
    # exp overflow: use the large-t limit (gamma/2) sqrt(kappa/gamma - 1)
    g = np.where(np.isfinite(g), g, 0.5 * gam * math.sqrt(ratio - 1.0))
    return PulseEnvelope.from_times(times, g / TWO_PI)


def numerical_shaping_pulse(target: PulseEnvelope, kappa: float, f0: complex = 0.5,
                            floor: float = DEFAULT_FLOOR, quadrature: str = "trapezoid") -> PulseEnvelope:
    """Invert a target output field ``r_out(t)`` for the coupling g(t) (MHz).

    Marches forward in time: at each sample the coupling is fixed by
    ``g = -(r' + kappa r / 2) / (i f)``, where the remaining source amplitude
    ``f = f0 - i integral(g* r)`` is accumulated from earlier samples.
    ``quadrature='riemann'`` uses the left Riemann sum for that integral;
    the default ``'trapezoid'`` includes the current sample, which makes
    each step a quadratic in g and keeps the source amplitude accurate to
    second order when the excitation is nearly used up.  ``r'`` comes from
    second-order finite differences (one-sided at the ends).
    """
    if quadrature not in ("trapezoid", "riemann"):
        raise ValueError(f"unknown quadrature {quadrature!r}")
    if abs(f0) == 0:
        raise ValueError("f0 must be non-zero")
    kap = TWO_PI * kappa
    energy = target.energy()
    if energy > abs(f0) ** 2 * (1 + 1e-6):
        raise ValueError(f"target carries {energy:.6g} excitations but the source holds {abs(f0) ** 2:.6g}")
    r = target.samples / math.sqrt(kap)
    if r.size > 2:
        rdot = np.gradient(r, target.dt, edge_order=2)
    else:
        rdot = np.gradient(r, target.dt) if r.size == 2 else np.zeros_like(r)
    numer = rdot + 0.5 * kap * r
    g, status, step = _kernels.invert_coupling(
        np.ascontiguousarray(numer), np.ascontiguousarray(r), complex(f0), float(target.dt), float(floor),
        quadrature == "trapezoid")
    if status:
        p = np.abs(target.samples[:step]) ** 2
        delivered = float(np.sum(p) * target.dt / energy) if energy > 0 else 0.0
        partial = PulseEnvelope(target.t0, target.dt, g[:max(step, 1)] / TWO_PI)
        raise DepletedSourceError(step, float(target.t0 + step * target.dt), delivered, partial)
    return PulseEnvelope(target.t0, target.dt, g / TWO_PI)


def evacuation_check(g_env: PulseEnvelope, trace: FieldTrace, f0: complex) -> float:
    """``|f0 - i sum g*(t_i) r(t_i) dt| / |f0|``: what is left in the source
    according to the integrated output; near zero for full evacuation."""
    g = TWO_PI * g_env.at(trace.times)
    released = 1j * np.sum(np.conj(g) * trace.r_amp) * trace.dt
    return float(abs(f0 - released) / abs(f0))


def quadrature_trace(trace: FieldTrace, lo_phase: float = 0.0) -> np.ndarray:
    """In-phase component ``Re(exp(-i lo_phase) r_out)``."""
    return np.real(np.exp(-1j * lo_phase) * trace.r_out)


def rms_relative(a, b, mask=None) -> float:
    """RMS of ``|a - b|`` over ``mask``, normalized by the peak of ``|b|``."""
    a, b = np.asarray(a), np.asarray(b)
    mask = np.ones(a.shape, dtype=bool) if mask is None else np.asarray(mask)
    peak = float(np.max(np.abs(b)))
    if peak == 0:
        return float(np.sqrt(np.mean(np.abs(a[mask]) ** 2)))
    return float(np.sqrt(np.mean(np.abs(a[mask] - b[mask]) ** 2)) / peak)


def support_mask(values, fraction: float = 0.01) -> np.ndarray:
    """Samples where ``|values|`` exceeds ``fraction`` of its peak."""
    mag = np.abs(np.asarray(values))
    return mag > fraction * mag.max()


@dataclass(frozen=True)
class ShapingReport:
    target: PulseEnvelope
    g_analytic: PulseEnvelope | None
    g_numeric: PulseEnvelope
    analytic_vs_numeric: float | None
    round_trip_numeric: float
    round_trip_analytic: float | None
    evacuation_residual: float


def shape_sech(gamma_ph: float, kappa: float, f0: complex = 0.5, n: int = DEFAULT_SAMPLES,
               window: float = DEFAULT_WINDOW, quadrature: str = "trapezoid") -> ShapingReport:
    """Design, cross-check and forward-simulate a sech release.

    The target phase is chosen as -pi/2 so that a real, positive coupling
    produces it from a real ``f0``.
    """
    times = sech_time_grid(gamma_ph, n, window)
    phase = float(np.angle(-1j * f0))
    target = sech_target(gamma_ph, phase, times)
    target = PulseEnvelope(target.t0, target.dt, target.samples * abs(f0) / 0.5)
    mask = support_mask(target.samples)
    g_num = numerical_shaping_pulse(target, kappa, f0, quadrature=quadrature)
    tr_num = heisenberg_evolve(g_num, kappa, f0)
    rt_num = rms_relative(tr_num.output_at(times), target.samples, mask)
    g_an = analytic_shaping_pulse(gamma_ph, kappa, times)
    tr_an = heisenberg_evolve(g_an, kappa, f0)
    rt_an = rms_relative(tr_an.output_at(times), target.samples, mask)
    cmp = rms_relative(g_num.samples, g_an.samples, mask)
    resid = evacuation_check(g_an, tr_an, f0)
    return ShapingReport(target, g_an, g_num, cmp, rt_num, rt_an, resid)
