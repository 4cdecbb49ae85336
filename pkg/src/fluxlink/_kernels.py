"""Time-stepping kernels.

Each kernel exists as a plain numpy implementation and, when numba is
importable, as an ``@njit`` compiled twin.  ``FLUXLINK_DISABLE_NUMBA=1`` in
the environment forces the numpy path; the flag is read at import time.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("FLUXLINK_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:  # pragma: no cover - exercised implicitly depending on the environment
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


# --------------------------------------------------------------------------
# Lindblad RK4 on a batch of vectorized density matrices
#
# dy/dt = (L0[b] + c[0](t) S[0] + c[1](t) S[1] + ...) y.  Coefficients are
# sampled three times per step: coeffs[:, 3k] just after t_k, coeffs[:, 3k+1]
# at the midpoint and coeffs[:, 3k+2] just before t_{k+1}, so a pulse edge on
# a step boundary is resolved exactly.


def lindblad_rk4_numpy(L0, S, coeffs, y0, dt, nsteps, stride):
    B, n = y0.shape
    nsave = nsteps // stride + 1
    out = np.empty((B, nsave, n), dtype=np.complex128)
    y = y0.astype(np.complex128).copy()
    out[:, 0] = y
    S_T = np.ascontiguousarray(np.transpose(S, (0, 2, 1)))
    L0_T = np.ascontiguousarray(np.transpose(L0, (0, 2, 1)))

    def rhs(y, j):
        d = np.einsum("bj,bji->bi", y, L0_T)
        for m in range(S.shape[0]):
            c = coeffs[m, j]
            if c != 0:
                d = d + c * (y @ S_T[m])
        return d

    for k in range(nsteps):
        j = 3 * k
        k1 = rhs(y, j)
        k2 = rhs(y + 0.5 * dt * k1, j + 1)
        k3 = rhs(y + 0.5 * dt * k2, j + 1)
        k4 = rhs(y + dt * k3, j + 2)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (k + 1) % stride == 0:
            out[:, (k + 1) // stride] = y
    return out


@njit(cache=True, nogil=True)
def _lindblad_rhs(L0b, S, coeffs, j, y, out):
    n = y.shape[0]
    for i in range(n):
        acc = 0j
        for q in range(n):
            acc += L0b[i, q] * y[q]
        out[i] = acc
    for m in range(S.shape[0]):
        c = coeffs[m, j]
        if c != 0:
            for i in range(n):
                acc = 0j
                for q in range(n):
                    acc += S[m, i, q] * y[q]
                out[i] += c * acc


@njit(cache=True, nogil=True)
def lindblad_rk4_numba(L0, S, coeffs, y0, dt, nsteps, stride):
    B, n = y0.shape
    nsave = nsteps // stride + 1
    out = np.empty((B, nsave, n), dtype=np.complex128)
    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty(n, dtype=np.complex128)
    k3 = np.empty(n, dtype=np.complex128)
    k4 = np.empty(n, dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)
    for b in range(B):
        y = y0[b].astype(np.complex128).copy()
        out[b, 0] = y
        for k in range(nsteps):
            j = 3 * k
            _lindblad_rhs(L0[b], S, coeffs, j, y, k1)
            for i in range(n):
                tmp[i] = y[i] + 0.5 * dt * k1[i]
            _lindblad_rhs(L0[b], S, coeffs, j + 1, tmp, k2)
            for i in range(n):
                tmp[i] = y[i] + 0.5 * dt * k2[i]
            _lindblad_rhs(L0[b], S, coeffs, j + 1, tmp, k3)
            for i in range(n):
                tmp[i] = y[i] + dt * k3[i]
            _lindblad_rhs(L0[b], S, coeffs, j + 2, tmp, k4)
            for i in range(n):
                y[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if (k + 1) % stride == 0:
                out[b, (k + 1) // stride] = y
    return out


# --------------------------------------------------------------------------
# Heisenberg amplitudes: f' = -i g* r, r' = -i g f - (kappa/2) r, with g
# sampled three times per step as above.  For real g this is the familiar
# symmetric pair; the conjugate keeps |f|^2 + |r|^2 + emitted conserved for
# complex g.


def heisenberg_rk4_numpy(g_half, kappa, f0, dt, nsteps):
    f = np.empty(nsteps + 1, dtype=np.complex128)
    r = np.empty(nsteps + 1, dtype=np.complex128)
    y = np.array([f0, 0.0], dtype=np.complex128)
    f[0], r[0] = y
    half_k = 0.5 * kappa

    def rhs(g, y):
        return np.array([-1j * np.conj(g) * y[1], -1j * g * y[0] - half_k * y[1]])

    for k in range(nsteps):
        ga, gm, gb = g_half[3 * k], g_half[3 * k + 1], g_half[3 * k + 2]
        k1 = rhs(ga, y)
        k2 = rhs(gm, y + 0.5 * dt * k1)
        k3 = rhs(gm, y + 0.5 * dt * k2)
        k4 = rhs(gb, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        f[k + 1], r[k + 1] = y
    return f, r


@njit(cache=True, nogil=True)
def heisenberg_rk4_numba(g_half, kappa, f0, dt, nsteps):
    f = np.empty(nsteps + 1, dtype=np.complex128)
    r = np.empty(nsteps + 1, dtype=np.complex128)
    fy = complex(f0)
    ry = 0j
    f[0] = fy
    r[0] = ry
    hk = 0.5 * kappa
    for k in range(nsteps):
        ga = g_half[3 * k]
        gm = g_half[3 * k + 1]
        gb = g_half[3 * k + 2]
        k1f = -1j * ga.conjugate() * ry
        k1r = -1j * ga * fy - hk * ry
        f2 = fy + 0.5 * dt * k1f
        r2 = ry + 0.5 * dt * k1r
        k2f = -1j * gm.conjugate() * r2
        k2r = -1j * gm * f2 - hk * r2
        f3 = fy + 0.5 * dt * k2f
        r3 = ry + 0.5 * dt * k2r
        k3f = -1j * gm.conjugate() * r3
        k3r = -1j * gm * f3 - hk * r3
        f4 = fy + dt * k3f
        r4 = ry + dt * k3r
        k4f = -1j * gb.conjugate() * r4
        k4r = -1j * gb * f4 - hk * r4
        fy = fy + (dt / 6.0) * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
        ry = ry + (dt / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        f[k + 1] = fy
        r[k + 1] = ry
    return f, r


# --------------------------------------------------------------------------
# Pulse inversion: recover g(t_i) from a target intracavity amplitude r(t_i).
#
# numer[i] = r'(t_i) + (kappa/2) r(t_i) = -i g_i f_i, with the source amplitude
# f_i = f0 - i * integral(g* r).  Returns (g, status, step): status 0 on
# success, 1 when the source amplitude fell below ``floor`` (or the step has
# no consistent solution) at ``step``.
#
# Trapezoid rule: f_i = a - (i dt/2) g_i* r_i with a the part known from
# earlier samples.  Substituting gives g_i = i (c + (dt/2) s r_i) / a with
# s = |g_i|^2, and s solves the real quadratic
#     (dt^2 |r|^2 / 4) s^2 - (|a|^2 - dt Re(c* r)) s + |c|^2 = 0,
# taking the root that tends to |c|^2/|a|^2 as dt -> 0.


def invert_coupling_numpy(numer, r, f0, dt, floor, trapezoid):
    n = numer.shape[0]
    g = np.zeros(n, dtype=np.complex128)
    f = complex(f0)
    prev = 0j
    for i in range(n):
        c = numer[i]
        if trapezoid:
            a = f - 0.5j * dt * prev
            if abs(a) < floor:
                return g, 1, i
            if c == 0:
                gi = 0j
            else:
                qa = 0.25 * dt * dt * (r[i].real ** 2 + r[i].imag ** 2)
                qb = a.real ** 2 + a.imag ** 2 - dt * (c.real * r[i].real + c.imag * r[i].imag)
                qc = c.real ** 2 + c.imag ** 2
                disc = qb * qb - 4.0 * qa * qc
                if qb <= 0 or disc < 0:
                    return g, 1, i
                s = 2.0 * qc / (qb + np.sqrt(disc))
                gi = 1j * (c + 0.5 * dt * s * r[i]) / a
            g[i] = gi
            prev = np.conj(gi) * r[i]
            f = a - 0.5j * dt * prev
        else:
            if abs(f) < floor:
                return g, 1, i
            gi = 1j * c / f
            g[i] = gi
            f = f - 1j * np.conj(gi) * r[i] * dt
    return g, 0, n


invert_coupling_numba = njit(cache=True, nogil=True)(invert_coupling_numpy) if HAVE_NUMBA else None


# --------------------------------------------------------------------------
# dispatch

if HAVE_NUMBA:
    lindblad_rk4 = lindblad_rk4_numba
    heisenberg_rk4 = heisenberg_rk4_numba
    invert_coupling = invert_coupling_numba
    BACKEND = "numba"
else:
    lindblad_rk4 = lindblad_rk4_numpy
    heisenberg_rk4 = heisenberg_rk4_numpy
    invert_coupling = invert_coupling_numpy
    BACKEND = "numpy"
