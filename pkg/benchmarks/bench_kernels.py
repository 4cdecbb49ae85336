"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat N] [--quick]

Each case runs once untimed (so JIT compilation is excluded), then the best
of ``--repeat`` runs is reported.  Results of the two backends are compared
as a sanity check before timing.
"""
import argparse
import time

import numpy as np

from fluxlink import _kernels
from fluxlink.dynamics import EffectiveModel, calibrated_thermal, liouvillian_parts


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def lindblad_case(batch, nsteps):
    L0, S = liouvillian_parts(EffectiveModel(g=1.27, kappa=0.4), calibrated_thermal())
    det = np.linspace(-3, 3, batch)
    L0s = np.stack([L0 + 1j * d * np.eye(16) for d in det])
    g = np.full(3 * nsteps, 1.27 + 0j)
    coeffs = np.stack([g, g.conj(), np.zeros_like(g)])
    y0 = np.zeros((batch, 16), complex)
    y0[:, 5] = 1.0
    return (L0s, S, coeffs, y0, 1e-3, nsteps, 10)


def heisenberg_case(nsteps):
    t = np.linspace(-3, 3, 3 * nsteps)
    return (2 * np.pi * 0.2 / np.cosh(t) + 0j, 2 * np.pi * 0.4, 1.0 + 0j, 1e-3, nsteps)


def inversion_case(n):
    t = np.linspace(-30, 30, n)
    r = 0.1 / np.cosh(0.3 * t) + 0j
    numer = np.gradient(r, t[1] - t[0]) + np.pi * 0.4 * r
    return (numer, r, 0.5 + 0j, t[1] - t[0], 1e-9, True)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is unavailable (or FLUXLINK_DISABLE_NUMBA is set); nothing to compare")

    scale = 10 if args.quick else 1
    cases = [
        ("lindblad_rk4  1 x %d steps" % (20000 // scale), "lindblad_rk4", lindblad_case(1, 20000 // scale)),
        ("lindblad_rk4 61 x %d steps" % (2000 // scale), "lindblad_rk4", lindblad_case(61, 2000 // scale)),
        ("heisenberg_rk4 %d steps" % (200000 // scale), "heisenberg_rk4", heisenberg_case(200000 // scale)),
        ("invert_coupling %d samples" % (200000 // scale), "invert_coupling", inversion_case(200000 // scale)),
    ]
    print(f"{'case':34s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for label, name, case in cases:
        py = getattr(_kernels, name + "_numpy")
        jit = getattr(_kernels, name + "_numba")
        a, b = py(*case), jit(*case)
        first = lambda x: x[0] if isinstance(x, tuple) else x
        assert np.allclose(first(a), first(b), rtol=1e-9, atol=1e-12), label
        t_py = best_of(lambda: py(*case), args.repeat)
        t_jit = best_of(lambda: jit(*case), args.repeat)
        print(f"{label:34s} {t_py * 1e3:11.2f} {t_jit * 1e3:11.2f} {t_py / t_jit:7.1f}x")


if __name__ == "__main__":
    main()
