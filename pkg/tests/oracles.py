"""Independent reference computations behind the frozen values in the tests.

Run ``python3 tests/oracles.py`` to regenerate. Nothing here imports the
package: spectra are evaluated from their closed forms, integrals use
``scipy.integrate.quad`` or a 2**16-point grid, and roots use plain bisection.
"""

import math

import numpy as np
from scipy.integrate import quad

N_FINE = 2**16
A1 = 0.9


def ar1_psd(w, a=A1, s2=1.0):
    return s2 / (1.0 - 2.0 * a * np.cos(w) + a * a)


def fine_grid():
    return -np.pi + 2.0 * np.pi * np.arange(N_FINE) / N_FINE


def bisect(fn, lo, hi, iters=200):
    """Root of an increasing function on [lo, hi]."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def shannon(S, D):
    theta = bisect(lambda t: np.mean(np.minimum(t, S)) - D, 0.0, S.max())
    return float(np.mean(np.maximum(0.0, 0.5 * np.log(S / theta))))


def perp(S, D):
    def dist(log_alpha):
        al = math.exp(log_alpha)
        return np.mean(0.5 * (np.sqrt(S + al) - np.sqrt(S)) * np.sqrt(S)) - D

    al = math.exp(bisect(dist, -40.0, 40.0))
    return float(np.mean(np.log((np.sqrt(S + al) + np.sqrt(S)) / math.sqrt(al))))


def integral_mean(fn):
    return quad(fn, -np.pi, np.pi, limit=400, epsabs=1e-14, epsrel=1e-13)[0] / (2.0 * np.pi)


def ar2_variance(a1, a2, s2=1.0):
    # Yule-Walker for x(k) = a1 x(k-1) + a2 x(k-2) + xi(k)
    return (1.0 - a2) * s2 / ((1.0 + a2) * ((1.0 - a2) ** 2 - a1 * a1))


def main():
    S = ar1_psd(fine_grid())
    var1 = 1.0 / (1.0 - A1 * A1)
    print("ar1 variance", repr(var1))
    print("ar2 variance", repr(ar2_variance(1.0, -0.09)))
    print("shannon ar1 D=1", repr(shannon(S, 1.0)))
    print("awgn ar1 d=1", repr(integral_mean(lambda w: 0.5 * math.log1p(ar1_psd(w)))))
    print("perp ar1 D=1", repr(perp(S, 1.0)))
    D = 2.0
    R = shannon(S, D)
    print("b1 ar1 D=2", repr(perp(S, var1 * D / (var1 - D)) - R))
    b2 = integral_mean(lambda w: 0.5 * math.log1p((1.0 - D / var1) * ar1_psd(w) / D)) - R
    print("b2 ar1 D=2", repr(b2))
    varsigma = float(np.mean(1.0 / S))
    b3 = min(0.5 * math.log(1.0 + (varsigma - 1.0 / var1) * D), 0.5 * math.log(2.0), 0.5 * math.log(var1 / D))
    print("b3 ar1 D=2 eps=0", repr(b3))


if __name__ == "__main__":
    main()
