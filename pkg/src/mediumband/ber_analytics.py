"""Error-probability bounds for BPSK-like modulations over bimodal fading.

All SNR arguments are linear average SNR values; nothing here knows about dB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .fading_stats import BimodalParams, sample

__all__ = [
    "ModulationParams",
    "BPSK",
    "SeriesCoefficients",
    "q_function",
    "gauss_legendre_adaptive",
    "lower_bound",
    "lower_bound_mc",
    "asymptote",
    "asymptote_coefficient",
    "series_coefficients",
    "series_eval",
    "rayleigh_ber",
    "beta_moment",
    "local_slope",
]


@dataclass(frozen=True)
class ModulationParams:
    """Scale ``rho1`` and SNR factor ``rho2`` of the ``rho1 Q(sqrt(rho2 snr))`` error law."""

    rho1: float = 1.0
    rho2: float = 2.0

    def __post_init__(self) -> None:
        if self.rho1 <= 0 or self.rho2 <= 0:
            raise ValueError("modulation parameters must be positive")


BPSK = ModulationParams(1.0, 2.0)


@dataclass(frozen=True)
class SeriesCoefficients:
    gamma1: float
    gamma2: float
    gamma3: float


def q_function(x):
    """Gaussian tail probability ``Q(x) = P(N(0,1) > x)``."""
    out = special.ndtr(-np.asarray(x, dtype=float))
    return out if out.ndim else float(out)


# 20-point rule with an embedded 10-point estimate for the error check
_GL_HI = np.polynomial.legendre.leggauss(20)
_GL_LO = np.polynomial.legendre.leggauss(10)


def _gl(f, a: float, b: float, rule) -> float:
    x, w = rule
    half = 0.5 * (b - a)
    return half * float(np.dot(w, f(half * x + 0.5 * (a + b))))


def gauss_legendre_adaptive(f, a: float, b: float, *, atol: float = 1e-12,
                            rtol: float = 1e-12, max_depth: int = 40) -> float:
    """Integrate a smooth vectorized ``f`` over ``[a, b]`` by interval bisection.

    An interval is accepted when its 10- and 20-point Gauss-Legendre
    estimates agree to within its share of ``min(atol, rtol * |total|)``.
    """
    total = _gl(f, a, b, _GL_HI)
    tol = min(atol, rtol * abs(total)) or atol
    result = 0.0
    stack = [(a, b, total, 0)]
    while stack:
        lo, hi, est, depth = stack.pop()
        coarse = _gl(f, lo, hi, _GL_LO)
        share = tol * (hi - lo) / (b - a)
        if abs(est - coarse) <= share or depth >= max_depth:
            result += est
            continue
        mid = 0.5 * (lo + hi)
        stack.append((lo, mid, _gl(f, lo, mid, _GL_HI), depth + 1))
        stack.append((mid, hi, _gl(f, mid, hi, _GL_HI), depth + 1))
    return result


def _trench_ratio(p: BimodalParams) -> float:
    # (xi - 1) / lambda1 written as K / (lambda0 - K lambda1), finite at lambda1 = 0
    return p.k / p.denom


def lower_bound(gamma_bar: float, p: BimodalParams, m: ModulationParams = BPSK) -> float:
    """ISI-free, genie-aided error probability averaged over the bimodal density.

    Uses the finite-range (Craig) form of the Q function, which turns the
    average into a single integral over ``theta`` in ``[0, pi/2]``.
    """
    if gamma_bar < 0:
        raise ValueError("average SNR must be nonnegative")
    xi = p.xi
    a0 = m.rho2 * p.lambda0**2 * gamma_bar
    a1 = m.rho2 * p.lambda1**2 * gamma_bar

    def integrand(theta):
        s = np.sin(theta)
        s2 = s * s
        v = xi * s / np.sqrt(a0 + s2)
        if p.k > 0.0:
            v = v - (xi - 1.0) * s / np.sqrt(a1 + s2)
        return v * v

    return m.rho1 / math.pi * gauss_legendre_adaptive(integrand, 0.0, 0.5 * math.pi)


def lower_bound_mc(gamma_bar: float, p: BimodalParams, m: ModulationParams = BPSK, *,
                   rng: np.random.Generator, n: int = 10_000_000,
                   chunk: int = 1_000_000) -> tuple[float, float]:
    """Sampling estimate of ``E{rho1 Q(sqrt(rho2 snr |h|^2))}``.

    Draws ``h`` from the bimodal density and averages the conditional error
    probability directly, without the angular integral.  Returns the mean
    and its standard error.
    """
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n:
        size = min(chunk, n - done)
        h = sample(p, rng, size)
        v = m.rho1 * q_function(np.sqrt(m.rho2 * gamma_bar * np.abs(h) ** 2))
        total += float(v.sum())
        total_sq += float(np.dot(v, v))
        done += size
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    return mean, math.sqrt(var / n)


def asymptote_coefficient(p: BimodalParams, m: ModulationParams = BPSK) -> float:
    d = 1.0 / p.denom - _trench_ratio(p)
    return m.rho1 / (4.0 * m.rho2) * d * d


def asymptote(gamma_bar: float, p: BimodalParams, m: ModulationParams = BPSK) -> float:
    """High-SNR approximation of :func:`lower_bound`, proportional to ``1/gamma_bar``."""
    if gamma_bar <= 0:
        raise ValueError("average SNR must be positive")
    return asymptote_coefficient(p, m) / gamma_bar


def series_coefficients(p: BimodalParams, m: ModulationParams = BPSK) -> SeriesCoefficients:
    """First three coefficients of the inverse-SNR expansion of :func:`lower_bound`."""
    k, l0, l1 = p.k, p.lambda0, p.lambda1
    d2 = p.denom**2
    u = 1.0 / l0**2 - (k / l1**2 if k > 0 else 0.0)
    w = 1.0 / l0**4 - (k / l1**4 if k > 0 else 0.0)
    r1, r2 = m.rho1, m.rho2
    g1 = r1 * (1.0 - k) ** 2 / (4.0 * r2 * d2)
    g2 = -3.0 * r1 * (1.0 - k) / (16.0 * r2**2 * d2) * u
    g3 = 5.0 * r1 / (128.0 * r2**3 * d2) * (u * u + 3.0 * (1.0 - k) * w)
    return SeriesCoefficients(g1, g2, g3)


def series_eval(gamma_bar, c: SeriesCoefficients):
    g = np.asarray(gamma_bar, dtype=float)
    inv = 1.0 / g
    out = inv * (c.gamma1 + inv * (c.gamma2 + inv * c.gamma3))
    return out if out.ndim else float(out)


def rayleigh_ber(gamma_bar):
    """Average BPSK error probability over Rayleigh fading with no ISI."""
    g = np.asarray(gamma_bar, dtype=float)
    if np.any(g < 0):
        raise ValueError("average SNR must be nonnegative")
    # 0.5 (1 - sqrt(g/(1+g))) rewritten to avoid cancellation at high SNR
    root = np.sqrt(g / (1.0 + g))
    out = 0.5 / ((1.0 + g) * (1.0 + root))
    return out if out.ndim else float(out)


def beta_moment(n: int) -> float:
    """``int_0^{pi/2} sin^n(theta) d theta = B((n + 1)/2, 1/2) / 2``."""
    if n < 0:
        raise ValueError("power must be nonnegative")
    return 0.5 * float(special.beta(0.5 * (n + 1), 0.5))


def local_slope(snr, ber) -> np.ndarray:
    """Local log-log slope ``d log10(ber) / d log10(snr)`` by central differences.

    End points use one-sided differences.  Both inputs are linear.
    """
    x = np.log10(np.asarray(snr, dtype=float))
    y = np.log10(np.asarray(ber, dtype=float))
    return np.gradient(y, x)
