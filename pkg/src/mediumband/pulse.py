"""Raised-cosine pulse and the autocorrelation of the RC-shaped BPSK process.

Both functions take time in seconds and normalize internally by the symbol
period, so ``ts=1`` gives the usual symbol-normalized forms.  Every
removable singularity is rewritten as an exactly equivalent expression in
``np.sinc``, which keeps the evaluation smooth through the singular points
instead of branching onto a limit value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PulseSpec", "rc_pulse", "autocorr", "singular_points"]


@dataclass(frozen=True)
class PulseSpec:
    """Roll-off factor and symbol period of the raised-cosine pulse."""

    beta: float = 0.22
    ts: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"roll-off must lie in [0, 1], got {self.beta}")
        if not self.ts > 0.0:
            raise ValueError(f"symbol period must be positive, got {self.ts}")

    @property
    def energy(self) -> float:
        """Mean power of the shaped symbol stream, ``1 - beta/4``."""
        return 1.0 - self.beta / 4.0


def _cos_over_quadratic(z):
    # cos(pi z / 2) / (1 - z^2), written without the 0/0 at |z| = 1
    a = np.abs(z)
    return 0.5 * np.pi * np.sinc(0.5 * (a - 1.0)) / (1.0 + a)


def _sinc_over_quadratic(y):
    # sinc(y) / (1 - y^2); the second form holds for y != 0 and removes |y| = 1
    a = np.abs(y)
    near_zero = a < 0.5
    safe = np.where(near_zero, 1.0, a)
    far = np.sinc(1.0 - safe) / (safe * (1.0 + safe))
    with np.errstate(divide="ignore", invalid="ignore"):
        near = np.sinc(a) / (1.0 - a * a)
    return np.where(near_zero, near, far)


def rc_pulse(t, spec: PulseSpec):
    """Raised-cosine pulse ``g(t)``.

    Parameters
    ----------
    t : float or array_like
        Time in seconds.
    spec : PulseSpec
        Pulse parameters.

    Returns
    -------
    float or ndarray
        ``g(t)`` with ``g(0) = 1`` and zeros at nonzero multiples of ``ts``.
    """
    x = np.asarray(t, dtype=float) / spec.ts
    out = np.sinc(x) * _cos_over_quadratic(2.0 * spec.beta * x)
    return out if out.ndim else float(out)


def autocorr(tau, spec: PulseSpec):
    """Autocorrelation ``R(tau) = E{s(t) s(t + tau)}`` of the shaped stream.

    ``R(0) = 1 - beta/4``.  The removable singularities at
    ``|tau| = ts/(2 beta)`` and ``|tau| = ts/beta`` are handled exactly.
    """
    x = np.asarray(tau, dtype=float) / spec.ts
    b = spec.beta
    first = np.sinc(x) * _cos_over_quadratic(2.0 * b * x)
    second = 0.25 * b * _sinc_over_quadratic(b * x) * np.cos(np.pi * x)
    out = first - second
    return out if out.ndim else float(out)


def singular_points(spec: PulseSpec) -> set[float]:
    """Denominator zeros of the closed-form autocorrelation (empty for ``beta = 0``)."""
    if spec.beta == 0.0:
        return set()
    half = spec.ts / (2.0 * spec.beta)
    full = spec.ts / spec.beta
    return {-full, -half, half, full}
