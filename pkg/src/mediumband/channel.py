"""NLoS multipath realizations and the mediumband fading quantities.

A realization is a set of path delays, Rayleigh amplitudes and uniform
phases.  From it and a receiver timing instant ``tau_hat`` we compute the
desired-signal fading factor ``h_o``, the ISI amplitude ``eta_o``, the three
symbol-spaced taps used by the cancellation detector, and the narrowband
factor ``g_o``.

The scalar functions operate on one :class:`ChannelRealization`.  The
``*_batch`` functions take stacked ``(B, N)`` arrays of delays and complex
gains and are what the Monte Carlo paths use.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .pulse import PulseSpec, autocorr

__all__ = [
    "MultipathProfile",
    "ChannelRealization",
    "FadingPoint",
    "NumericalInconsistencyError",
    "sample_realization",
    "sample_batch",
    "synchronize",
    "synchronize_batch",
    "fading_h",
    "fading_eta",
    "fading_taps",
    "fading_point",
    "fading_batch",
    "narrowband_g",
    "pds",
]

SyncRule = Literal["max_h", "earliest_path"]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_ETA_GUARD = -1e-12


class NumericalInconsistencyError(ArithmeticError):
    """The ISI power came out negative beyond rounding (indicates a bug)."""


@dataclass(frozen=True)
class MultipathProfile:
    """Statistical description of the scattering environment.

    ``t_m`` is the delay spread in units of the symbol period.  For the
    ``uniform`` kind ``kappa`` is ignored.
    """

    n_paths: int = 10
    t_m: float = 0.6
    kind: Literal["uniform", "exponential"] = "uniform"
    kappa: float = 0.0

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError("need at least one path")
        if self.t_m < 0:
            raise ValueError("delay spread must be nonnegative")
        if self.kind not in ("uniform", "exponential"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kappa < 0:
            raise ValueError("decay rate must be nonnegative")

    def weights(self) -> np.ndarray:
        """Mean path powers ``E{alpha_n^2}``, summing to one."""
        n = np.arange(self.n_paths, dtype=float)
        if self.kind == "uniform":
            w = np.ones_like(n)
        else:
            w = np.exp(-2.0 * self.kappa * n)
        return w / w.sum()


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the multipath channel (delays in symbol periods)."""

    delays: np.ndarray
    gains: np.ndarray
    phases: np.ndarray
    complex_gains: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        d = np.asarray(self.delays, dtype=float).ravel()
        a = np.asarray(self.gains, dtype=float).ravel()
        p = np.asarray(self.phases, dtype=float).ravel()
        if not d.size == a.size == p.size or d.size == 0:
            raise ValueError("delays, gains and phases must be equal-length and nonempty")
        if np.any(a < 0):
            raise ValueError("path gains must be nonnegative")
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "gains", a)
        object.__setattr__(self, "phases", p)
        object.__setattr__(self, "complex_gains", a * np.exp(-1j * p))

    @property
    def n_paths(self) -> int:
        return self.delays.size

    @property
    def delay_spread(self) -> float:
        return float(np.max(np.abs(self.delays - self.delays[0])))

    @classmethod
    def from_complex(cls, delays, complex_gains) -> "ChannelRealization":
        g = np.asarray(complex_gains, dtype=complex)
        return cls(delays, np.abs(g), np.mod(-np.angle(g), 2.0 * np.pi))

    def to_dict(self) -> dict:
        return {
            "delays": self.delays.tolist(),
            "gains": self.gains.tolist(),
            "phases": self.phases.tolist(),
        }

    @classmethod
    def from_dict(cls, record: dict) -> "ChannelRealization":
        return cls(record["delays"], record["gains"], record["phases"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ChannelRealization":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class FadingPoint:
    h_o: complex
    eta_o: float
    tau_hat: float
    taps: tuple[complex, complex, complex]


def pds(t_m: float, t_s: float) -> float:
    """Percentage delay spread ``100 * t_m / t_s``."""
    if t_s <= 0:
        raise ValueError("symbol period must be positive")
    return 100.0 * t_m / t_s


def sample_batch(profile: MultipathProfile, rng: np.random.Generator, count: int):
    """Draw ``count`` realizations as stacked arrays.

    Returns
    -------
    delays : ndarray, shape (count, N)
        First column is zero; the rest are ``U[0, t_m]``.
    gamma : ndarray of complex, shape (count, N)
        ``alpha_n exp(-j phi_n)`` with Rayleigh ``alpha_n`` of mean power ``w_n``.
    """
    n = profile.n_paths
    delays = np.zeros((count, n))
    if n > 1:
        delays[:, 1:] = rng.uniform(0.0, profile.t_m, size=(count, n - 1))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(count, n))
    scale = np.sqrt(profile.weights() / 2.0)
    gains = rng.rayleigh(1.0, size=(count, n)) * scale
    return delays, gains * np.exp(-1j * phases)


def sample_realization(profile: MultipathProfile, rng: np.random.Generator) -> ChannelRealization:
    delays, gamma = sample_batch(profile, rng, 1)
    return ChannelRealization.from_complex(delays[0], gamma[0])


def narrowband_g(ch: ChannelRealization) -> complex:
    """Narrowband fading factor, the plain sum of the complex path gains."""
    return complex(np.sum(ch.complex_gains))


def _h_at(delays, gamma, tau, spec: PulseSpec):
    # delays/gamma (B, N), tau (B, M) -> h (B, M)
    r = autocorr((delays[:, None, :] - tau[:, :, None]) * spec.ts, spec)
    return np.einsum("bn,bmn->bm", gamma, r) / spec.energy


def synchronize_batch(
    delays: np.ndarray,
    gamma: np.ndarray,
    spec: PulseSpec,
    rule: SyncRule = "max_h",
    grid_step: float = 1e-2,
    tol: float = 1e-6,
) -> np.ndarray:
    """Receiver timing instant for each row of a realization batch.

    ``max_h`` maximizes ``|h_o(tau)|`` over ``[0, max_n tau_n]``: a uniform
    grid locates the best basin, then golden-section search refines it to
    ``tol`` (symbol periods).  ``earliest_path`` returns the first delay.
    """
    delays = np.atleast_2d(delays)
    gamma = np.atleast_2d(gamma)
    if rule == "earliest_path":
        return delays[:, 0].copy()
    if rule != "max_h":
        raise ValueError(f"unknown synchronization rule {rule!r}")
    if grid_step > 1e-2:
        raise ValueError("grid step must not exceed ts/100")

    span = delays.max(axis=1)
    top = float(span.max())
    if top == 0.0:
        return np.zeros(delays.shape[0])
    grid = np.arange(0.0, top + grid_step, grid_step)
    grid = np.minimum(grid, top)
    cand = np.minimum(grid[None, :], span[:, None])
    power = np.abs(_h_at(delays, gamma, cand, spec)) ** 2
    best = cand[np.arange(len(span)), np.argmax(power, axis=1)]

    lo = np.clip(best - grid_step, 0.0, span)
    hi = np.clip(best + grid_step, 0.0, span)

    def objective(t):
        return np.abs(_h_at(delays, gamma, t[:, None], spec)[:, 0]) ** 2

    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = objective(x1), objective(x2)
    while np.max(hi - lo) > tol:
        left = f1 > f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        new = np.where(left, hi - _GOLDEN * (hi - lo), lo + _GOLDEN * (hi - lo))
        fn = objective(new)
        x2, f2, x1, f1 = (
            np.where(left, x1, new),
            np.where(left, f1, fn),
            np.where(left, new, x2),
            np.where(left, fn, f2),
        )
    refined = 0.5 * (lo + hi)
    # never hand back a point worse than the grid winner
    keep = objective(refined) >= objective(best)
    return np.where(keep, refined, best)


def synchronize(
    ch: ChannelRealization,
    spec: PulseSpec,
    rule: SyncRule = "max_h",
    grid_step: float = 1e-2,
) -> float:
    """Timing instant the receiver locks to (see :func:`synchronize_batch`)."""
    tau = synchronize_batch(ch.delays[None, :], ch.complex_gains[None, :], spec, rule, grid_step)
    return float(tau[0])


def fading_batch(delays, gamma, tau_hat, spec: PulseSpec, *, with_eta: bool = True):
    """Fading factors for a batch of realizations.

    Returns
    -------
    h : ndarray of complex, shape (B,)
    eta : ndarray, shape (B,) or None
    taps : ndarray of complex, shape (B, 3)
        ``taps[:, v]`` projects onto the symbol ``v`` periods earlier;
        ``taps[:, 0]`` equals ``h``.
    """
    delays = np.atleast_2d(delays)
    gamma = np.atleast_2d(gamma)
    tau_hat = np.atleast_1d(np.asarray(tau_hat, dtype=float))
    shifts = tau_hat[:, None] + np.arange(3.0)[None, :]
    taps = _h_at(delays, gamma, shifts, spec)
    h = taps[:, 0]
    eta = None
    if with_eta:
        lag = (delays[:, :, None] - delays[:, None, :]) * spec.ts
        total = np.einsum("bn,bnm,bm->b", gamma, autocorr(lag, spec), gamma.conj())
        if np.max(np.abs(total.imag)) > 1e-10 * max(1.0, float(np.max(np.abs(total.real)))):
            raise NumericalInconsistencyError("path cross-correlation sum is not real")
        radicand = total.real - spec.energy * np.abs(h) ** 2
        if np.any(radicand < _ETA_GUARD):
            raise NumericalInconsistencyError(
                f"negative ISI power {radicand.min():.3e}"
            )
        eta = np.sqrt(np.maximum(radicand, 0.0))
    return h, eta, taps


def fading_h(ch: ChannelRealization, tau_hat: float, spec: PulseSpec) -> complex:
    h, _, _ = fading_batch(ch.delays, ch.complex_gains, tau_hat, spec, with_eta=False)
    return complex(h[0])


def fading_eta(ch: ChannelRealization, tau_hat: float, spec: PulseSpec) -> float:
    """ISI amplitude ``eta_o``.

    Computed as ``sqrt(gamma^H R gamma - (1 - beta/4)|h_o|^2)``, which expands
    to the diagonal-plus-cross-sum form; the radicand is clamped at zero only
    within 1e-12 of it.
    """
    _, eta, _ = fading_batch(ch.delays, ch.complex_gains, tau_hat, spec)
    return float(eta[0])


def fading_taps(ch: ChannelRealization, tau_hat: float, spec: PulseSpec) -> list[complex]:
    _, _, taps = fading_batch(ch.delays, ch.complex_gains, tau_hat, spec, with_eta=False)
    return [complex(v) for v in taps[0]]


def fading_point(
    ch: ChannelRealization,
    spec: PulseSpec,
    rule: SyncRule = "max_h",
    grid_step: float = 1e-2,
) -> FadingPoint:
    """Synchronize, then evaluate every fading quantity at that instant."""
    tau = synchronize(ch, spec, rule, grid_step)
    h, eta, taps = fading_batch(ch.delays, ch.complex_gains, tau, spec)
    return FadingPoint(complex(h[0]), float(eta[0]), tau, tuple(complex(v) for v in taps[0]))
