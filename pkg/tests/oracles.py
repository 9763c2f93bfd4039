"""Independent reference computations used only by the tests.

None of these touch the closed-form autocorrelation or the fading-factor
formulas; they work from the raised-cosine pulse and explicit waveforms.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import max_len_seq

from mediumband.pulse import PulseSpec, autocorr, rc_pulse


def stream_autocorr(lags, beta: float, *, n_symbols: int = 1_000_000, oversample: int = 64,
                    guard: int = 16, seed: int = 0) -> np.ndarray:
    """Time-average ``<s(t) s(t + lag)>`` of a random BPSK stream.

    ``lags`` are integers in units of ``1/oversample`` symbol periods.  The
    stream is built phase by phase: ``s(k + p/os) = sum_m I_m g(k - m + p/os)``.
    """
    spec = PulseSpec(beta)
    rng = np.random.default_rng(seed)
    amps = rng.choice([-1.0, 1.0], size=n_symbols)
    taps = np.arange(-guard, guard + 1)
    stream = np.empty((n_symbols, oversample))
    for p in range(oversample):
        kernel = rc_pulse(taps + p / oversample, spec)
        stream[:, p] = np.convolve(amps, kernel, mode="same")
    x = stream.ravel()
    # discard the ramp-in/ramp-out where the frame edges truncate the sum
    x = x[guard * oversample: -guard * oversample]
    out = []
    for lag in np.atleast_1d(lags):
        lag = abs(int(lag))
        out.append(float(np.mean(x[: x.size - lag] * x[lag:])) if lag else float(np.mean(x * x)))
    return np.array(out)


def _periodic_stream(amps: np.ndarray, shifts, oversample: int, beta: float, guard: int,
                     weights=None) -> np.ndarray:
    """``sum_i w_i s(t - shift_i)`` on ``t = j / oversample`` for a periodic symbol stream.

    Built phase by phase: for phase ``p`` the samples ``s(k + p/os - d)`` are a
    circular convolution of the symbols with ``g(j + p/os - d)``.
    """
    spec = PulseSpec(beta)
    period = amps.size
    shifts = np.atleast_1d(np.asarray(shifts, dtype=float))
    weights = np.ones(shifts.size) if weights is None else np.atleast_1d(weights)
    reach = guard + int(math.ceil(np.max(np.abs(shifts)))) + 1
    j = np.arange(-reach, reach + 1)
    out = np.zeros((period, oversample), dtype=complex)
    for p in range(oversample):
        kernel = np.zeros(j.size, dtype=complex)
        for w, d in zip(weights, shifts):
            x = j + p / oversample - d
            kernel += w * np.where(np.abs(x) <= guard, rc_pulse(x, spec), 0.0)
        # s_p[k] = sum_j kernel[j] * I[k - j]  (indices mod period)
        for jj, kv in zip(j, kernel):
            if kv != 0:
                out[:, p] += kv * np.roll(amps, jj)
    return out.ravel()


def waveform_projection(delays, gamma, tau_hat: float, beta: float, *, order: int = 17,
                        oversample: int = 64, guard: int = 16) -> dict:
    """Project a noiseless oversampled ``r(t)`` onto shifted copies of ``s(t)``.

    Symbols are one period of a maximal-length sequence, so the stream is
    white up to a ``1/period`` term.  Returns the regression coefficients of
    ``r(t)`` on ``s(t - tau_hat - v Ts)`` for ``v = 0, 1, 2`` (one regressor at
    a time) and the mean residual power of the ``v = 0`` fit.
    """
    seq, _ = max_len_seq(order)
    amps = 2.0 * seq.astype(float) - 1.0
    r = _periodic_stream(amps, delays, oversample, beta, guard, weights=gamma)
    regs = [np.real(_periodic_stream(amps, tau_hat + v, oversample, beta, guard)) for v in range(3)]
    single = np.array([np.vdot(s, r) / np.dot(s, s) for s in regs])
    resid = r - single[0] * regs[0]
    return {
        "single": single,
        "residual_power": float(np.mean(np.abs(resid) ** 2)),
        "symbols": amps.size,
    }


def brute_force_sync(delays, gamma, beta: float, step: float = 1e-5) -> float:
    """Exhaustive argmax of ``|h_o(tau)|`` over ``[0, max delay]`` at a fixed fine step.

    No refinement and no bracketing: every grid point is evaluated.
    """
    spec = PulseSpec(beta)
    grid = np.arange(0.0, float(np.max(delays)) + step / 2, step)
    vals = autocorr(np.asarray(delays)[None, :] - grid[:, None], spec) @ np.asarray(gamma)
    return float(grid[int(np.argmax(np.abs(vals)))])


def rc_scalar(x: float, beta: float) -> float:
    """Raised-cosine pulse at ``x`` symbol periods, written directly with ``math``."""
    if x == 0.0:
        return 1.0
    sinc = math.sin(math.pi * x) / (math.pi * x)
    if beta > 0.0 and abs(abs(x) - 1.0 / (2.0 * beta)) < 1e-12:
        return math.pi / 4.0 * math.sin(math.pi / (2.0 * beta)) / (math.pi / (2.0 * beta))
    return sinc * math.cos(math.pi * beta * x) / (1.0 - (2.0 * beta * x) ** 2)


def bit_loop_method1_errors(delays, gamma, tau_hat: float, h_o: complex, bits, noise,
                            beta: float, es: float = 1.0, guard: int = 16) -> int:
    """Method-1 bit errors for one frame using explicit per-symbol loops.

    ``r(k) = sqrt(Es) sum_m I_m sum_n gamma_n g(k + tau_hat - tau_n - m) + w(k)``,
    decided by the sign of ``Re[conj(h_o) r(k)]``.
    """
    n = len(bits)
    amps = [1.0 if b else -1.0 for b in bits]
    root = math.sqrt(es)
    reach = guard + int(math.ceil(max(delays))) + 1
    errors = 0
    for k in range(n):
        acc = 0j
        for m in range(max(0, k - reach), min(n, k + reach + 1)):
            for d, g in zip(delays, gamma):
                x = k + tau_hat - d - m
                if abs(x) <= guard:
                    acc += g * amps[m] * rc_scalar(x, beta)
        acc = root * acc + noise[k]
        decision = 1.0 if (h_o.conjugate() * acc).real >= 0.0 else -1.0
        if decision != amps[k]:
            errors += 1
    return errors
