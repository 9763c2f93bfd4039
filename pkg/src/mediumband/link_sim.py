"""Frame-based BPSK Monte Carlo over mediumband multipath.

Each frame draws a fresh channel, synchronizes, samples the received
superposition of RC-shaped symbols at ``tau_hat + k Ts``, adds complex AWGN
and runs the requested detectors on the same samples.  Frames are grouped
in fixed-size chunks whose seeds derive only from ``(seed, snr index,
chunk index)``, so results do not depend on how many workers run them.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .channel import (
    ChannelRealization,
    MultipathProfile,
    SyncRule,
    fading_batch,
    sample_batch,
    synchronize_batch,
)
from .pulse import PulseSpec, rc_pulse

__all__ = [
    "FrameConfig",
    "LinkScenario",
    "BerPoint",
    "DegenerateChannelError",
    "modulate",
    "composite_taps",
    "received_samples",
    "synthesize_waveform",
    "detect_method1",
    "detect_method2",
    "received_power",
    "simulate_chunk",
    "run_ber",
    "run_ber_paired",
]

Detector = Literal["method1", "method2"]
DETECTORS: tuple[str, ...] = ("method1", "method2")

_CALIBRATION_KEY = 0xCA1B


class DegenerateChannelError(ZeroDivisionError):
    """The desired-symbol tap is exactly zero, so the slicer is undefined."""


@dataclass(frozen=True)
class FrameConfig:
    frame_len: int = 100
    beta: float = 0.22
    oversample: int = 64
    guard: int = 16

    def __post_init__(self) -> None:
        if self.frame_len < 3:
            raise ValueError("frame must hold at least 3 symbols")
        if self.oversample < 16:
            raise ValueError("oversampling factor must be at least 16")
        if self.guard < 1:
            raise ValueError("guard must be a positive number of symbols")


@dataclass(frozen=True)
class LinkScenario:
    """Everything needed to reproduce one BER experiment."""

    profile: MultipathProfile = field(default_factory=MultipathProfile)
    pulse: PulseSpec = field(default_factory=PulseSpec)
    frame: FrameConfig = field(default_factory=FrameConfig)
    detector: Detector = "method1"
    sync_rule: SyncRule = "max_h"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.detector not in DETECTORS:
            raise ValueError(f"unknown detector {self.detector!r}")
        if self.sync_rule not in ("max_h", "earliest_path"):
            raise ValueError(f"unknown synchronization rule {self.sync_rule!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if abs(self.frame.beta - self.pulse.beta) > 0.0:
            raise ValueError("frame and pulse roll-off disagree")

    @property
    def pds(self) -> float:
        return 100.0 * self.profile.t_m / self.pulse.ts

    def to_dict(self) -> dict:
        d = {
            "n_paths": self.profile.n_paths,
            "t_m": self.profile.t_m,
            "kind": self.profile.kind,
            "kappa": self.profile.kappa,
            "beta": self.pulse.beta,
            "ts": self.pulse.ts,
            "frame_len": self.frame.frame_len,
            "oversample": self.frame.oversample,
            "guard": self.frame.guard,
            "detector": self.detector,
            "sync_rule": self.sync_rule,
            "seed": self.seed,
            "pds": self.pds,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LinkScenario":
        beta = float(d.get("beta", 0.22))
        return cls(
            profile=MultipathProfile(int(d.get("n_paths", 10)), float(d.get("t_m", 0.6)),
                                     str(d.get("kind", "uniform")), float(d.get("kappa", 0.0))),
            pulse=PulseSpec(beta, float(d.get("ts", 1.0))),
            frame=FrameConfig(int(d.get("frame_len", 100)), beta,
                              int(d.get("oversample", 64)), int(d.get("guard", 16))),
            detector=str(d.get("detector", "method1")),
            sync_rule=str(d.get("sync_rule", "max_h")),
            seed=int(d.get("seed", 0)),
        )


@dataclass
class BerPoint:
    """Error count at one SNR.

    ``ci_halfwidth`` is a 95% half-width computed from the spread of
    per-frame error counts.  Bits inside a frame share one channel draw, so
    treating them as independent trials (``ci_binomial``) understates the
    uncertainty badly under block fading.
    """

    snr: float
    bit_errors: int
    bits: int
    frames: int = 0
    frame_err_sq: float = 0.0
    ci_halfwidth: float = field(init=False)
    one_sided: bool = field(init=False)

    def __post_init__(self) -> None:
        self.one_sided = self.bit_errors == 0 and self.bits > 0
        if self.one_sided:
            # rule of three: one-sided 95% upper limit
            self.ci_halfwidth = -math.log(0.05) / self.bits
        elif self.frames > 1:
            per_frame = self.bits / self.frames
            mean = self.bit_errors / self.frames
            var = (self.frame_err_sq - self.frames * mean * mean) / (self.frames - 1)
            self.ci_halfwidth = 1.96 * math.sqrt(max(var, 0.0) / self.frames) / per_frame
        else:
            self.ci_halfwidth = self.ci_binomial

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def ci_binomial(self) -> float:
        p = self.ber
        return 1.96 * math.sqrt(p * (1.0 - p) / self.bits) if self.bits else math.inf

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr) if self.snr > 0 else -math.inf

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(ber=self.ber, snr_db=self.snr_db, ci_binomial=self.ci_binomial)
        return d


def modulate(bits) -> np.ndarray:
    """BPSK map, ``0 -> -1`` and ``1 -> +1``."""
    b = np.asarray(bits)
    if b.size and not np.all((b == 0) | (b == 1)):
        raise ValueError("bits must be 0 or 1")
    return 2.0 * b.astype(float) - 1.0


def composite_taps(delays, gamma, tau_hat, spec: PulseSpec, guard: int):
    """Symbol-rate impulse response of the channel seen by the sampler.

    Delays and ``tau_hat`` are in symbol periods.  Returns ``(offsets, c)`` where ``c[:, i]`` multiplies the symbol
    ``offsets[i]`` periods before the current one:
    ``c_j = sum_n gamma_n g(tau_hat + j Ts - tau_n)``, with the pulse tails
    cut at ``guard`` symbol periods.
    """
    delays = np.atleast_2d(delays)
    gamma = np.atleast_2d(gamma)
    tau_hat = np.atleast_1d(tau_hat)
    reach = int(math.ceil(float(delays.max()))) if delays.size else 0
    offsets = np.arange(-guard, guard + reach + 1)
    arg = tau_hat[:, None, None] + offsets[None, :, None] - delays[:, None, :]
    g = np.where(np.abs(arg) <= guard, rc_pulse(arg * spec.ts, spec), 0.0)
    return offsets, np.einsum("bn,bjn->bj", gamma, g)


def _convolve_frames(amps: np.ndarray, offsets: np.ndarray, c: np.ndarray) -> np.ndarray:
    # r[b, k] = sum_j c[b, j] I[b, k - offsets[j]], symbols outside the frame are zero
    n_frames, n = amps.shape
    r = np.zeros((n_frames, n), dtype=complex)
    for j, off in enumerate(offsets):
        if off >= n or -off >= n:
            continue
        if off >= 0:
            r[:, off:] += c[:, j, None] * amps[:, : n - off]
        else:
            r[:, : n + off] += c[:, j, None] * amps[:, -off:]
    return r


def _noise(rng: np.random.Generator, shape, noise_var: float) -> np.ndarray:
    scale = math.sqrt(noise_var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def received_samples(amps, ch: ChannelRealization, tau_hat: float, cfg: FrameConfig,
                     es: float, noise_var: float, rng: np.random.Generator | None = None) -> np.ndarray:
    """Symbol-rate samples ``r'(k)`` of one frame at ``t = tau_hat + k Ts``."""
    if es <= 0:
        raise ValueError("symbol energy must be positive")
    amps = np.asarray(amps, dtype=float)[None, :]
    spec = PulseSpec(cfg.beta)
    offsets, c = composite_taps(ch.delays, ch.complex_gains, tau_hat, spec, cfg.guard)
    r = math.sqrt(es) * _convolve_frames(amps, offsets, c)[0]
    if noise_var > 0:
        if rng is None:
            raise ValueError("a random generator is required when noise_var > 0")
        r = r + _noise(rng, r.shape, noise_var)
    return r


def synthesize_waveform(amps, ch: ChannelRealization, cfg: FrameConfig, es: float = 1.0,
                        *, start: float = 0.0, circular: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Noiseless oversampled baseband waveform ``r(t)``.

    Samples are taken at ``t = start + i / oversample`` (symbol periods) for
    one pass over the symbol sequence.  With ``circular`` the symbol stream
    is treated as periodic, which removes edge effects for long-run
    statistics.  Returns ``(t, r)``.
    """
    amps = np.asarray(amps, dtype=float)
    n = amps.size
    os_ = cfg.oversample
    spec = PulseSpec(cfg.beta)
    t = start + np.arange(n * os_) / os_
    # build the per-path pulse train once on a common fractional grid
    up = np.zeros(n * os_)
    up[::os_] = amps
    span = cfg.guard + int(math.ceil(float(ch.delays.max()))) + 1
    lags = np.arange(-span * os_, span * os_ + 1) / os_
    kernel = np.zeros(lags.size, dtype=complex)
    for d, gam in zip(ch.delays, ch.complex_gains):
        x = start + lags - d
        kernel += gam * np.where(np.abs(x) <= cfg.guard, rc_pulse(x * spec.ts, spec), 0.0)
    if circular:
        full = np.zeros(n * os_, dtype=complex)
        idx = np.arange(lags.size) - span * os_
        np.add.at(full, idx % (n * os_), kernel)
        r = np.fft.ifft(np.fft.fft(up) * np.fft.fft(full))
    else:
        conv = np.convolve(up, kernel)
        r = conv[span * os_: span * os_ + n * os_]
    return t, math.sqrt(es) * r


def _slice(delta: np.ndarray) -> np.ndarray:
    # ties go to +1
    return np.where(delta < 0.0, -1.0, 1.0)


def detect_method1(r, h_o, es: float = 1.0) -> np.ndarray:
    """Matched-filter symbol decisions ``sign(Re[conj(h_o) r / (sqrt(Es) |h_o|^2)])``.

    ``h_o`` may be a scalar (one frame) or an array broadcasting against the
    leading axes of ``r``.
    """
    r = np.asarray(r)
    h = np.asarray(h_o, dtype=complex)
    if np.any(h == 0):
        raise DegenerateChannelError("h_o is zero")
    if h.ndim:
        h = h[..., None]
    delta = np.real(np.conj(h) * r) / (math.sqrt(es) * np.abs(h) ** 2)
    return _slice(delta)


def detect_method2(r, taps, es: float = 1.0) -> np.ndarray:
    """Successive cancellation of the two previous decisions, then slicing.

    ``taps`` is ``(h1, h2, h3)`` for one frame or an array of shape
    ``(B, 3)`` matching ``r`` of shape ``(B, L)``.  The first symbol is
    sliced without cancellation and the second cancels only ``h2``.
    """
    r = np.atleast_2d(np.asarray(r, dtype=complex))
    t = np.atleast_2d(np.asarray(taps, dtype=complex))
    single = np.ndim(taps) == 1
    h1, h2, h3 = t[:, 0], t[:, 1], t[:, 2]
    if np.any(h1 == 0):
        raise DegenerateChannelError("first tap is zero")
    root = math.sqrt(es)
    norm = root * np.abs(h1) ** 2
    out = np.empty(r.shape)
    for k in range(r.shape[1]):
        z = r[:, k].copy()
        if k >= 1:
            z -= root * h2 * out[:, k - 1]
        if k >= 2:
            z -= root * h3 * out[:, k - 2]
        out[:, k] = _slice(np.real(np.conj(h1) * z) / norm)
    return out[0] if single else out


def received_power(scenario: LinkScenario, *, realizations: int = 20_000, batch: int = 2_000) -> float:
    """Mean symbol-rate received power ``E{|r(k)|^2}`` for unit symbol energy.

    Uses the ratio of the sampled power to the continuous-time power
    ``(1 - beta/4)|h_o|^2 + eta_o^2``, whose mean is exactly ``1 - beta/4``;
    the shared fluctuation of the path gains cancels in the ratio.
    """
    spec = scenario.pulse
    rng = np.random.default_rng(np.random.SeedSequence(scenario.seed, spawn_key=(_CALIBRATION_KEY,)))
    sampled = 0.0
    cont = 0.0
    done = 0
    while done < realizations:
        m = min(batch, realizations - done)
        delays, gamma = sample_batch(scenario.profile, rng, m)
        tau = synchronize_batch(delays, gamma, spec, scenario.sync_rule)
        h, eta, _ = fading_batch(delays, gamma, tau, spec)
        _, c = composite_taps(delays, gamma, tau, spec, scenario.frame.guard)
        sampled += float(np.sum(np.abs(c) ** 2))
        cont += float(np.sum(spec.energy * np.abs(h) ** 2 + eta**2))
        done += m
    return spec.energy * sampled / cont


def simulate_chunk(scenario: LinkScenario, noise_var: float, seed_seq: np.random.SeedSequence,
                   n_frames: int, detectors: Sequence[str] = DETECTORS, es: float = 1.0) -> dict:
    """Run ``n_frames`` independent frames and count bit errors per detector."""
    rng = np.random.default_rng(seed_seq)
    spec = scenario.pulse
    cfg = scenario.frame
    delays, gamma = sample_batch(scenario.profile, rng, n_frames)
    tau = synchronize_batch(delays, gamma, spec, scenario.sync_rule)
    h, _, taps = fading_batch(delays, gamma, tau, spec, with_eta=False)
    offsets, c = composite_taps(delays, gamma, tau, spec, cfg.guard)
    bits = rng.integers(0, 2, size=(n_frames, cfg.frame_len))
    amps = modulate(bits)
    r = math.sqrt(es) * _convolve_frames(amps, offsets, c)
    r = r + _noise(rng, r.shape, noise_var)
    errors = {}
    squares = {}
    for det in detectors:
        if det == "method1":
            dec = detect_method1(r, h, es)
        elif det == "method2":
            dec = detect_method2(r, taps, es)
        else:
            raise ValueError(f"unknown detector {det!r}")
        per_frame = np.count_nonzero(dec != amps, axis=1)
        errors[det] = int(per_frame.sum())
        squares[det] = int(np.dot(per_frame, per_frame))
    return {"errors": errors, "squares": squares, "frames": n_frames,
            "bits": n_frames * cfg.frame_len}


def _chunk_task(args):
    return simulate_chunk(*args)


def run_ber_paired(
    scenario: LinkScenario,
    snr_db: Iterable[float],
    *,
    detectors: Sequence[str] = DETECTORS,
    min_errors: int = 200,
    max_bits: int = 100_000_000,
    chunk_frames: int = 200,
    workers: int = 1,
    power: float | None = None,
) -> dict[str, list[BerPoint]]:
    """BER curves for several detectors evaluated on identical frames.

    Every SNR point runs whole chunks until each detector has at least
    ``min_errors`` errors or ``max_bits`` bits were sent.  Noise variance is
    ``power / gamma_bar`` with ``power`` the symbol-rate received power (see
    :func:`received_power`, computed when not given).
    """
    detectors = tuple(detectors)
    for det in detectors:
        if det not in DETECTORS:
            raise ValueError(f"unknown detector {det!r}")
    grid = [float(v) for v in snr_db]
    out: dict[str, list[BerPoint]] = {d: [] for d in detectors}
    if not grid:
        return out
    if power is None:
        power = received_power(scenario)
    root = np.random.SeedSequence(scenario.seed)
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for i, db in enumerate(grid):
            snr = 10.0 ** (db / 10.0)
            noise_var = power / snr
            errors = dict.fromkeys(detectors, 0)
            squares = dict.fromkeys(detectors, 0)
            bits = 0
            frames = 0
            chunk = 0
            done = False
            while not done:
                wave = max(1, workers)
                tasks = [(scenario, noise_var,
                          np.random.SeedSequence(root.entropy, spawn_key=(i, chunk + w)),
                          chunk_frames, detectors)
                         for w in range(wave)]
                results = pool.map(_chunk_task, tasks) if pool else map(_chunk_task, tasks)
                # consume in chunk order so the stopping point is worker-independent
                for res in results:
                    chunk += 1
                    bits += res["bits"]
                    frames += res["frames"]
                    for det in detectors:
                        errors[det] += res["errors"][det]
                        squares[det] += res["squares"][det]
                    if min(errors.values()) >= min_errors or bits >= max_bits:
                        done = True
                        break
            for det in detectors:
                out[det].append(BerPoint(snr, errors[det], bits, frames, float(squares[det])))
    finally:
        if pool is not None:
            pool.shutdown()
    return out


def run_ber(scenario: LinkScenario, snr_db: Iterable[float], *, min_errors: int = 200,
            max_bits: int = 100_000_000, **kwargs) -> list[BerPoint]:
    """BER curve for the scenario's own detector."""
    res = run_ber_paired(scenario, snr_db, detectors=(scenario.detector,),
                         min_errors=min_errors, max_bits=max_bits, **kwargs)
    return res[scenario.detector]
