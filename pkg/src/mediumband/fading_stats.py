"""Bimodal density of the mediumband fading factor.

Each quadrature component of ``h_o`` follows a Gaussian with a narrower
Gaussian "trench" subtracted at the origin::

    f(x) = (exp(-x^2 / 2 l0^2) - K exp(-x^2 / 2 l1^2)) / (sqrt(2 pi) (l0 - K l1))

with ``l0 = sigma_o`` and ``l1 = sigma_o sigma_i / sqrt(sigma_o^2 + sigma_i^2)``.
``K`` sets the trench depth and ``sigma_i`` its width; ``K = 0`` is the
Rayleigh (narrowband) case.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

__all__ = [
    "BimodalParams",
    "FitResult",
    "FitError",
    "TABLE1",
    "table1_params",
    "pdf_marginal",
    "cdf_marginal",
    "second_moment",
    "sample",
    "fit",
    "histogram",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)

#: PDS [%] -> (K, sigma_I^2, sigma_O^2) for a uniform profile (kappa = 0).
TABLE1 = {
    0: (0.0, 0.0, 0.5),
    20: (0.470, 0.0045, 0.4500),
    40: (0.660, 0.0090, 0.4310),
    60: (0.770, 0.0200, 0.4200),
    80: (0.830, 0.0280, 0.4160),
}


@dataclass(frozen=True)
class BimodalParams:
    """Trench depth ``k`` and the outer/inner scales of the bimodal density."""

    k: float
    sigma_o: float
    sigma_i: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.k < 1.0:
            raise ValueError(f"trench depth must lie in [0, 1), got {self.k}")
        if not self.sigma_o > 0.0:
            raise ValueError(f"sigma_o must be positive, got {self.sigma_o}")
        if self.sigma_i < 0.0:
            raise ValueError(f"sigma_i must be nonnegative, got {self.sigma_i}")
        if self.sigma_i == 0.0 and self.k > 0.0:
            raise ValueError("a trench of zero width needs k = 0")

    @classmethod
    def from_variances(cls, k: float, sigma_i2: float, sigma_o2: float) -> "BimodalParams":
        return cls(k, math.sqrt(sigma_o2), math.sqrt(sigma_i2))

    @property
    def lambda0(self) -> float:
        return self.sigma_o

    @property
    def lambda1(self) -> float:
        so2, si2 = self.sigma_o**2, self.sigma_i**2
        return math.sqrt(so2 * si2 / (so2 + si2))

    @property
    def denom(self) -> float:
        """``lambda0 - K lambda1``, positive for every valid parameter set."""
        return self.lambda0 - self.k * self.lambda1

    @property
    def xi(self) -> float:
        return self.lambda0 / self.denom

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(sigma_o2=self.sigma_o**2, sigma_i2=self.sigma_i**2,
                 lambda0=self.lambda0, lambda1=self.lambda1, xi=self.xi)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BimodalParams":
        if "sigma_o" in d:
            return cls(float(d["k"]), float(d["sigma_o"]), float(d["sigma_i"]))
        return cls.from_variances(float(d["k"]), float(d["sigma_i2"]), float(d["sigma_o2"]))


def table1_params(pds_percent: int) -> BimodalParams:
    """Reference density parameters for one tabulated delay-spread row (kappa = 0)."""
    try:
        k, si2, so2 = TABLE1[int(pds_percent)]
    except KeyError:
        raise ValueError(f"no tabulated row for PDS={pds_percent}%") from None
    return BimodalParams.from_variances(k, si2, so2)


def pdf_marginal(x, p: BimodalParams):
    """Density of one quadrature component of ``h_o``."""
    x2 = np.square(np.asarray(x, dtype=float))
    num = np.exp(-x2 / (2.0 * p.lambda0**2))
    if p.k > 0.0:
        num = num - p.k * np.exp(-x2 / (2.0 * p.lambda1**2))
    out = num / (_SQRT_2PI * p.denom)
    return out if out.ndim else float(out)


def cdf_marginal(x, p: BimodalParams):
    """Distribution function of one quadrature component (closed form via erf)."""
    from scipy.special import ndtr

    x = np.asarray(x, dtype=float)
    out = p.lambda0 * ndtr(x / p.lambda0)
    if p.k > 0.0:
        out = out - p.k * p.lambda1 * ndtr(x / p.lambda1)
    out = out / p.denom
    return out if out.ndim else float(out)


def second_moment(p: BimodalParams) -> float:
    """``E{|h_o|^2}`` summed over both quadrature components."""
    l0, l1, k = p.lambda0, p.lambda1, p.k
    return 2.0 * (l0**3 - k * l1**3) / (l0 - k * l1)


def _sample_component(p: BimodalParams, rng: np.random.Generator, n: int) -> np.ndarray:
    # Gaussian envelope with variance lambda0^2; acceptance rate is 1/xi
    out = np.empty(n)
    filled = 0
    ratio = 1.0 / p.lambda1**2 - 1.0 / p.lambda0**2 if p.k > 0.0 else 0.0
    while filled < n:
        want = int((n - filled) * p.xi * 1.1) + 16
        x = rng.normal(0.0, p.lambda0, size=want)
        if p.k > 0.0:
            accept = rng.uniform(size=want) >= p.k * np.exp(-0.5 * x * x * ratio)
            x = x[accept]
        take = min(x.size, n - filled)
        out[filled:filled + take] = x[:take]
        filled += take
    return out


def sample(p: BimodalParams, rng: np.random.Generator, size: int | None = None):
    """Draw complex ``h`` with independent bimodal real and imaginary parts.

    Returns a Python complex when ``size`` is None, otherwise an array.
    """
    n = 1 if size is None else int(size)
    re = _sample_component(p, rng, n)
    im = _sample_component(p, rng, n)
    h = re + 1j * im
    return complex(h[0]) if size is None else h


@dataclass
class FitResult:
    params: BimodalParams
    nll: float
    sample_count: int
    converged: bool = True

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "nll": self.nll,
                "sample_count": self.sample_count, "converged": self.converged}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


class FitError(RuntimeError):
    """Likelihood maximization did not converge; ``best`` holds the best point found."""

    def __init__(self, message: str, best: FitResult):
        super().__init__(message)
        self.best = best


_K_MAX = 0.999
_SIGMA_MIN, _SIGMA_MAX = 1e-6, 10.0
# half the 0.999 quantile of chi-square with 2 degrees of freedom
_LR_THRESHOLD = 0.5 * 13.815510557964274


def _nll(theta, x2: np.ndarray) -> float:
    k, so, si = theta
    if not (0.0 <= k <= _K_MAX and _SIGMA_MIN <= so <= _SIGMA_MAX and _SIGMA_MIN <= si <= _SIGMA_MAX):
        return np.inf
    l0 = so
    l1 = so * si / math.sqrt(so * so + si * si)
    dens = np.exp(-x2 / (2.0 * l0 * l0)) - k * np.exp(-x2 / (2.0 * l1 * l1))
    with np.errstate(divide="ignore"):
        s = np.sum(np.log(dens))
    return float(x2.size * math.log(_SQRT_2PI * (l0 - k * l1)) - s)


def _moment_start(var: float, k: float, ratio: float) -> np.ndarray:
    # choose sigma_o so the component variance matches for the given k and sigma_i/sigma_o
    l1_over_l0 = ratio / math.sqrt(1.0 + ratio * ratio)
    scale = (1.0 - k * l1_over_l0**3) / (1.0 - k * l1_over_l0)
    so = math.sqrt(var / scale)
    return np.array([k, so, ratio * so])


def fit(samples, *, restarts: int = 5, seed: int = 0, subsample: int = 200_000,
        max_iter: int = 2000) -> FitResult:
    """Maximum-likelihood fit of ``(K, sigma_o, sigma_i)`` to complex samples.

    Real and imaginary parts are pooled.  A bounded Nelder-Mead search is
    started from ``restarts`` jittered moment-matched points on a random
    subsample, and the best of those is polished on the full data set.

    The Gaussian (``K = 0``) is nested in the family, and for Gaussian data
    ``K`` is not identifiable (any ``K`` fits once ``lambda1 -> lambda0``).
    The trench is therefore kept only if it improves the log-likelihood by
    more than a likelihood-ratio threshold (chi-square, 2 dof, 0.999);
    otherwise the Gaussian estimate is returned.

    Raises
    ------
    FitError
        If the final polish fails to converge within ``max_iter`` iterations.
    """
    h = np.asarray(samples, dtype=complex).ravel()
    x = np.concatenate([h.real, h.imag])
    x2 = x * x
    var = float(np.mean(x2))
    rng = np.random.default_rng(seed)
    sub = x2 if x2.size <= subsample else rng.choice(x2, size=subsample, replace=False)

    bounds = [(0.0, _K_MAX), (_SIGMA_MIN, _SIGMA_MAX), (_SIGMA_MIN, _SIGMA_MAX)]
    starts = [_moment_start(var, 0.5, 0.15)]
    for _ in range(restarts - 1):
        starts.append(_moment_start(var, rng.uniform(0.05, 0.9), rng.uniform(0.05, 0.5)))

    best = None
    for start in starts:
        res = optimize.minimize(_nll, start, args=(sub,), method="Nelder-Mead", bounds=bounds,
                                options={"maxiter": max_iter, "xatol": 1e-6, "fatol": 1e-6})
        if best is None or res.fun < best.fun:
            best = res
    res = optimize.minimize(_nll, best.x, args=(x2,), method="Nelder-Mead", bounds=bounds,
                            options={"maxiter": max_iter, "xatol": 1e-7, "fatol": 1e-7})
    k, so, si = (float(v) for v in res.x)
    result = FitResult(BimodalParams(min(max(k, 0.0), _K_MAX), so, si), float(res.fun),
                       int(h.size), bool(res.success))
    gauss_nll = 0.5 * x2.size * (math.log(2.0 * math.pi * var) + 1.0)
    if res.success and gauss_nll - res.fun < _LR_THRESHOLD:
        result = FitResult(BimodalParams(0.0, math.sqrt(var), 0.0), float(gauss_nll),
                           int(h.size), True)
    if not res.success:
        raise FitError(f"likelihood fit did not converge: {res.message}", result)
    return result


def histogram(samples, bins: int = 200, limit: float | None = None):
    """Density histogram of the pooled quadrature components.

    Returns ``(edges, density)`` with ``len(edges) == bins + 1``.
    """
    h = np.asarray(samples, dtype=complex).ravel()
    x = np.concatenate([h.real, h.imag])
    if limit is None:
        limit = float(np.max(np.abs(x))) if x.size else 1.0
    density, edges = np.histogram(x, bins=bins, range=(-limit, limit), density=True)
    return edges, density
