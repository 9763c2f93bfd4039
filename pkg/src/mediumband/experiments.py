"""Scenario presets and the sweeps behind the ``ber``, ``pdf`` and ``bound`` commands.

Output files are CSV with ``#``-prefixed metadata lines on top (scenario,
seed, package version, creation time), followed by a deterministic body.
A JSON sidecar with the same stem carries the same metadata and rows.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
import re
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .ber_analytics import (
    BPSK,
    asymptote,
    local_slope,
    lower_bound,
    rayleigh_ber,
    series_coefficients,
    series_eval,
)
from .channel import MultipathProfile, fading_batch, sample_batch, synchronize_batch
from .fading_stats import (
    TABLE1,
    BimodalParams,
    FitResult,
    fit,
    histogram,
    pdf_marginal,
    table1_params,
)
from .link_sim import FrameConfig, LinkScenario, received_power, run_ber_paired
from .pulse import PulseSpec

__all__ = [
    "PRESET_NAMES",
    "preset",
    "scenario_to_text",
    "scenario_from_text",
    "snr_grid",
    "simulate_fading",
    "resolve_params",
    "cmd_ber",
    "cmd_pdf",
    "cmd_bound",
]

PRESET_NAMES = ("scenario1", "scenario2", "narrowband", "table1_pds(20)", "table1_pds(40)",
                "table1_pds(60)", "table1_pds(80)")

_N_PATHS = 10
_BETA = 0.22
_DEFAULT_SEED = 1


def _scenario(t_m: float, kind: str = "uniform", kappa: float = 0.0, seed: int = _DEFAULT_SEED):
    return LinkScenario(
        profile=MultipathProfile(_N_PATHS, t_m, kind, kappa),
        pulse=PulseSpec(_BETA, 1.0),
        frame=FrameConfig(100, _BETA),
        seed=seed,
    )


def preset(name: str) -> LinkScenario:
    """Named experiment setup.

    ``scenario1`` is the exponential profile (kappa 0.25) at PDS 20%,
    ``scenario2`` the uniform profile at PDS 60%, ``narrowband`` has zero
    delay spread, and ``table1_pds(p)`` is the uniform profile at PDS ``p``
    for ``p`` in 20, 40, 60, 80.  ``table1_pds40`` is accepted as well.
    """
    key = name.strip().lower()
    if key == "scenario1":
        return _scenario(0.2, "exponential", 0.25)
    if key == "scenario2":
        return _scenario(0.6)
    if key == "narrowband":
        return _scenario(0.0)
    m = re.fullmatch(r"table1_pds\(?(\d+)\)?", key)
    if m:
        p = int(m.group(1))
        if p not in (20, 40, 60, 80):
            raise ValueError(f"table1_pds takes 20, 40, 60 or 80, got {p}")
        return _scenario(p / 100.0)
    raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")


_TEXT_KEYS = ("n_paths", "t_m", "kind", "kappa", "beta", "ts", "frame_len", "oversample",
              "guard", "detector", "sync_rule", "seed")


def scenario_to_text(s: LinkScenario) -> str:
    """Flat ``key = value`` form, one key per line; ``#`` starts a comment."""
    d = s.to_dict()
    lines = [f"# mediumband scenario (PDS = {s.pds:g}%)"]
    lines += [f"{k} = {d[k]}" for k in _TEXT_KEYS]
    return "\n".join(lines) + "\n"


def scenario_from_text(text: str) -> LinkScenario:
    d = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _TEXT_KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        d[key] = value
    return LinkScenario.from_dict(d)


def snr_grid(start_db: float, stop_db: float, step_db: float) -> list[float]:
    """Inclusive dB grid; empty when ``start_db > stop_db``."""
    if step_db <= 0:
        raise ValueError("SNR step must be positive")
    if start_db > stop_db:
        return []
    n = int(math.floor((stop_db - start_db) / step_db + 1e-9)) + 1
    return [round(start_db + i * step_db, 10) for i in range(n)]


def simulate_fading(scenario: LinkScenario, n: int, *, batch: int = 5_000,
                    seed_offset: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """``n`` synchronized ``h_o`` values and the matching narrowband ``g_o``."""
    rng = np.random.default_rng(np.random.SeedSequence(scenario.seed, spawn_key=(0xFADE, seed_offset)))
    hs, gs = [], []
    done = 0
    while done < n:
        m = min(batch, n - done)
        delays, gamma = sample_batch(scenario.profile, rng, m)
        tau = synchronize_batch(delays, gamma, scenario.pulse, scenario.sync_rule)
        h, _, _ = fading_batch(delays, gamma, tau, scenario.pulse, with_eta=False)
        hs.append(h)
        gs.append(gamma.sum(axis=1))
        done += m
    return np.concatenate(hs), np.concatenate(gs)


def resolve_params(source: str | None, scenario: LinkScenario | None = None,
                   fit_samples: int = 200_000) -> tuple[BimodalParams, dict]:
    """Bound parameters from ``table1:<pds>``, a fit JSON file, or a fresh fit.

    Returns the parameters and a small provenance record for the output
    metadata.
    """
    if source and source.startswith("table1:"):
        pds = int(source.split(":", 1)[1])
        return table1_params(pds), {"source": source}
    if source:
        data = json.loads(Path(source).read_text())
        params = BimodalParams.from_dict(data.get("params", data))
        return params, {"source": str(source)}
    if scenario is None:
        raise ValueError("fitting the bound parameters needs a scenario")
    h, _ = simulate_fading(scenario, fit_samples)
    res = fit(h)
    return res.params, {"source": "fit", "fit": res.to_dict()}


def _metadata(kind: str, extra: dict) -> dict:
    meta = {"command": kind, "version": __version__,
            "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
    meta.update(extra)
    return meta


def _plain(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _write(out: Path, fmt: str, meta: dict, header: Sequence[str], rows: Iterable[Sequence]) -> list[Path]:
    rows = [[_plain(v) for v in r] for r in rows]
    out = Path(out)
    written = []
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        record = dict(meta, columns=list(header),
                      rows=[dict(zip(header, r)) for r in rows])
        if fmt == "csv":
            buf = io.StringIO()
            for key, value in meta.items():
                buf.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
            out.write_text(buf.getvalue())
            sidecar = out.with_suffix(".json")
            sidecar.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
            written += [out, sidecar]
        elif fmt == "json":
            out.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
            written.append(out)
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc.strerror or exc}") from exc
    return written


def cmd_ber(scenario: LinkScenario, snr_db: Sequence[float], out: Path, *,
            detectors: Sequence[str] = ("method1", "method2"), fmt: str = "csv",
            min_errors: int = 200, max_bits: int = 100_000_000,
            params: BimodalParams | None = None, params_info: dict | None = None,
            workers: int = 1) -> dict:
    """Simulated BER curves next to the analytical references.

    Columns: per detector the BER, error count, CI half-width; then the bits
    sent, the lower bound at ``params``, its three-term series, and the
    Rayleigh (narrowband, ISI-free) curve.
    """
    snr_db = list(snr_db)
    power = received_power(scenario) if snr_db else 1.0
    curves = run_ber_paired(scenario, snr_db, detectors=detectors, min_errors=min_errors,
                            max_bits=max_bits, workers=workers, power=power)
    coeffs = series_coefficients(params, BPSK) if params is not None else None

    header = ["snr_db", "snr"]
    for det in detectors:
        header += [f"ber_{det}", f"errors_{det}", f"ci_{det}"]
    header += ["bits", "frames", "lower_bound", "series", "rayleigh"]
    rows = []
    for i, db in enumerate(snr_db):
        snr = 10.0 ** (db / 10.0)
        row = [db, snr]
        for det in detectors:
            pt = curves[det][i]
            row += [pt.ber, pt.bit_errors, pt.ci_halfwidth]
        first = curves[detectors[0]][i]
        row += [first.bits, first.frames]
        row += [lower_bound(snr, params) if params is not None else float("nan"),
                series_eval(snr, coeffs) if coeffs is not None else float("nan"),
                rayleigh_ber(snr)]
        rows.append(row)
    meta = _metadata("ber", {
        "scenario": scenario.to_dict(),
        "seed": scenario.seed,
        "received_power": power,
        "stop": {"min_errors": min_errors, "max_bits": max_bits},
        "params": params.to_dict() if params is not None else None,
        "params_source": params_info or {},
    })
    files = _write(out, fmt, meta, header, rows)
    return {"files": files, "curves": curves, "rows": rows, "header": header}


def cmd_pdf(scenario: LinkScenario, samples: int, bins: int, out: Path, *,
            fmt: str = "csv") -> dict:
    """Histograms of simulated ``h_o`` and ``g_o`` plus the bimodal fit.

    The fit goes to ``<stem>.fit.json`` as ``{params, nll, sample_count}``
    together with the tabulated row for the same PDS when one exists.
    ``fading_stats.FitError`` propagates if the fit does not converge.
    """
    h, g = simulate_fading(scenario, samples)
    result: FitResult = fit(h)
    limit = 4.0 * math.sqrt(0.5)
    edges, dens_h = histogram(h, bins, limit)
    _, dens_g = histogram(g, bins, limit)
    centers = 0.5 * (edges[:-1] + edges[1:])
    model = pdf_marginal(centers, result.params)
    header = ["bin_left", "bin_right", "center", "density_h", "density_g", "fitted_pdf"]
    rows = zip(edges[:-1], edges[1:], centers, dens_h, dens_g, model)
    rows = [[float(v) for v in r] for r in rows]

    pds = round(scenario.pds)
    table_row = None
    if scenario.profile.kappa == 0.0 and pds in TABLE1 and abs(scenario.pds - pds) < 1e-9:
        k, si2, so2 = TABLE1[pds]
        table_row = {"pds": pds, "k": k, "sigma_i2": si2, "sigma_o2": so2}
    fitted = result.params
    comparison = {
        "fitted": {"k": fitted.k, "sigma_i2": fitted.sigma_i**2, "sigma_o2": fitted.sigma_o**2},
        "table1": table_row,
    }
    meta = _metadata("pdf", {"scenario": scenario.to_dict(), "seed": scenario.seed,
                             "samples": samples, "bins": bins})
    files = _write(out, fmt, meta, header, rows)
    fit_path = Path(out).with_suffix(".fit.json")
    fit_record = dict(result.to_dict(), comparison=comparison, **meta)
    try:
        fit_path.write_text(json.dumps(fit_record, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {fit_path}: {exc.strerror or exc}") from exc
    return {"files": files + [fit_path], "fit": result, "comparison": comparison,
            "h": h, "g": g}


def cmd_bound(params: BimodalParams, snr_db: Sequence[float], out: Path, *, fmt: str = "csv",
              params_info: dict | None = None) -> dict:
    """Lower bound, its asymptote and series, the Rayleigh curve and the local slope."""
    snr_db = list(snr_db)
    snr = np.array([10.0 ** (db / 10.0) for db in snr_db])
    coeffs = series_coefficients(params, BPSK)
    lb = np.array([lower_bound(s, params) for s in snr])
    slope = local_slope(snr, lb) if len(snr) >= 2 else np.full(len(snr), np.nan)
    header = ["snr_db", "snr", "lower_bound", "asymptote", "series", "rayleigh", "slope"]
    rows = [[db, float(s), float(v), asymptote(s, params), series_eval(s, coeffs),
             rayleigh_ber(s), float(sl)]
            for db, s, v, sl in zip(snr_db, snr, lb, slope)]
    meta = _metadata("bound", {"params": params.to_dict(), "params_source": params_info or {},
                               "series": {"gamma1": coeffs.gamma1, "gamma2": coeffs.gamma2,
                                          "gamma3": coeffs.gamma3}})
    files = _write(out, fmt, meta, header, rows)
    return {"files": files, "rows": rows, "header": header}
