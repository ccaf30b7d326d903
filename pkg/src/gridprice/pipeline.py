"""Per-ISO orchestration: ingest, detrend, volatility, regressions, reports.

Every stage writes plain CSV/JSON into ``<output_dir>/<ISO>/``; the run
writes ``manifest.json`` at the top of the output directory.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import traceback
from dataclasses import asdict, dataclass, fields
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from . import detrend, market_data, quantile_regression as qr, report, skew_t, volatility
from .errors import GridPriceError
from .market_data import IsoId
from .spline_basis import make_spec

logger = logging.getLogger(__name__)

DEFAULT_SEED = skew_t.MC_SEED
SKEWT_CURVE_PROBS = (0.10, 0.25, 0.50, 0.75, 0.90)

SCHEMAS = {
    "hourly": market_data.CANONICAL_COLUMNS,
    "residuals": market_data.CANONICAL_COLUMNS + ["detrended_price", "trend"],
    "volatility": market_data.CANONICAL_COLUMNS + ["detrended_price", "trend", "ewmsd_usd"],
    "detrend_coefficients": ["term", "estimate", "active"],
    "qreg_curves": ["x", "vre_pct", "q_hat", "dq_dx", "tau"],
    "skewt_coefficients": ["iso", "parameter", "estimate", "std_error"],
    "skewt_skewness": ["vre_pct", "nu", "nu_lower", "nu_upper"],
    "skewt_quantiles": ["vre_pct", "prob", "quantile"],
    "skewt_differences": ["vre_pct", "upper_q", "lower_q", "difference", "lower", "upper"],
    "summary": ["iso", "variable", "min", "median", "max", "mean", "sd"],
    "negative_prices": ["vre_lower", "vre_upper", "n", "n_negative", "fraction"],
}


def _parse_list(value) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return tuple(v.strip() for v in str(value).split(",") if v.strip())


@dataclass
class RunConfig:
    isos: tuple = ("CAISO",)
    date_from: Optional[date] = None
    date_to: Optional[date] = None
    cache_dir: Optional[str] = None
    input_dir: Optional[str] = None
    output_dir: str = "gridprice-out"
    lam: float = volatility.DEFAULT_LAMBDA
    warmup: int = volatility.DEFAULT_WARMUP
    taus_price: tuple = qr.PRICE_TAUS
    taus_volatility: tuple = qr.VOLATILITY_TAUS
    knots: int = 3
    degree: int = 3
    grid_points: int = qr.GRID_POINTS
    mc_draws: int = skew_t.MC_DRAWS
    seed: int = DEFAULT_SEED
    untrimmed_volatility_summary: bool = False

    # config-file key -> field name
    KEYS = {
        "isos": "isos", "from": "date_from", "to": "date_to", "cache_dir": "cache_dir",
        "input_dir": "input_dir", "output_dir": "output_dir", "lambda": "lam",
        "warmup": "warmup", "taus_price": "taus_price", "taus_volatility": "taus_volatility",
        "knots": "knots", "degree": "degree", "grid_points": "grid_points",
        "mc_draws": "mc_draws", "seed": "seed",
        "untrimmed_volatility_summary": "untrimmed_volatility_summary",
    }

    def __post_init__(self):
        self.isos = tuple(IsoId.parse(i) for i in _parse_list(self.isos))
        self.taus_price = tuple(float(t) for t in _parse_list(self.taus_price))
        self.taus_volatility = tuple(float(t) for t in _parse_list(self.taus_volatility))
        for t in self.taus_price + self.taus_volatility:
            if not 0 < t < 1:
                raise ValueError(f"quantile level {t} outside (0, 1)")
        if self.date_from is not None:
            self.date_from = market_data.parse_date(self.date_from)
        if self.date_to is not None:
            self.date_to = market_data.parse_date(self.date_to)
        self.lam = float(self.lam)
        self.warmup = int(self.warmup)
        self.knots = int(self.knots)
        self.degree = int(self.degree)
        self.grid_points = int(self.grid_points)
        self.mc_draws = int(self.mc_draws)
        self.seed = int(self.seed)
        if isinstance(self.untrimmed_volatility_summary, str):
            self.untrimmed_volatility_summary = self.untrimmed_volatility_summary.lower() in ("1", "true", "yes")
        env_cache = os.environ.get("GRIDPRICE_CACHE")
        if env_cache:
            self.cache_dir = env_cache

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        values = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in cls.KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[cls.KEYS[key]] = value
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def as_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "isos":
                v = [i.value for i in v]
            elif isinstance(v, date):
                v = v.isoformat()
            elif isinstance(v, tuple):
                v = list(v)
            d[f.name] = v
        return d

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


# --- writers ----------------------------------------------------------------

def _write_csv(df: pd.DataFrame, path: Path) -> int:
    out = df.copy()
    for c in out.columns:
        if pd.api.types.is_float_dtype(out[c]):
            out[c] = [repr(float(v)) for v in out[c]]
        elif out[c].dtype == bool:
            out[c] = np.where(out[c], "true", "false")
    path.parent.mkdir(parents=True, exist_ok=True)
    out.to_csv(path, index=False, lineterminator="\n")
    return len(out)


def _write_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --- stages -------------------------------------------------------------------

def detrend_stage(hourly: pd.DataFrame, tz) -> tuple:
    return detrend.detrend_frame(hourly, tz=tz)


def volatility_stage(residuals: pd.DataFrame, lam: float, warmup: int) -> tuple:
    vol = volatility.ewmsd(residuals["detrended_price"].to_numpy(), lam=lam, warmup=warmup,
                           timestamps=residuals["timestamp"].to_numpy())
    out = residuals.copy()
    out["ewmsd_usd"] = vol.sigma
    return out, vol


def regression_pairs(frame: pd.DataFrame, target: str, warmup: int) -> tuple:
    if target == "price":
        return frame["vre_pct"].to_numpy(), frame["detrended_price"].to_numpy()
    if target == "volatility":
        vol = volatility.EwmsdSeries(frame["ewmsd_usd"].to_numpy(), lam=float("nan"), warmup=warmup,
                                     timestamps=frame["timestamp"].to_numpy())
        pairs = volatility.align_volatility(vol, frame["timestamp"].to_numpy(), frame["vre_pct"].to_numpy())
        return pairs["vre_pct"].to_numpy(), pairs["ewmsd_usd"].to_numpy()
    raise ValueError(f"unknown regression target {target!r}")


def qreg_stage(x, y, taus, knots: int, degree: int, grid_points: int, out_dir: Path) -> dict:
    """Fit one curve per level; writes coefficient JSON files and ``curves.csv``."""
    spec = make_spec(float(np.min(x)), float(np.max(x)), knots, degree, data=x)
    grid = np.linspace(spec.lower, spec.upper, grid_points)
    fits, parts = [], []
    for tau in taus:
        fit = qr.fit_quantile(x, y, tau, spec)
        fits.append(fit)
        _write_json(fit.to_dict(), out_dir / f"coefficients_tau{tau:g}.json")
        # interior derivative at the ends is one-sided by construction
        inner = np.clip(grid, np.nextafter(spec.lower, spec.upper), np.nextafter(spec.upper, spec.lower))
        parts.append(pd.DataFrame({
            "x": np.arange(grid_points), "vre_pct": grid,
            "q_hat": qr.predict_quantile(fit, grid), "dq_dx": qr.quantile_derivative(fit, inner),
            "tau": float(tau),
        }))
    crossings = qr.crossing_diagnostic(fits, grid)
    _write_json({"crossings": crossings}, out_dir / "crossings.json")
    rows = _write_csv(pd.concat(parts, ignore_index=True), out_dir / "curves.csv")
    return {"n_obs": int(len(x)), "curve_rows": rows, "n_crossings": len(crossings),
            "methods": [f.method for f in fits]}


def skewt_stage(frame: pd.DataFrame, iso_name: str, grid_points: int, mc_draws: int,
                seed: int, out_dir: Path) -> dict:
    y = frame["detrended_price"].to_numpy()
    x = frame["vre_pct"].to_numpy()
    fit = skew_t.fit_skewt_glm(y, x)
    coef = pd.DataFrame([{"iso": iso_name, "parameter": r["parameter"],
                          "estimate": r["estimate"], "std_error": r["std_error"]}
                         for r in fit.table_rows()])
    _write_csv(coef, out_dir / "coefficients.csv")
    grid = np.linspace(float(np.min(x)), float(np.max(x)), grid_points)
    _write_csv(pd.DataFrame(skew_t.skewness_curve(fit, grid)), out_dir / "skewness_curve.csv")
    curves = skew_t.quantile_curves(fit.beta, grid, SKEWT_CURVE_PROBS)
    _write_csv(pd.concat([pd.DataFrame({"vre_pct": grid, "prob": p, "quantile": q})
                          for p, q in curves.items()], ignore_index=True),
               out_dir / "quantile_curves.csv")
    diffs = skew_t.quantile_differences(fit, grid, n_draws=mc_draws, seed=seed)
    _write_csv(pd.concat([pd.DataFrame(d) for d in diffs], ignore_index=True)[SCHEMAS["skewt_differences"]],
               out_dir / "quantile_differences.csv")
    return {"converged": bool(fit.converged), "loglik": float(fit.loglik),
            "grad_norm": float(fit.grad_norm), "start": fit.start, "n_obs": fit.n_obs}


def report_stage(frame: pd.DataFrame, iso_name: str, warmup: int, out_dir: Path,
                 untrimmed: bool = False) -> dict:
    vol = frame["ewmsd_usd"].to_numpy()
    cols = {
        "detrended_price": frame["detrended_price"].to_numpy(),
        "price_volatility": vol[warmup:],
        "vre_pct": frame["vre_pct"].to_numpy(),
    }
    if untrimmed:
        cols["price_volatility_untrimmed"] = vol
    rows = report.summary_rows(iso_name, cols)
    _write_csv(pd.DataFrame([asdict(r) for r in rows]), out_dir / "summary.csv")
    overall, table = report.negative_price_frequency(frame["price_usd_mwh"], frame["vre_pct"])
    _write_csv(table, out_dir / "negative_prices.csv")
    cap = report.threshold_frequency(frame["price_usd_mwh"], report.PRICE_CAP)
    checks = {"price_cap_usd_mwh": report.PRICE_CAP, "fraction_at_or_above_cap": cap,
              "fraction_negative_raw_price": overall, "n_obs": int(len(frame))}
    _write_json(checks, out_dir / "checks.json")
    return checks


# --- orchestration ------------------------------------------------------------

def load_hourly(config: RunConfig, iso: IsoId) -> pd.DataFrame:
    if config.input_dir:
        return market_data.read_hourly_csv(Path(config.input_dir) / f"{iso.value}.csv")
    if not (config.cache_dir and config.date_from and config.date_to):
        raise GridPriceError("either input_dir or cache_dir with from/to dates is required")
    return market_data.ingest(iso, config.date_from, config.date_to, config.cache_dir)


def run_iso(config: RunConfig, iso: IsoId, out: Path) -> dict:
    entry = {"iso": iso.value, "status": "ok", "stages": {}, "rows": {}}
    stage = "ingest"
    try:
        hourly = load_hourly(config, iso)
        entry["rows"]["hourly.csv"] = _write_csv(hourly[market_data.CANONICAL_COLUMNS].assign(
            timestamp=market_data.format_timestamp(hourly["timestamp"])), out / "hourly.csv")

        stage = "detrend"
        residuals, fit = detrend_stage(hourly, iso.timezone)
        entry["rows"]["residuals.csv"] = _write_csv(
            residuals.assign(timestamp=market_data.format_timestamp(residuals["timestamp"])),
            out / "residuals.csv")
        _write_csv(fit.coefficients_frame(), out / "detrend_coefficients.csv")
        entry["stages"]["detrend"] = {"rank": fit.rank, "n_active_columns": int(fit.active.sum())}

        stage = "volatility"
        volframe, _ = volatility_stage(residuals, config.lam, config.warmup)
        entry["rows"]["volatility.csv"] = _write_csv(
            volframe.assign(timestamp=market_data.format_timestamp(volframe["timestamp"])),
            out / "volatility.csv")

        stage = "qreg"
        for target, taus in (("price", config.taus_price), ("volatility", config.taus_volatility)):
            x, y = regression_pairs(volframe, target, config.warmup)
            entry["stages"][f"qreg_{target}"] = qreg_stage(
                x, y, taus, config.knots, config.degree, config.grid_points, out / f"qreg_{target}")

        stage = "skewt"
        entry["stages"]["skewt"] = skewt_stage(volframe, iso.value, config.grid_points,
                                               config.mc_draws, config.seed, out / "skewt")

        stage = "report"
        entry["stages"]["report"] = report_stage(volframe, iso.value, config.warmup, out,
                                                 untrimmed=config.untrimmed_volatility_summary)
    except Exception as exc:  # stage isolation: record and move on to the next ISO
        logger.error("%s failed in %s: %s", iso.value, stage, exc)
        entry.update(status="failed", failed_stage=stage, error=f"{type(exc).__name__}: {exc}",
                     traceback=traceback.format_exc(limit=5))
    return entry


def run_pipeline(config: RunConfig) -> dict:
    """Run every stage for each configured ISO; returns the manifest."""
    out_root = Path(config.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    entries = [run_iso(config, iso, out_root / iso.value) for iso in config.isos]
    manifest = {
        "config": config.as_dict(),
        "config_sha256": config.digest(),
        "created_at": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "isos": entries,
        "status": "ok" if all(e["status"] == "ok" for e in entries) else "partial_failure",
    }
    _write_json(manifest, out_root / "manifest.json")
    return manifest


def exit_code(manifest: dict) -> int:
    return 0 if manifest["status"] == "ok" else 2
