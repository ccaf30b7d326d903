"""Synthetic hourly price / VRE data with a known seasonal pattern.

Used by the test-suite and for demonstrating the pipeline without ISO data.
"""

from __future__ import annotations

from datetime import date, timedelta

import numpy as np
import pandas as pd

from .market_data import GEN_FEED, PRICE_FEED, IsoId, cache_path, canonical_frame
from .skew_t import link_params, st_sample

# skew-t coefficients used for the noise (CAISO-like magnitudes)
NOISE_BETA = np.array([-6.68, -7.96, 2.14, 0.32, -1.61, 0.59])


def seasonal_pattern(local: pd.DatetimeIndex) -> np.ndarray:
    hour = np.asarray(local.hour)
    month = np.asarray(local.month)
    season = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 0])[month]
    amp = np.array([8.0, 5.0, 14.0, 6.0])[season]
    level = np.array([38.0, 30.0, 42.0, 33.0])[season]
    diurnal = amp * np.sin(2 * np.pi * (hour - 9) / 24.0) + 4.0 * (hour >= 17) * (hour <= 20)
    weekend = np.asarray(local.dayofweek) >= 5
    return level + diurnal - 4.0 * weekend


def synthetic_vre(rng: np.random.Generator, local: pd.DatetimeIndex, max_pct: float = 38.5) -> np.ndarray:
    n = len(local)
    hour = np.asarray(local.hour)
    solar = np.clip(np.sin(np.pi * (hour - 6) / 12.0), 0, None) * 12.0
    wind = np.empty(n)
    w = 5.0
    shocks = rng.normal(0.0, 1.2, n)
    for i in range(n):
        w = 0.97 * w + 0.03 * 6.0 + shocks[i]
        wind[i] = w
    return np.clip(solar + np.clip(wind, 0, None), 0.0, max_pct)


def synthetic_hourly(iso="CAISO", start: date = date(2018, 1, 1), days: int = 730,
                     seed: int = 0, noise_beta=NOISE_BETA) -> pd.DataFrame:
    """Canonical hourly frame: seasonal pattern + skew-t noise depending on VRE."""
    iso = IsoId.parse(iso)
    rng = np.random.default_rng(seed)
    utc = pd.date_range(pd.Timestamp(start, tz=iso.timezone).tz_convert("UTC"),
                        periods=24 * days, freq="h")
    local = utc.tz_convert(iso.timezone)
    vre = synthetic_vre(rng, local)
    mu, sigma, nu, tail = link_params(noise_beta, vre)
    noise = st_sample(rng, len(utc), mu=mu, sigma=sigma, nu=nu, tail=tail)
    price = seasonal_pattern(local) + noise
    return canonical_frame(utc, price, vre)


def write_raw_day(cache_dir, iso, day: date, seed: int = 0, hubs=("HUB_A", "HUB_B"),
                  minutes: int = None) -> None:
    """Write generic-layout raw price and generation files for one day."""
    iso = IsoId.parse(iso)
    rng = np.random.default_rng(seed)
    step = minutes or iso.resolution_minutes
    local_start = pd.Timestamp(day, tz=iso.timezone)
    local_end = pd.Timestamp(day + timedelta(days=1), tz=iso.timezone)
    stamps = pd.date_range(local_start, local_end, freq=f"{step}min", inclusive="left").tz_convert("UTC")
    ts_text = stamps.strftime("%Y-%m-%dT%H:%M:%SZ")

    rows = []
    for hub in hubs:
        lmp = 40 + 10 * rng.standard_normal(len(stamps))
        mcc = rng.normal(0, 2, len(stamps))
        mlc = rng.normal(0, 1, len(stamps))
        rows.append(pd.DataFrame({"timestamp": ts_text, "hub_id": hub, "lmp": lmp, "mcc": mcc, "mlc": mlc}))
    p = cache_path(cache_dir, iso, day, PRICE_FEED)
    p.parent.mkdir(parents=True, exist_ok=True)
    pd.concat(rows).to_csv(p, index=False)

    gens = []
    for source, base in (("Wind", 300.0), ("Solar", 200.0), ("Natural Gas", 1500.0), ("Nuclear", 800.0)):
        gens.append(pd.DataFrame({"timestamp": ts_text, "source": source,
                                  "generation": base * rng.uniform(0.2, 1.0, len(stamps))}))
    pd.concat(gens).to_csv(cache_path(cache_dir, iso, day, GEN_FEED), index=False)
