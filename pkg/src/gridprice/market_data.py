"""Construction of canonical hourly (system price, VRE %) series per ISO.

Raw inputs are per-hub price records (LMP with congestion and loss
components) and per-fuel generation records, read from a local cache laid
out as ``<cache>/<iso>/<yyyy-mm-dd>/<feed>.csv``.  Two record layouts are
understood for each feed: a generic one (documented in the README) and the
native NYISO public CSV layout.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np
import pandas as pd

from .errors import (
    DegenerateIntervalError,
    InsufficientDataError,
    InvalidRecordError,
)

logger = logging.getLogger(__name__)


class IsoId(str, enum.Enum):
    ISONE = "ISONE"
    NYISO = "NYISO"
    PJM = "PJM"
    MISO = "MISO"
    SPP = "SPP"
    CAISO = "CAISO"

    @property
    def resolution_minutes(self) -> int:
        return _RESOLUTION[self]

    @property
    def vre_sources(self) -> frozenset:
        """Fuel categories counted as VRE (wind only where solar is not reported)."""
        if self in (IsoId.NYISO, IsoId.MISO):
            return frozenset({"wind"})
        return frozenset({"solar", "wind"})

    @property
    def timezone(self) -> str:
        return _TIMEZONE[self]

    @classmethod
    def parse(cls, value) -> "IsoId":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(
                f"unknown ISO {value!r}; expected one of {[m.value for m in cls]}"
            ) from None


_RESOLUTION = {
    IsoId.ISONE: 60,
    IsoId.NYISO: 5,
    IsoId.PJM: 60,
    IsoId.MISO: 60,
    IsoId.SPP: 5,
    IsoId.CAISO: 5,
}

# Local clock used for hour-of-day / season / weekend coding.
_TIMEZONE = {
    IsoId.ISONE: "America/New_York",
    IsoId.NYISO: "America/New_York",
    IsoId.PJM: "America/New_York",
    IsoId.MISO: "America/Chicago",
    IsoId.SPP: "America/Chicago",
    IsoId.CAISO: "America/Los_Angeles",
}

# The four NYISO interface zones in the real-time zonal LBMP file.
NYISO_INTERFACE_HUBS = frozenset({"H Q", "NPX", "O H", "PJM"})

# Raw fuel-category labels -> canonical category.  Anything absent maps to its
# own lower-cased label, so plain "Wind"/"Solar" need no entry.
FUEL_ALIASES: dict = {
    IsoId.ISONE: {},
    IsoId.NYISO: {"other renewables": "other_renewables"},
    IsoId.PJM: {"other renewables": "other_renewables"},
    IsoId.MISO: {},
    IsoId.SPP: {
        "wind market": "wind",
        "wind self": "wind",
        "solar market": "solar",
        "solar self": "solar",
    },
    IsoId.CAISO: {"solar pv": "solar", "solar thermal": "solar"},
}


def fuel_category(source: str, iso: IsoId) -> str:
    key = " ".join(str(source).strip().lower().split())
    return FUEL_ALIASES.get(iso, {}).get(key, key)


@dataclass(frozen=True)
class RawPriceRecord:
    timestamp: pd.Timestamp
    hub_id: str
    lmp: float
    mcc: float
    mlc: float
    iso: IsoId

    def __post_init__(self):
        if self.timestamp is None or pd.isna(self.timestamp):
            raise InvalidRecordError("timestamp", self.timestamp)
        if not self.hub_id:
            raise InvalidRecordError("hub_id", self.hub_id)


@dataclass(frozen=True)
class RawGenRecord:
    timestamp: pd.Timestamp
    source: str
    generation: float
    iso: IsoId

    def __post_init__(self):
        if not (math.isfinite(self.generation) and self.generation >= 0):
            raise InvalidRecordError("generation", self.generation)


@dataclass(frozen=True)
class HourlyObservation:
    timestamp: pd.Timestamp
    price: float
    vre_pct: float
    negative_raw_price: bool
    iso: IsoId

    def __post_init__(self):
        ts = pd.Timestamp(self.timestamp)
        if ts.minute or ts.second or ts.microsecond:
            raise InvalidRecordError("timestamp", self.timestamp)
        if not 0.0 <= self.vre_pct <= 100.0:
            raise InvalidRecordError("vre_pct", self.vre_pct)
        if self.negative_raw_price != (self.price < 0):
            raise InvalidRecordError("negative_raw_price", self.negative_raw_price)


def compute_system_price(lmp: float, mcc: float, mlc: float, iso) -> float:
    """Marginal energy cost: LMP - MCC - MLC (NYISO: LBMP + MCC - MLC)."""
    for name, value in (("lmp", lmp), ("mcc", mcc), ("mlc", mlc)):
        if not math.isfinite(value):
            raise InvalidRecordError(name, value)
    if IsoId.parse(iso) is IsoId.NYISO:
        return lmp + mcc - mlc
    return lmp - mcc - mlc


def system_price_array(lmp, mcc, mlc, iso) -> np.ndarray:
    """Vectorised :func:`compute_system_price`; non-finite inputs give NaN."""
    lmp, mcc, mlc = (np.asarray(a, dtype=float) for a in (lmp, mcc, mlc))
    if IsoId.parse(iso) is IsoId.NYISO:
        return lmp + mcc - mlc
    return lmp - mcc - mlc


def compute_vre_pct(gen: Mapping[str, float], iso) -> float:
    iso = IsoId.parse(iso)
    vre = other = 0.0
    for source, mwh in gen.items():
        if not math.isfinite(mwh) or mwh < 0:
            raise InvalidRecordError(f"generation[{source}]", mwh)
        if fuel_category(source, iso) in iso.vre_sources:
            vre += mwh
        else:
            other += mwh
    total = vre + other
    if total <= 0:
        raise DegenerateIntervalError(f"total generation {total} <= 0")
    return 100.0 * (vre / total)


def aggregate_to_hourly(timestamps, values, expected_per_hour: Optional[int] = None) -> pd.DataFrame:
    """Mean-aggregate a sub-hourly series to top-of-hour buckets.

    Returns a frame indexed by hour with columns ``value``, ``count`` and
    ``underfull`` (fewer intervals than ``expected_per_hour``).  Hours with no
    records do not appear.
    """
    ts = pd.DatetimeIndex(pd.to_datetime(timestamps))
    s = pd.Series(np.asarray(values, dtype=float), index=ts)
    s = s[np.isfinite(s.to_numpy())]
    grouped = s.groupby(s.index.floor("h"))
    out = pd.DataFrame({"value": grouped.mean(), "count": grouped.size()})
    out.index.name = "timestamp"
    if expected_per_hour is None:
        out["underfull"] = False
    else:
        out["underfull"] = out["count"] < expected_per_hour
    if len(out) > 1:
        full = pd.date_range(out.index[0], out.index[-1], freq="h")
        n_missing = len(full) - len(out)
        if n_missing:
            logger.info("%d empty hour(s) omitted from hourly aggregate", n_missing)
    n_under = int(out["underfull"].sum())
    if n_under:
        logger.info("%d under-full hour(s) in hourly aggregate", n_under)
    return out


def aggregate_hubs(hub_prices: Mapping[str, float], iso, exclude: Optional[Iterable[str]] = None) -> float:
    """Unweighted mean of hub-level MEC at one timestamp.

    NYISO interface zones are always excluded.  Raises
    :class:`InsufficientDataError` when nothing is left to average.
    """
    iso = IsoId.parse(iso)
    excluded = set(exclude or ())
    if iso is IsoId.NYISO:
        excluded |= NYISO_INTERFACE_HUBS
    kept = [v for hub, v in hub_prices.items() if hub.strip() not in excluded]
    if not kept:
        raise InsufficientDataError("no hub left after exclusions")
    return float(np.mean(kept))


# --- raw feed parsing -----------------------------------------------------

PRICE_FEED = "rt_lmp"
GEN_FEED = "genfuelmix"

_NYISO_PRICE_COLS = {
    "Time Stamp": "timestamp",
    "Name": "hub_id",
    "LBMP ($/MWHr)": "lmp",
    "Marginal Cost Losses ($/MWHr)": "mlc",
    "Marginal Cost Congestion ($/MWHr)": "mcc",
}
_NYISO_GEN_COLS = {
    "Time Stamp": "timestamp",
    "Time Zone": "tz_abbrev",
    "Fuel Category": "source",
    "Gen MW": "generation",
}


def _localize_by_order(naive: pd.Series, tz: str) -> pd.Series:
    """Localise wall-clock stamps, resolving the repeated fall-back hour by file order.

    Rows before the first backwards step in time are read as daylight time,
    rows after it as standard time.
    """
    vals = naive.to_numpy()
    backstep = np.r_[False, vals[1:] < vals[:-1]]
    is_dst = np.cumsum(backstep) == 0
    local = pd.DatetimeIndex(vals).tz_localize(tz, ambiguous=is_dst, nonexistent="shift_forward")
    return pd.Series(local.tz_convert("UTC"), index=naive.index)


def _to_utc(col: pd.Series) -> pd.Series:
    ts = pd.to_datetime(col, utc=True, errors="coerce", format="ISO8601")
    return ts


def read_price_feed(path, iso) -> pd.DataFrame:
    """Parse a raw price file into columns timestamp, hub_id, lmp, mcc, mlc.

    Rows with non-finite fields or empty hub ids are dropped and counted in
    ``frame.attrs['dropped']``.
    """
    iso = IsoId.parse(iso)
    raw = pd.read_csv(path, dtype={"hub_id": str, "Name": str})
    if "Time Stamp" in raw.columns:
        df = raw.rename(columns=_NYISO_PRICE_COLS)[list(_NYISO_PRICE_COLS.values())]
        naive = pd.to_datetime(df["timestamp"], format="%m/%d/%Y %H:%M:%S", errors="coerce")
        df["timestamp"] = _localize_by_order(naive, iso.timezone)
    else:
        df = raw[["timestamp", "hub_id", "lmp", "mcc", "mlc"]].copy()
        df["timestamp"] = _to_utc(df["timestamp"])
    for c in ("lmp", "mcc", "mlc"):
        df[c] = pd.to_numeric(df[c], errors="coerce")
    df["hub_id"] = df["hub_id"].fillna("").astype(str).str.strip()
    ok = (
        df["timestamp"].notna()
        & (df["hub_id"] != "")
        & np.isfinite(df[["lmp", "mcc", "mlc"]].to_numpy()).all(axis=1)
    )
    dropped = int((~ok).sum())
    if dropped:
        logger.warning("%s: dropped %d invalid price record(s)", path, dropped)
    df = df[ok].reset_index(drop=True)
    df.attrs["dropped"] = dropped
    return df


def read_gen_feed(path, iso) -> pd.DataFrame:
    """Parse a raw generation-mix file into columns timestamp, source, generation."""
    iso = IsoId.parse(iso)
    raw = pd.read_csv(path)
    if "Time Stamp" in raw.columns:
        df = raw.rename(columns=_NYISO_GEN_COLS)
        naive = pd.to_datetime(df["timestamp"], format="%m/%d/%Y %H:%M:%S", errors="coerce")
        if "tz_abbrev" in df.columns:
            is_dst = (df["tz_abbrev"].astype(str).str.upper() == "EDT").to_numpy()
            local = pd.DatetimeIndex(naive).tz_localize(
                iso.timezone, ambiguous=is_dst, nonexistent="shift_forward"
            )
            df["timestamp"] = pd.Series(local.tz_convert("UTC"), index=df.index)
        else:
            df["timestamp"] = _localize_by_order(naive, iso.timezone)
        df = df[["timestamp", "source", "generation"]].copy()
    else:
        df = raw[["timestamp", "source", "generation"]].copy()
        df["timestamp"] = _to_utc(df["timestamp"])
    df["generation"] = pd.to_numeric(df["generation"], errors="coerce")
    g = df["generation"].to_numpy()
    ok = df["timestamp"].notna() & np.isfinite(g) & (g >= 0)
    dropped = int((~ok).sum())
    if dropped:
        logger.warning("%s: dropped %d invalid generation record(s)", path, dropped)
    df = df[ok].reset_index(drop=True)
    df.attrs["dropped"] = dropped
    return df


def system_prices(prices: pd.DataFrame, iso, exclude: Optional[Iterable[str]] = None) -> pd.Series:
    """Per-timestamp system price from per-hub raw price records."""
    iso = IsoId.parse(iso)
    df = prices.copy()
    df["mec"] = system_price_array(df["lmp"], df["mcc"], df["mlc"], iso)
    excluded = set(exclude or ())
    if iso is IsoId.NYISO:
        excluded |= NYISO_INTERFACE_HUBS
    keep = ~df["hub_id"].isin(excluded)
    all_ts = df["timestamp"].unique()
    out = df[keep].groupby("timestamp")["mec"].mean()
    n_lost = len(all_ts) - len(out)
    if n_lost:
        logger.warning("%d timestamp(s) had no hub left after exclusions", n_lost)
    return out.sort_index()


def vre_percentages(gen: pd.DataFrame, iso) -> pd.DataFrame:
    """Hourly VRE share from raw generation records.

    Records sharing (timestamp, source) are summed (e.g. per-hub renewables),
    each source is mean-aggregated to the hour, and the share is taken of the
    hourly mean energy.  Hours with zero total generation are dropped.
    """
    iso = IsoId.parse(iso)
    df = gen.copy()
    df["category"] = df["source"].map(lambda s: fuel_category(s, iso))
    df["is_vre"] = df["category"].isin(iso.vre_sources)
    per_ts = df.groupby(["timestamp", "source"], sort=True)["generation"].sum().reset_index()
    per_ts["hour"] = per_ts["timestamp"].dt.floor("h")
    hourly_src = per_ts.groupby(["hour", "source"])["generation"].mean().unstack(fill_value=0.0)
    vre_cols = [c for c in hourly_src.columns if fuel_category(c, iso) in iso.vre_sources]
    total = hourly_src.sum(axis=1)
    vre = hourly_src[vre_cols].sum(axis=1) if vre_cols else total * 0.0
    bad = total <= 0
    if bad.any():
        logger.warning("dropped %d hour(s) with non-positive total generation", int(bad.sum()))
    pct = (100.0 * vre[~bad] / total[~bad]).clip(0.0, 100.0)
    out = pd.DataFrame({"vre_pct": pct})
    out.index.name = "timestamp"
    return out


def build_hourly(prices: pd.DataFrame, gen: pd.DataFrame, iso,
                 exclude_hubs: Optional[Iterable[str]] = None) -> pd.DataFrame:
    """Join hourly system price and VRE share into the canonical frame."""
    iso = IsoId.parse(iso)
    sp = system_prices(prices, iso, exclude=exclude_hubs)
    hourly_price = aggregate_to_hourly(
        sp.index, sp.to_numpy(), expected_per_hour=60 // iso.resolution_minutes
    )
    vre = vre_percentages(gen, iso)
    joined = hourly_price[["value"]].join(vre, how="inner")
    n_unpaired = len(hourly_price) + len(vre) - 2 * len(joined)
    if n_unpaired:
        logger.info("%d hour(s) lacked either price or generation data", n_unpaired)
    return canonical_frame(joined.index, joined["value"].to_numpy(), joined["vre_pct"].to_numpy())


def canonical_frame(timestamps, price, vre_pct) -> pd.DataFrame:
    ts = pd.DatetimeIndex(pd.to_datetime(timestamps, utc=True))
    price = np.asarray(price, dtype=float)
    df = pd.DataFrame(
        {
            "timestamp": ts,
            "price_usd_mwh": price,
            "vre_pct": np.asarray(vre_pct, dtype=float),
            "negative_raw_price": price < 0,
        }
    )
    return df.sort_values("timestamp", kind="mergesort").reset_index(drop=True)


def to_observations(frame: pd.DataFrame, iso) -> list:
    iso = IsoId.parse(iso)
    return [
        HourlyObservation(r.timestamp, float(r.price_usd_mwh), float(r.vre_pct),
                          bool(r.negative_raw_price), iso)
        for r in frame.itertuples(index=False)
    ]


# --- cache layout and canonical CSV --------------------------------------

def cache_path(cache_dir, iso, day: date, feed: str, ext: str = "csv") -> Path:
    return Path(cache_dir) / IsoId.parse(iso).value / day.isoformat() / f"{feed}.{ext}"


def _days(start: date, end: date):
    d = start
    while d <= end:
        yield d
        d += timedelta(days=1)


def ingest(iso, start: date, end: date, cache_dir) -> pd.DataFrame:
    """Build the canonical hourly frame for ``iso`` from cached raw files."""
    iso = IsoId.parse(iso)
    price_parts, gen_parts = [], []
    for day in _days(start, end):
        p = cache_path(cache_dir, iso, day, PRICE_FEED)
        g = cache_path(cache_dir, iso, day, GEN_FEED)
        if not (p.exists() and g.exists()):
            logger.info("%s %s: raw files missing, day skipped", iso.value, day)
            continue
        price_parts.append(read_price_feed(p, iso))
        gen_parts.append(read_gen_feed(g, iso))
    if not price_parts:
        raise InsufficientDataError(f"no cached data for {iso.value} in {start}..{end}")
    prices = pd.concat(price_parts, ignore_index=True)
    gen = pd.concat(gen_parts, ignore_index=True)
    return build_hourly(prices, gen, iso)


CANONICAL_COLUMNS = ["timestamp", "price_usd_mwh", "vre_pct", "negative_raw_price"]


def format_timestamp(ts: pd.Series) -> pd.Series:
    return pd.to_datetime(ts, utc=True).dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def write_frame_csv(frame: pd.DataFrame, path) -> None:
    """Write a frame whose first column is a UTC timestamp.

    Floats are written with ``repr`` (shortest round-trip form), booleans as
    ``true``/``false``.
    """
    out = frame.copy()
    out["timestamp"] = format_timestamp(out["timestamp"])
    for c in out.columns:
        if out[c].dtype == bool:
            out[c] = np.where(out[c], "true", "false")
        elif pd.api.types.is_float_dtype(out[c]):
            out[c] = [repr(float(v)) for v in out[c]]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    out.to_csv(path, index=False, lineterminator="\n")


def read_frame_csv(path) -> pd.DataFrame:
    df = pd.read_csv(path, float_precision="round_trip", keep_default_na=True)
    df["timestamp"] = pd.to_datetime(df["timestamp"], utc=True, format="%Y-%m-%dT%H:%M:%SZ")
    for c in df.columns:
        if df[c].dtype == object and set(df[c].dropna().unique()) <= {"true", "false"}:
            df[c] = df[c] == "true"
    return df


def write_hourly_csv(frame: pd.DataFrame, path) -> None:
    write_frame_csv(frame[CANONICAL_COLUMNS], path)


def read_hourly_csv(path) -> pd.DataFrame:
    df = read_frame_csv(path)
    missing = [c for c in CANONICAL_COLUMNS if c not in df.columns]
    if missing:
        raise InvalidRecordError("header", ",".join(missing))
    return df


def parse_date(value) -> date:
    if isinstance(value, date):
        return value
    return datetime.strptime(str(value), "%Y-%m-%d").date()
