"""Removal of the expected hour-of-day / season / weekend price pattern.

The trend model is a saturated categorical regression: intercept, 23 hour
dummies, 3 season dummies, their 69 interactions and a weekend dummy, with
hour 0, Winter and weekday as reference levels.  Residuals of the
least-squares fit are the detrended price.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.linalg

from .errors import InsufficientDataError, InvalidParameterError

logger = logging.getLogger(__name__)

SEASONS = ("Winter", "Spring", "Summer", "Autumn")
_MONTH_TO_SEASON = np.array([-1, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 0])

N_HOURS = 24
N_COLUMNS = 1 + (N_HOURS - 1) + (len(SEASONS) - 1) * N_HOURS + 1


def season_of(month: int) -> str:
    if not isinstance(month, (int, np.integer)) or not 1 <= month <= 12:
        raise InvalidParameterError(f"month must be an integer in 1..12, got {month!r}")
    return SEASONS[_MONTH_TO_SEASON[month]]


def design_columns() -> list:
    cols = ["intercept"]
    cols += [f"hour[{h}]" for h in range(1, N_HOURS)]
    cols += [f"season[{s}]" for s in SEASONS[1:]]
    cols += [f"hour[{h}]:season[{s}]" for s in SEASONS[1:] for h in range(1, N_HOURS)]
    cols.append("weekend")
    return cols


COLUMNS = tuple(design_columns())
assert len(COLUMNS) == N_COLUMNS == 97


def _localize(timestamps, tz):
    ts = pd.DatetimeIndex(pd.to_datetime(timestamps))
    if tz is not None:
        if ts.tz is None:
            ts = ts.tz_localize("UTC")
        ts = ts.tz_convert(tz)
    return ts


def _cell_codes(ts: pd.DatetimeIndex):
    hour = np.asarray(ts.hour, dtype=np.intp)
    season = _MONTH_TO_SEASON[np.asarray(ts.month, dtype=np.intp)]
    weekend = np.asarray(ts.dayofweek, dtype=np.intp) >= 5
    return hour, season, weekend


def build_design(timestamps, tz=None) -> np.ndarray:
    """Rows of the 97-column seasonal design, one per timestamp.

    Timestamps are read on their own clock unless ``tz`` is given, in which
    case they are converted first (naive stamps are taken as UTC).
    """
    ts = _localize(timestamps, tz)
    hour, season, weekend = _cell_codes(ts)
    n = len(ts)
    X = np.zeros((n, N_COLUMNS))
    rows = np.arange(n)
    X[:, 0] = 1.0
    h = hour > 0
    X[rows[h], hour[h]] = 1.0
    s = season > 0
    X[rows[s], N_HOURS - 1 + season[s]] = 1.0
    hs = h & s
    base = N_HOURS - 1 + len(SEASONS)
    X[rows[hs], base + (season[hs] - 1) * (N_HOURS - 1) + (hour[hs] - 1)] = 1.0
    X[:, -1] = weekend
    return X


@dataclass
class DetrendFit:
    coef: np.ndarray
    active: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    cell_counts: np.ndarray  # (24 hours, 4 seasons)
    weekend_levels: tuple
    rank: int
    tz: object = None
    columns: tuple = field(default=COLUMNS)

    @property
    def hour_effects(self):
        return self.coef[1:N_HOURS]

    @property
    def season_effects(self):
        return self.coef[N_HOURS:N_HOURS + 3]

    @property
    def interaction_effects(self):
        return self.coef[N_HOURS + 3:-1].reshape(3, N_HOURS - 1)

    @property
    def weekend_effect(self):
        return self.coef[-1]

    def coefficients_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"term": list(self.columns), "estimate": self.coef, "active": self.active})


def fit_detrend(timestamps, prices, tz=None) -> DetrendFit:
    """Least-squares fit of the seasonal pattern via complete orthogonal factorisation.

    Columns with no support in the sample (e.g. hour x season cells absent
    from a short series) are dropped with a warning and reported as zero.
    """
    y = np.asarray(prices, dtype=float)
    ts = _localize(timestamps, tz)
    if len(y) != len(ts):
        raise InvalidParameterError("timestamps and prices differ in length")
    if len(y) < 2:
        raise InsufficientDataError("detrending needs at least 2 observations")
    if not np.all(np.isfinite(y)):
        raise InvalidParameterError("prices must be finite")

    X = build_design(ts)
    hour, season, weekend = _cell_codes(ts)
    counts = np.zeros((N_HOURS, len(SEASONS)), dtype=int)
    np.add.at(counts, (hour, season), 1)

    active = np.any(X != 0, axis=0)
    if not active.all():
        dropped = [c for c, a in zip(COLUMNS, active) if not a]
        warnings.warn(
            f"dropping {len(dropped)} design column(s) with no observations: "
            + ", ".join(dropped[:6]) + (" ..." if len(dropped) > 6 else ""),
            RuntimeWarning,
            stacklevel=2,
        )
    Xa = X[:, active]
    beta, _, rank, _ = scipy.linalg.lstsq(Xa, y, lapack_driver="gelsy")
    if rank < Xa.shape[1]:
        warnings.warn(
            f"seasonal design is rank deficient ({rank} < {Xa.shape[1]}); "
            "using the minimum-norm solution",
            RuntimeWarning,
            stacklevel=2,
        )
    coef = np.zeros(N_COLUMNS)
    coef[active] = beta
    fitted = Xa @ beta
    return DetrendFit(
        coef=coef,
        active=active,
        residuals=y - fitted,
        fitted=fitted,
        cell_counts=counts,
        weekend_levels=tuple(sorted({bool(w) for w in weekend})),
        rank=int(rank),
        tz=tz,
    )


def predict_trend(fit: DetrendFit, timestamps) -> np.ndarray:
    """Expected price at each timestamp under the fitted pattern.

    Cells the fit never saw get the additive main-effects estimate (their
    interaction term is zero) and trigger a warning.
    """
    scalar = np.ndim(timestamps) == 0
    ts = _localize([timestamps] if scalar else timestamps, fit.tz)
    hour, season, weekend = _cell_codes(ts)
    uncovered = fit.cell_counts[hour, season] == 0
    uncovered |= ~np.isin(weekend, fit.weekend_levels)
    if uncovered.any():
        warnings.warn(
            f"{int(uncovered.sum())} timestamp(s) fall in cells absent from the fit; "
            "extrapolating from main effects",
            RuntimeWarning,
            stacklevel=2,
        )
    out = build_design(ts) @ fit.coef
    return float(out[0]) if scalar else out


def detrend_frame(frame: pd.DataFrame, tz=None) -> tuple:
    """Append ``trend`` and ``detrended_price`` to a canonical hourly frame."""
    fit = fit_detrend(frame["timestamp"], frame["price_usd_mwh"].to_numpy(), tz=tz)
    out = frame.copy()
    out["detrended_price"] = fit.residuals
    out["trend"] = fit.fitted
    return out, fit
