"""Temporal price volatility as an exponentially weighted moving standard deviation."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.signal import lfilter

from .errors import InvalidParameterError

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA = 0.94
DEFAULT_WARMUP = 50


@dataclass
class EwmsdSeries:
    sigma: np.ndarray
    lam: float
    warmup: int = DEFAULT_WARMUP
    timestamps: object = None

    def __len__(self):
        return len(self.sigma)


def _check_lambda(lam):
    if not (0.0 < lam < 1.0):
        raise InvalidParameterError(f"decay weight must lie in (0, 1), got {lam}")


def ewmsd_variance(residuals, lam: float = DEFAULT_LAMBDA, form: str = "geometric") -> np.ndarray:
    """Exponentially weighted variance of ``residuals`` around zero.

    ``form="geometric"`` is the RiskMetrics recursion
    ``s2[i] = lam * s2[i-1] + (1 - lam) * u[i]**2`` started at ``s2[0] = u[0]**2``.

    ``form="lag_squared"`` uses weight ``(1 - lam)`` on the current hour and
    ``(1 - lam) * lam**(k + 1)`` on lag ``k >= 1`` (so ``lam**2`` on lag one),
    with an initial term ``lam**(i + 1) * u[0]**2``.  Kept for comparison only;
    its weights do not sum to one.
    """
    _check_lambda(lam)
    u2 = np.square(np.asarray(residuals, dtype=float))
    if u2.size == 0:
        return u2
    if form == "geometric":
        # zi makes the first output equal u2[0]
        out, _ = lfilter([1.0 - lam], [1.0, -lam], u2, zi=[lam * u2[0]])
        return out
    if form == "lag_squared":
        geo_lag, _ = lfilter([1.0 - lam], [1.0, -lam], u2, zi=[lam * u2[0]])
        out = (1.0 - lam) * u2
        # geo_lag[i-1] already carries weights (1-lam) lam^(k-1) on lag k >= 1
        out[1:] += lam**2 * geo_lag[:-1]
        return out
    raise InvalidParameterError(f"unknown EWMSD form {form!r}")


def ewmsd(residuals, lam: float = DEFAULT_LAMBDA, warmup: int = DEFAULT_WARMUP,
          timestamps=None, form: str = "geometric") -> EwmsdSeries:
    """Hour-by-hour EWMSD (USD) of a detrended price series."""
    var = ewmsd_variance(residuals, lam, form=form)
    return EwmsdSeries(sigma=np.sqrt(np.maximum(var, 0.0)), lam=lam, warmup=warmup,
                       timestamps=timestamps)


def align_volatility(vol: EwmsdSeries, timestamps, vre) -> pd.DataFrame:
    """Pair VRE % with EWMSD by timestamp after discarding the warm-up hours.

    The warm-up is the first ``vol.warmup`` entries of the volatility series
    itself.  Returns columns ``timestamp``, ``vre_pct``, ``ewmsd_usd``.
    """
    if vol.timestamps is None:
        raise InvalidParameterError("volatility series carries no timestamps")
    v = pd.DataFrame({"timestamp": pd.to_datetime(vol.timestamps), "ewmsd_usd": vol.sigma})
    v = v.iloc[vol.warmup:]
    x = pd.DataFrame({"timestamp": pd.to_datetime(timestamps), "vre_pct": np.asarray(vre, dtype=float)})
    out = x.merge(v, on="timestamp", how="inner", sort=True)
    if out.empty:
        warnings.warn("no overlapping timestamps after warm-up exclusion", RuntimeWarning, stacklevel=2)
    return out[["timestamp", "vre_pct", "ewmsd_usd"]].reset_index(drop=True)
