"""Summary statistics and frequency checks over hourly series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import InsufficientDataError

PRICE_CAP = 1000.0
VRE_BIN_WIDTH = 5.0


@dataclass
class SummaryRow:
    iso: str
    variable: str
    min: float
    median: float
    max: float
    mean: float
    sd: float


def descriptive_stats(values) -> dict:
    """min, median, max, mean and sample standard deviation (n - 1)."""
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        raise InsufficientDataError("descriptive statistics of an empty series")
    spread = a.size > 1 and np.ptp(a) > 0  # exact zero for constant input
    return {
        "min": float(np.min(a)),
        "median": float(np.median(a)),
        "max": float(np.max(a)),
        "mean": float(np.mean(a)),
        "sd": float(np.std(a, ddof=1)) if spread else 0.0,
    }


def summary_rows(iso: str, columns: dict) -> list:
    return [SummaryRow(iso, name, **descriptive_stats(vals)) for name, vals in columns.items()]


def threshold_frequency(prices, threshold: float = PRICE_CAP) -> float:
    """Fraction of prices at or above ``threshold``."""
    a = np.asarray(prices, dtype=float)
    if a.size == 0:
        raise InsufficientDataError("threshold frequency of an empty series")
    return float(np.count_nonzero(a >= threshold) / a.size)


def negative_price_frequency(prices, vre_pct, width: float = VRE_BIN_WIDTH):
    """Overall share of negative raw prices and the share within VRE bins.

    Bins are right-closed, ``(lo, lo + width]``, with the first bin also
    holding VRE = 0.  Returns ``(overall_fraction, table)``.
    """
    p = np.asarray(prices, dtype=float)
    v = np.asarray(vre_pct, dtype=float)
    if p.size == 0:
        raise InsufficientDataError("negative-price frequency of an empty series")
    if p.shape != v.shape:
        raise ValueError("prices and VRE differ in length")
    edges = np.arange(0.0, 100.0 + width, width)
    idx = np.clip(np.ceil(v / width).astype(int) - 1, 0, len(edges) - 2)
    neg = p < 0
    n = np.bincount(idx, minlength=len(edges) - 1)
    k = np.bincount(idx, weights=neg, minlength=len(edges) - 1)
    used = n > 0
    table = pd.DataFrame({
        "vre_lower": edges[:-1][used],
        "vre_upper": edges[1:][used],
        "n": n[used],
        "n_negative": k[used].astype(int),
        "fraction": k[used] / n[used],
    })
    return float(neg.mean()), table
