"""Hourly electricity price and VRE-penetration analytics for US ISOs."""

from .detrend import DetrendFit, build_design, fit_detrend, predict_trend, season_of
from .market_data import (
    HourlyObservation,
    IsoId,
    RawGenRecord,
    RawPriceRecord,
    aggregate_hubs,
    aggregate_to_hourly,
    compute_system_price,
    compute_vre_pct,
)
from .quantile_regression import (
    QuantileFit,
    fit_quantile,
    pinball_loss,
    predict_quantile,
    quantile_derivative,
)
from .report import descriptive_stats, negative_price_frequency, threshold_frequency
from .skew_t import (
    SkewTGlmFit,
    SkewTParams,
    fit_skewt_glm,
    quantile_differences,
    skewness_curve,
    st_cdf,
    st_density,
    st_quantile,
)
from .spline_basis import BSplineSpec, eval_basis, eval_basis_derivative, make_spec
from .volatility import EwmsdSeries, align_volatility, ewmsd

__version__ = "0.1.0"
