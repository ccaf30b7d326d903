"""Fernandez-Steel skew-t distribution and its regression on VRE share.

Parameterisation ``ST(mu, sigma, nu, tail)`` with ``z = (y - mu) / sigma``::

    f(y) = 2 nu / (sigma (1 + nu**2)) * g(nu z)   if z < 0
                                      * g(z / nu)  if z >= 0

where ``g`` is the Student-t density with ``tail`` degrees of freedom.
``nu = 1`` is symmetric and ``nu > 1`` skews right.

The regression links are ``mu = b0_mu + b1_mu x/100``,
``log nu = b0_nu + b1_nu x/100``, ``log sigma = b0_sigma`` and
``log tail = b0_tail`` with ``x`` the VRE percentage.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, stats
from scipy.special import digamma

from .errors import FitError, InfiniteQuantileError, InsufficientDataError, InvalidParameterError

logger = logging.getLogger(__name__)

PARAM_NAMES = ("b0_mu", "b1_mu", "b0_sigma", "b0_nu", "b1_nu", "b0_tail")
PARAM_LABELS = {
    "b0_mu": "centrality intercept",
    "b1_mu": "change in centrality for a change in VRE",
    "b0_sigma": "log-scale estimate",
    "b0_nu": "skewness intercept",
    "b1_nu": "change in skewness for a change in VRE",
    "b0_tail": "log-tail index estimate",
}
MC_SEED = 20240701
MC_DRAWS = 1000
QUANTILE_PAIRS = ((0.75, 0.25), (0.75, 0.50), (0.90, 0.50))
Z95 = stats.norm.ppf(0.975)


@dataclass(frozen=True)
class SkewTParams:
    mu: float
    sigma: float
    nu: float
    tail: float

    def __post_init__(self):
        _check_params(self.sigma, self.nu, self.tail)


def _check_params(sigma, nu, tail):
    for name, v in (("sigma", sigma), ("nu", nu), ("tail", tail)):
        a = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise InvalidParameterError(f"{name} must be finite and > 0")


def _unpack(p, mu, sigma, nu, tail):
    if p is not None:
        return p.mu, p.sigma, p.nu, p.tail
    _check_params(sigma, nu, tail)
    return mu, sigma, nu, tail


def st_logpdf(y, p: SkewTParams = None, *, mu=None, sigma=None, nu=None, tail=None):
    """Log density; parameters may be given as a :class:`SkewTParams` or as arrays."""
    mu, sigma, nu, tail = _unpack(p, mu, sigma, nu, tail)
    y = np.asarray(y, dtype=float)
    z = (y - mu) / sigma
    w = np.where(z < 0, z * nu, z / nu)
    return (np.log(2.0) + np.log(nu) - np.log(sigma) - np.log1p(nu * nu)
            + stats.t.logpdf(w, tail))


def st_density(y, p: SkewTParams = None, **kw):
    out = np.exp(st_logpdf(y, p, **kw))
    return float(out) if out.ndim == 0 else out


def st_cdf(y, p: SkewTParams = None, *, mu=None, sigma=None, nu=None, tail=None):
    mu, sigma, nu, tail = _unpack(p, mu, sigma, nu, tail)
    z = (np.asarray(y, dtype=float) - mu) / sigma
    nu2 = nu * nu
    left = 2.0 / (1.0 + nu2) * stats.t.cdf(z * nu, tail)
    # upper branch written via the survival function to keep precision near 1
    right = 1.0 - 2.0 * nu2 / (1.0 + nu2) * stats.t.sf(z / nu, tail)
    out = np.where(z < 0, left, right)
    return float(out) if out.ndim == 0 else out


def st_quantile(prob, p: SkewTParams = None, *, mu=None, sigma=None, nu=None, tail=None):
    """Inverse CDF by branch-wise inversion of the Student-t quantile.

    Values whose round trip misses by more than 1e-10 are polished by
    bracketed root finding.
    """
    mu, sigma, nu, tail = _unpack(p, mu, sigma, nu, tail)
    prob = np.asarray(prob, dtype=float)
    if np.any((prob <= 0) | (prob >= 1)) or not np.all(np.isfinite(prob)):
        raise InfiniteQuantileError("quantile is infinite outside the open interval (0, 1)")
    scalar = prob.ndim == 0 and all(np.ndim(a) == 0 for a in (mu, sigma, nu, tail))
    mu, sigma, nu, tail, prob = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(a, dtype=float)) for a in (mu, sigma, nu, tail, prob)))
    nu2 = nu * nu
    split = 1.0 / (1.0 + nu2)
    low = prob < split
    z = np.empty(prob.shape)
    z[low] = stats.t.ppf(prob[low] * (1.0 + nu2[low]) / 2.0, tail[low]) / nu[low]
    hi = ~low
    upper_tail = (1.0 - prob[hi]) * (1.0 + nu2[hi]) / (2.0 * nu2[hi])
    z[hi] = nu[hi] * stats.t.isf(upper_tail, tail[hi])
    q = mu + sigma * z

    resid = np.abs(st_cdf(q, mu=mu, sigma=sigma, nu=nu, tail=tail) - prob)
    for idx in zip(*np.nonzero(resid > 1e-10)):
        args = dict(mu=mu[idx], sigma=sigma[idx], nu=nu[idx], tail=tail[idx])
        f = lambda v: st_cdf(v, **args) - prob[idx]
        a = b = q[idx]
        step = sigma[idx]
        while f(a) > 0:
            a -= step
            step *= 2
        step = sigma[idx]
        while f(b) < 0:
            b += step
            step *= 2
        q[idx] = optimize.brentq(f, a, b, xtol=1e-14 * max(1.0, abs(q[idx])), rtol=4e-16, maxiter=500)
    return float(q[0]) if scalar else q


def st_sample(rng: np.random.Generator, size, *, mu, sigma, nu, tail) -> np.ndarray:
    """Draw by choosing a half with probability 1/(1+nu^2) vs nu^2/(1+nu^2)."""
    _check_params(sigma, nu, tail)
    t_abs = np.abs(rng.standard_t(tail, size=size))
    nu = np.broadcast_to(np.asarray(nu, dtype=float), t_abs.shape)
    left = rng.random(size=t_abs.shape) < 1.0 / (1.0 + nu * nu)
    z = np.where(left, -t_abs / nu, t_abs * nu)
    return mu + sigma * z


# --- regression -------------------------------------------------------------

def link_params(beta, x):
    """Pointwise ``(mu, sigma, nu, tail)`` for VRE percentages ``x``."""
    b0m, b1m, b0s, b0n, b1n, b0t = beta
    s = np.asarray(x, dtype=float) / 100.0
    return b0m + b1m * s, np.exp(b0s), np.exp(b0n + b1n * s), np.exp(b0t)


def loglik_terms(beta, y, x):
    mu, sigma, nu, tail = link_params(beta, x)
    return st_logpdf(y, mu=mu, sigma=sigma, nu=nu, tail=tail)


def loglik(beta, y, x) -> float:
    return float(np.sum(loglik_terms(beta, y, x)))


def score(beta, y, x) -> np.ndarray:
    """Analytic gradient of the total log-likelihood with respect to ``beta``."""
    b0m, b1m, b0s, b0n, b1n, b0t = beta
    y = np.asarray(y, dtype=float)
    s = np.asarray(x, dtype=float) / 100.0
    mu = b0m + b1m * s
    eta = b0n + b1n * s
    sigma = np.exp(b0s)
    tail = np.exp(b0t)
    z = (y - mu) / sigma
    k = np.where(z < 0, 1.0, -1.0)
    scale = np.exp(k * eta)
    w = z * scale
    dldw = -(tail + 1.0) * w / (tail + w * w)

    d_mu = dldw * (-scale / sigma)
    d_logsigma = -1.0 - dldw * w
    d_eta = 1.0 - 2.0 / (1.0 + np.exp(-2.0 * eta)) + dldw * k * w
    w2 = w * w
    d_tail = (0.5 * digamma((tail + 1.0) / 2.0) - 0.5 * digamma(tail / 2.0) - 0.5 / tail
              - 0.5 * np.log1p(w2 / tail) + (tail + 1.0) * w2 / (2.0 * tail * (tail + w2)))
    d_logtail = tail * d_tail
    return np.array([
        d_mu.sum(), (d_mu * s).sum(), d_logsigma.sum(),
        d_eta.sum(), (d_eta * s).sum(), d_logtail.sum(),
    ])


def numerical_hessian(beta, y, x, h: float = 1e-5) -> np.ndarray:
    """Central differences of the analytic score, symmetrised."""
    beta = np.asarray(beta, dtype=float)
    k = len(beta)
    H = np.empty((k, k))
    for j in range(k):
        e = np.zeros(k)
        e[j] = h * max(1.0, abs(beta[j]))
        H[:, j] = (score(beta + e, y, x) - score(beta - e, y, x)) / (2 * e[j])
    return 0.5 * (H + H.T)


@dataclass
class SkewTGlmFit:
    beta: np.ndarray
    std_errors: np.ndarray
    cov: np.ndarray
    loglik: float
    n_obs: int
    converged: bool
    grad_norm: float
    start: str
    trace: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(zip(PARAM_NAMES, (float(b) for b in self.beta)))

    def params_at(self, x):
        return link_params(self.beta, x)

    def table_rows(self) -> list:
        return [
            {"parameter": name, "label": PARAM_LABELS[name],
             "estimate": float(b), "std_error": float(se)}
            for name, b, se in zip(PARAM_NAMES, self.beta, self.std_errors)
        ]


def _starts(y, x):
    med = float(np.median(y))
    q25, q75 = np.quantile(y, [0.25, 0.75])
    iqr = max(float(q75 - q25), 1e-6 * max(1.0, float(np.std(y))), 1e-12)
    # Bowley skewness mapped to a rough nu: (nu^2 - 1)/(nu^2 + 1) has the same sign
    bowley = float((q75 + q25 - 2 * med) / iqr)
    bowley = float(np.clip(bowley, -0.8, 0.8))
    nu0 = np.sqrt((1 + bowley) / (1 - bowley))
    return {
        "moment": np.array([med, 0.0, np.log(iqr / 1.35), np.log(nu0), 0.0, np.log(5.0)]),
        "symmetric_t": np.array([med, 0.0, np.log(iqr / 2.0), 0.0, 0.0, np.log(4.0)]),
        "heavy_tail": np.array([med, 0.0, np.log(iqr / 4.0), np.log(nu0), 0.0, np.log(1.2)]),
    }


def _newton_polish(beta, y, x, tol, max_iter=20):
    """Damped Newton steps on the score to drive it below ``tol``."""
    ll = loglik(beta, y, x)
    for _ in range(max_iter):
        g = score(beta, y, x)
        if np.max(np.abs(g)) <= tol:
            break
        H = numerical_hessian(beta, y, x)
        try:
            step = np.linalg.solve(-H, g)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while t > 1e-6:
            cand = beta + t * step
            ll_c = loglik(cand, y, x)
            if np.isfinite(ll_c) and ll_c >= ll - 1e-9 * abs(ll):
                beta, ll = cand, ll_c
                break
            t *= 0.5
        else:
            break
    return beta


def fit_skewt_glm(residuals, vre, min_obs: int = 100, grad_tol: float = 1e-6) -> SkewTGlmFit:
    """Maximum likelihood for the six link coefficients.

    BFGS on the mean negative log-likelihood from three deterministic starts
    (moment-based, symmetric-t, heavy-tailed), then Newton polishing.  A start
    counts as converged when the score's max-norm is at most ``grad_tol * n``.
    Standard errors come from the inverse observed information.
    """
    y = np.asarray(residuals, dtype=float)
    x = np.asarray(vre, dtype=float)
    if y.shape != x.shape:
        raise InvalidParameterError("residuals and VRE series differ in length")
    ok = np.isfinite(y) & np.isfinite(x)
    y, x = y[ok], x[ok]
    n = len(y)
    if n < min_obs:
        raise InsufficientDataError(f"skew-t regression needs >= {min_obs} observations, got {n}")

    def objective(b):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            v = -loglik(b, y, x) / n
        return v if np.isfinite(v) else np.inf

    def gradient(b):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            g = -score(b, y, x) / n
        return np.where(np.isfinite(g), g, 0.0)

    tol = grad_tol * n
    trace = []
    best = None
    for name, b0 in _starts(y, x).items():
        ll0 = loglik(b0, y, x)
        try:
            res = optimize.minimize(objective, b0, jac=gradient, method="BFGS",
                                    options={"gtol": grad_tol * 1e-2, "maxiter": 2000})
            b = _newton_polish(res.x, y, x, tol)
        except (FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
            trace.append({"start": name, "error": repr(exc)})
            continue
        ll = loglik(b, y, x)
        gnorm = float(np.max(np.abs(score(b, y, x))))
        entry = {"start": name, "loglik_start": ll0, "loglik": ll, "grad_norm": gnorm,
                 "converged": bool(np.isfinite(ll) and gnorm <= tol), "nit": int(res.nit)}
        trace.append(entry)
        logger.debug("skew-t start %s: %s", name, entry)
        if not np.isfinite(ll):
            continue
        if best is None or ll > best[1]:
            best = (b, ll, gnorm, name, entry["converged"])

    if best is None or not any(t.get("converged") for t in trace):
        raise FitError("skew-t regression did not converge from any start", trace=trace)
    b, ll, gnorm, name, converged = best
    if not converged:
        warnings.warn("best skew-t optimum did not meet the gradient tolerance", RuntimeWarning, stacklevel=2)

    H = numerical_hessian(b, y, x)
    try:
        cov = np.linalg.inv(-H)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        if not np.all(np.isfinite(se)) or np.any(np.diag(cov) < 0):
            raise np.linalg.LinAlgError("information matrix not positive definite")
    except np.linalg.LinAlgError:
        warnings.warn("observed information is singular; standard errors unavailable",
                      RuntimeWarning, stacklevel=2)
        cov = np.full((6, 6), np.nan)
        se = np.full(6, np.nan)
    return SkewTGlmFit(beta=b, std_errors=se, cov=cov, loglik=ll, n_obs=n,
                       converged=converged, grad_norm=gnorm, start=name, trace=trace)


def skewness_curve(fit: SkewTGlmFit, x_grid) -> dict:
    """``nu(x)`` with a 95% interval from the delta method on the log scale."""
    x = np.asarray(x_grid, dtype=float)
    s = x / 100.0
    eta = fit.beta[3] + fit.beta[4] * s
    V = fit.cov[3:5, 3:5]
    var = V[0, 0] + 2 * s * V[0, 1] + s * s * V[1, 1]
    se = np.sqrt(np.clip(var, 0.0, None))
    return {"vre_pct": x, "nu": np.exp(eta),
            "nu_lower": np.exp(eta - Z95 * se), "nu_upper": np.exp(eta + Z95 * se)}


def quantile_curves(beta, x_grid, probs: Sequence[float]) -> dict:
    mu, sigma, nu, tail = link_params(beta, x_grid)
    return {p: st_quantile(np.full(len(mu), p), mu=mu, sigma=sigma, nu=nu, tail=tail) for p in probs}


def quantile_differences(fit: SkewTGlmFit, x_grid, pairs=QUANTILE_PAIRS,
                         n_draws: int = MC_DRAWS, seed: int = MC_SEED) -> list:
    """Pointwise quantile spreads with 95% percentile intervals.

    Intervals come from ``n_draws`` coefficient vectors drawn from the
    asymptotic normal ``N(beta_hat, cov)``.  They are left as NaN when the
    covariance is unusable.
    """
    x = np.asarray(x_grid, dtype=float)
    probs = sorted({p for pair in pairs for p in pair})
    point = quantile_curves(fit.beta, x, probs)

    draws = None
    if np.all(np.isfinite(fit.cov)):
        try:
            rng = np.random.default_rng(seed)
            B = rng.multivariate_normal(fit.beta, fit.cov, size=n_draws, method="cholesky")
            mu, sigma, nu, tail = link_params(B.T[:, :, None], x[None, :])
            draws = {p: st_quantile(np.full(mu.shape, p), mu=mu, sigma=sigma, nu=nu, tail=tail)
                     for p in probs}
        except np.linalg.LinAlgError:
            draws = None
    if draws is None:
        warnings.warn("covariance unavailable; quantile-difference intervals omitted",
                      RuntimeWarning, stacklevel=2)

    out = []
    for hi, lo in pairs:
        diff = point[hi] - point[lo]
        if draws is not None:
            d = draws[hi] - draws[lo]
            lower, upper = np.percentile(d, [2.5, 97.5], axis=0)
        else:
            lower = upper = np.full(len(x), np.nan)
        out.append({"upper_q": hi, "lower_q": lo, "vre_pct": x,
                    "difference": diff, "lower": lower, "upper": upper})
    return out
