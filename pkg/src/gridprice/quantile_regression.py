"""Conditional quantile curves ``b0 + basis(x) @ beta`` fit by pinball-loss LP.

The B-spline basis sums to one, so the first basis coefficient is pinned to
zero to keep the design identifiable; ``coef`` always has ``spec.dim``
entries with ``coef[0] == 0``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import InsufficientDataError, InvalidParameterError, SolverError
from .spline_basis import BSplineSpec, eval_basis, eval_basis_derivative

logger = logging.getLogger(__name__)

PRICE_TAUS = (0.25, 0.50, 0.75, 0.90)
VOLATILITY_TAUS = (0.50, 0.75, 0.90)
GAP_TOL = 1e-8
SIMPLEX_MAX_N = 2000
GRID_POINTS = 400


def pinball_loss(u, tau: float):
    """``u * (tau - 1{u < 0})``; scalar in, scalar out."""
    u_arr = np.asarray(u, dtype=float)
    out = u_arr * (tau - (u_arr < 0))
    return float(out) if out.ndim == 0 else out


def _check_tau(tau):
    if not 0.0 < tau < 1.0:
        raise InvalidParameterError(f"quantile level must lie in (0, 1), got {tau}")


@dataclass
class QuantileFit:
    spec: Optional[BSplineSpec]
    tau: float
    intercept: float
    coef: np.ndarray
    objective: float
    n_obs: int
    method: str
    iterations: int = 0
    duality_gap: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "intercept": self.intercept,
            "coefficients": [float(c) for c in self.coef],
            "objective": self.objective,
            "n_obs": self.n_obs,
            "method": self.method,
            "iterations": self.iterations,
            "duality_gap": self.duality_gap,
            "spline": None if self.spec is None else self.spec.to_dict(),
        }


def design_matrix(spec: Optional[BSplineSpec], x) -> np.ndarray:
    """Columns: intercept, then basis functions 2..dim."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if spec is None:
        return np.ones((len(x), 1))
    B = eval_basis(spec, x)
    return np.column_stack([np.ones(len(x)), B[:, 1:]])


def _solve_lp(X, y, tau, method):
    n, p = X.shape
    c = np.concatenate([np.zeros(p), np.full(n, tau), np.full(n, 1.0 - tau)])
    eye = sp.identity(n, format="csc")
    A = sp.hstack([sp.csc_matrix(X), eye, -eye], format="csc")
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    scale = max(1.0, float(np.sum(np.abs(y))))
    options = {"presolve": True}
    if method == "highs-ipm":
        options["ipm_optimality_tolerance"] = max(GAP_TOL, 1e-12)
    else:
        options["dual_feasibility_tolerance"] = 1e-10
        options["primal_feasibility_tolerance"] = 1e-10
    res = linprog(c, A_eq=A, b_eq=y, bounds=bounds, method=method, options=options)
    return res, scale


def fit_quantile(x, y, tau: float, spec: Optional[BSplineSpec]) -> QuantileFit:
    """Minimise the summed pinball loss over intercept and spline coefficients.

    ``spec=None`` fits an intercept-only model (the sample quantile).  The
    interior-point path with crossover is used first; small problems fall back
    to dual simplex if it fails or leaves a duality gap above tolerance.
    """
    _check_tau(tau)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise InvalidParameterError("x and y differ in length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidParameterError("x and y must be finite")
    X = design_matrix(spec, x)
    n, p = X.shape
    needed = (spec.dim if spec is not None else 0) + 1
    if n < needed:
        raise InsufficientDataError(f"need at least {needed} observations, got {n}")

    attempts = ["highs-ipm"] + (["highs-ds"] if n <= SIMPLEX_MAX_N else [])
    failures = {}
    for method in attempts:
        res, scale = _solve_lp(X, y, tau, method)
        if res.status != 0:
            failures[method] = {"status": int(res.status), "message": res.message}
            logger.warning("LP %s failed: %s", method, res.message)
            continue
        theta = res.x[:p]
        resid = y - X @ theta
        objective = float(np.sum(pinball_loss(resid, tau)))
        dual_obj = float(y @ res.eqlin.marginals) if res.eqlin is not None else objective
        gap = abs(objective - dual_obj)
        if gap > GAP_TOL * scale:
            failures[method] = {"status": 0, "message": f"duality gap {gap:.3e} above tolerance"}
            continue
        coef = np.zeros(spec.dim if spec is not None else 0)
        if spec is not None:
            coef[1:] = theta[1:]
        return QuantileFit(
            spec=spec, tau=float(tau), intercept=float(theta[0]), coef=coef,
            objective=objective, n_obs=n, method=method,
            iterations=int(getattr(res, "nit", 0) or 0), duality_gap=gap,
        )
    raise SolverError("quantile LP did not solve to tolerance", diagnostics=failures)


def predict_quantile(fit: QuantileFit, x):
    scalar = np.ndim(x) == 0
    X = design_matrix(fit.spec, x)
    theta = np.concatenate([[fit.intercept], fit.coef[1:]]) if fit.spec is not None else np.array([fit.intercept])
    out = X @ theta
    return float(out[0]) if scalar else out


def quantile_derivative(fit: QuantileFit, x):
    """Slope of the fitted quantile curve in response units per VRE percentage point."""
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if fit.spec is None:
        out = np.zeros(len(xa))
    else:
        at_edge = (xa <= fit.spec.lower) | (xa >= fit.spec.upper)
        if at_edge.any():
            warnings.warn("derivative at the domain boundary is one-sided", RuntimeWarning, stacklevel=2)
        out = eval_basis_derivative(fit.spec, xa) @ fit.coef
    return float(out[0]) if scalar else out


def subgradient_check(fit: QuantileFit, x, y, atol: float = 1e-7) -> bool:
    """Verify the LP optimality condition at ``fit`` without re-solving the LP.

    With residuals ``r``, points off the curve contribute ``tau - 1{r < 0}``
    to the score; points on the curve (``|r| <= atol``) may contribute any
    weight in ``[tau - 1, tau]``.  Optimal iff such weights zero the score,
    found here by bounded least squares.
    """
    from scipy.optimize import lsq_linear

    X = design_matrix(fit.spec, x)
    y = np.asarray(y, dtype=float)
    r = y - predict_quantile(fit, x)
    on = np.abs(r) <= atol * max(1.0, np.max(np.abs(y)))
    tau = fit.tau
    score = X[~on].T @ (tau - (r[~on] < 0))
    if not on.any():
        return bool(np.max(np.abs(score)) <= 1e-8 * len(y))
    sol = lsq_linear(X[on].T, -score, bounds=(tau - 1.0, tau), tol=1e-12)
    return bool(np.max(np.abs(X[on].T @ sol.x + score)) <= 1e-6 * len(y))


def crossing_diagnostic(fits: Sequence[QuantileFit], grid) -> list:
    """Grid points where a lower-level curve lies above a higher-level one."""
    ordered = sorted(fits, key=lambda f: f.tau)
    grid = np.asarray(grid, dtype=float)
    issues = []
    for lo, hi in zip(ordered, ordered[1:]):
        bad = predict_quantile(lo, grid) > predict_quantile(hi, grid) + 1e-9
        for xv in grid[bad]:
            issues.append({"tau_low": lo.tau, "tau_high": hi.tau, "vre_pct": float(xv)})
    if issues:
        logger.info("quantile crossing at %d grid point(s)", len(issues))
    return issues


def curve_grid(x, n: int = GRID_POINTS) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.linspace(np.min(x), np.max(x), n)
