"""Clamped B-spline basis and its first derivative (Cox-de Boor recursion)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

DEFAULT_DEGREE = 3
DEFAULT_INTERIOR_KNOTS = 3


@dataclass(frozen=True)
class BSplineSpec:
    degree: int
    interior: tuple
    lower: float
    upper: float

    @property
    def knots(self) -> np.ndarray:
        l = self.degree
        return np.concatenate([np.full(l + 1, self.lower), np.asarray(self.interior, float),
                               np.full(l + 1, self.upper)])

    @property
    def dim(self) -> int:
        return len(self.interior) + self.degree + 1

    @property
    def domain(self) -> tuple:
        return (self.lower, self.upper)

    def to_dict(self) -> dict:
        return {"degree": self.degree, "interior_knots": list(self.interior),
                "lower": self.lower, "upper": self.upper}

    @classmethod
    def from_dict(cls, d) -> "BSplineSpec":
        return cls(int(d["degree"]), tuple(float(k) for k in d["interior_knots"]),
                   float(d["lower"]), float(d["upper"]))


def make_spec(x_min: float, x_max: float, n_interior: int = DEFAULT_INTERIOR_KNOTS,
              degree: int = DEFAULT_DEGREE, data=None) -> BSplineSpec:
    """Knot layout on ``[x_min, x_max]``.

    Interior knots sit at equally spaced empirical quantiles of ``data``; with
    no data, or when the quantiles are tied or touch the boundary, they are
    equally spaced over the interval instead.
    """
    if not (np.isfinite(x_min) and np.isfinite(x_max)) or not x_min < x_max:
        raise InvalidParameterError(f"degenerate spline domain [{x_min}, {x_max}]")
    if n_interior < 0:
        raise InvalidParameterError("n_interior must be >= 0")
    if degree < 1:
        raise InvalidParameterError("degree must be >= 1")
    probs = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
    interior = None
    if data is not None and n_interior:
        d = np.asarray(data, dtype=float)
        d = d[np.isfinite(d)]
        if d.size:
            q = np.quantile(d, probs)
            if np.all(np.diff(q) > 0) and q[0] > x_min and q[-1] < x_max:
                interior = q
            else:
                warnings.warn("quantile knots are tied or on the boundary; using equal spacing",
                              RuntimeWarning, stacklevel=2)
    if interior is None:
        interior = x_min + probs * (x_max - x_min)
    return BSplineSpec(int(degree), tuple(float(k) for k in interior), float(x_min), float(x_max))


def _prepare(spec: BSplineSpec, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    outside = (x < spec.lower) | (x > spec.upper)
    if outside.any():
        warnings.warn(f"{int(outside.sum())} point(s) outside spline domain "
                      f"[{spec.lower}, {spec.upper}] clamped to the boundary",
                      RuntimeWarning, stacklevel=3)
        x = np.clip(x, spec.lower, spec.upper)
    t = spec.knots
    l = spec.degree
    # span i satisfies t[i] <= x < t[i+1]; the right end uses the last non-empty span
    span = np.searchsorted(t, x, side="right") - 1
    span = np.clip(span, l, len(t) - l - 2)
    return x, t, span


def _nonzero_basis(t, span, x, degree):
    """Values of the ``degree + 1`` basis functions that can be nonzero on ``span``."""
    m = len(x)
    N = np.zeros((m, degree + 1))
    N[:, 0] = 1.0
    left = np.zeros((m, degree + 1))
    right = np.zeros((m, degree + 1))
    for j in range(1, degree + 1):
        left[:, j] = x - t[span + 1 - j]
        right[:, j] = t[span + j] - x
        saved = np.zeros(m)
        for r in range(j):
            temp = N[:, r] / (right[:, r + 1] + left[:, j - r])
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved
    return N


def _scatter(N, span, degree, ncols):
    m = N.shape[0]
    out = np.zeros((m, ncols))
    cols = span[:, None] - degree + np.arange(degree + 1)[None, :]
    out[np.arange(m)[:, None], cols] = N
    return out


def eval_basis(spec: BSplineSpec, x) -> np.ndarray:
    """Basis matrix of shape ``(len(x), spec.dim)``; rows sum to one."""
    x, t, span = _prepare(spec, x)
    N = _nonzero_basis(t, span, x, spec.degree)
    return _scatter(N, span, spec.degree, spec.dim)


def eval_basis_derivative(spec: BSplineSpec, x) -> np.ndarray:
    """First derivative of each basis function; rows sum to zero.

    At the domain ends the value is the one-sided derivative from inside.
    """
    x, t, span = _prepare(spec, x)
    l = spec.degree
    lower = _scatter(_nonzero_basis(t, span, x, l - 1), span, l - 1, spec.dim + 1)
    k = np.arange(spec.dim)
    d1 = t[k + l] - t[k]
    d2 = t[k + l + 1] - t[k + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        c1 = np.where(d1 > 0, l / d1, 0.0)
        c2 = np.where(d2 > 0, l / d2, 0.0)
    return lower[:, :-1] * c1 - lower[:, 1:] * c2
