"""Local linear estimation of conditional CDF tables.

All conditional objects are estimated the same way: an Epanechnikov-weighted
local linear regression of an indicator (or of y itself) on z, evaluated at
each grid point z0.  Because the fit is linear in the responses, the
intercept is a fixed linear functional of the records once z0 and the
bandwidth are fixed; tables over a y grid therefore reduce to one weighted
cumulative sum per z column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, NoSupportError
from .model import EvaluationGrid, ObservationSample

_SINGULAR_REL_TOL = 1e-12


def epanechnikov(u: np.ndarray) -> np.ndarray:
    """K(u) = 0.75 (1 - u^2) on |u| <= 1."""
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def silverman_bandwidth(z: np.ndarray) -> float:
    """Rule-of-thumb default bandwidth: 1.06 min(sd, iqr/1.34) n^(-1/5)."""
    z = np.asarray(z, dtype=float)
    n = z.size
    sd = float(np.std(z))
    q75, q25 = np.quantile(z, [0.75, 0.25])
    iqr = float(q75 - q25)
    scale = min(sd, iqr / 1.34) if iqr > 0 else sd
    if scale <= 0:
        scale = max(abs(float(np.mean(z))), 1.0) * 0.1
    return 1.06 * scale * n ** (-0.2)


def _ll_coefficients(z: np.ndarray, z0: float, h: float) -> np.ndarray:
    """Per-record weights a_i with intercept = sum_i a_i r_i for any response r.

    Falls back to the Nadaraya-Watson weights when the local design is
    singular (all in-window z equal).  Raises NoSupportError when the window
    holds no mass.
    """
    if h <= 0:
        raise DomainError("bandwidth must be positive")
    w = epanechnikov((z - z0) / h)
    s0 = float(np.sum(w))
    if s0 <= 0.0:
        raise NoSupportError(z0, h)
    dz = z - z0
    s1 = float(np.sum(w * dz))
    s2 = float(np.sum(w * dz * dz))
    den = s0 * s2 - s1 * s1
    if den <= _SINGULAR_REL_TOL * max(s0 * s2, s1 * s1, s0 * s0 * h * h):
        return w / s0
    return w * (s2 - s1 * dz) / den


def local_linear_fit(sample: ObservationSample, responses: np.ndarray,
                     z0: float, bandwidth: float) -> float:
    """Local linear intercept estimate of E[response | Z = z0].

    Parameters
    ----------
    sample : ObservationSample
        Provides the regressor values z.
    responses : array
        One response per record (indicators for CDFs, y for means).
    z0, bandwidth : float
        Evaluation point and Epanechnikov window half-width.
    """
    responses = np.asarray(responses, dtype=float)
    if responses.shape != sample.z.shape:
        raise DomainError("responses must align with the sample records")
    a = _ll_coefficients(sample.z, float(z0), float(bandwidth))
    return float(a @ responses)


@dataclass(frozen=True)
class ConditionalCdfTable:
    """Estimated (or analytic) conditional CDF decomposition on a grid.

    F[i, j]  = P(Y <= y_i | z_j)
    F0[i, j] = P(Y <= y_i, D = 0 | z_j)
    F1[i, j] = P(Y <= y_i, D = 1 | z_j)
    p[j]     = P(D = 1 | z_j)

    Invariants: entries in [0, 1], F = F0 + F1 entrywise, each column non
    decreasing in y once monotonization is on.  ``n_obs`` is None for
    population tables.
    """

    grid: EvaluationGrid
    F: np.ndarray
    F0: np.ndarray
    F1: np.ndarray
    p: np.ndarray
    bandwidth: float | None = None
    n_obs: int | None = None

    def __post_init__(self):
        shape = self.grid.shape
        for name in ("F", "F0", "F1"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise DomainError(f"{name} must have shape {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        p = np.asarray(self.p, dtype=float)
        if p.shape != (shape[1],):
            raise DomainError("p must have one entry per z grid point")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def validate(self, atol: float = 1e-9, monotone: bool = True) -> None:
        for name in ("F", "F0", "F1"):
            arr = getattr(self, name)
            if np.any(arr < -atol) or np.any(arr > 1 + atol):
                raise DomainError(f"{name} leaves [0, 1]")
        if np.any(self.p < -atol) or np.any(self.p > 1 + atol):
            raise DomainError("p leaves [0, 1]")
        if np.max(np.abs(self.F - self.F0 - self.F1)) > atol:
            raise DomainError("F != F0 + F1")
        if monotone and self.F.shape[0] > 1:
            for name in ("F", "F0", "F1"):
                if np.any(np.diff(getattr(self, name), axis=0) < -atol):
                    raise DomainError(f"{name} has a decreasing column")

    def identification_tol(self) -> float:
        """Cells with F1 (or p) below this are treated as unidentified."""
        if self.n_obs is None:
            return 1e-6
        return max(5.0 / self.n_obs, 1e-3)


def _column_estimates(sample: ObservationSample, grid_y: np.ndarray,
                      a: np.ndarray) -> tuple:
    """All CDF functionals for one z column from shared weights a."""
    order = np.argsort(sample.y, kind="stable")
    ys = sample.y[order]
    aw = a[order]
    d = sample.d[order].astype(float)
    cum_all = np.concatenate(([0.0], np.cumsum(aw)))
    cum_d1 = np.concatenate(([0.0], np.cumsum(aw * d)))
    # the weights sum to one algebraically; pin the float total accordingly
    cum_all[-1] = 1.0
    idx = np.searchsorted(ys, grid_y, side="right")
    F = cum_all[idx]
    F1 = cum_d1[idx]
    F0 = F - F1
    p = float(cum_d1[-1])
    return F, F0, F1, p


def _repair_columns(F: np.ndarray, F0: np.ndarray, F1: np.ndarray,
                    monotonize: bool) -> tuple:
    """Clip to [0, 1], restore F = F0 + F1, and monotonize in y.

    F is clipped then run-max'ed; F1 follows a running maximum whose per-step
    increments are capped by those of F, which keeps F0 = F - F1 monotone as
    well.  Raw local linear output can overshoot [0, 1] near boundaries, and
    the raw decomposition survives clipping only through the proportional
    rescale below.
    """
    Fc = np.clip(F, 0.0, 1.0)
    F0c = np.clip(F0, 0.0, 1.0)
    F1c = np.clip(F1, 0.0, 1.0)
    s = F0c + F1c
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(s > 0, Fc / np.where(s > 0, s, 1.0), 0.0)
    F0c = F0c * scale
    F1c = F1c * scale
    if not monotonize:
        return Fc, F0c, F1c
    Fm = np.maximum.accumulate(Fc, axis=0)
    Fm = np.clip(Fm, 0.0, 1.0)
    F1m = np.empty_like(F1c)
    prev = np.clip(F1c[0], 0.0, Fm[0])
    F1m[0] = prev
    for i in range(1, F1c.shape[0]):
        step = Fm[i] - Fm[i - 1]
        prev = np.clip(F1c[i], prev, prev + step)
        F1m[i] = prev
    F0m = Fm - F1m
    return Fm, F0m, F1m


def estimate_tables(sample: ObservationSample, grid: EvaluationGrid,
                    bandwidth: float | None = None,
                    monotonize: bool = True) -> ConditionalCdfTable:
    """Estimate the conditional CDF decomposition on a grid.

    One set of local linear weights is computed per z column and applied to
    every indicator response via a weighted cumulative sum, so the cost is
    O(n log n + n_z * (n + n_y)).  Post-processing clips to [0, 1], rescales
    F0, F1 proportionally so F = F0 + F1, and enforces monotonicity in y
    (disable with ``monotonize=False`` for diagnostics).
    """
    h = float(bandwidth) if bandwidth is not None else silverman_bandwidth(sample.z)
    ny, nz = grid.shape
    F = np.empty((ny, nz))
    F0 = np.empty((ny, nz))
    F1 = np.empty((ny, nz))
    p = np.empty(nz)
    for j, z0 in enumerate(grid.z):
        a = _ll_coefficients(sample.z, float(z0), h)
        F[:, j], F0[:, j], F1[:, j], p[j] = _column_estimates(sample, grid.y, a)
    p = np.clip(p, 0.0, 1.0)
    F, F0, F1 = _repair_columns(F, F0, F1, monotonize)
    return ConditionalCdfTable(grid=grid, F=F, F0=F0, F1=F1, p=p,
                               bandwidth=h, n_obs=sample.n)


def conditional_mean(sample: ObservationSample, responses: np.ndarray,
                     z_grid: np.ndarray, bandwidth: float | None = None) -> np.ndarray:
    """Local linear E[response | z] over a z grid (shared weights per column)."""
    h = float(bandwidth) if bandwidth is not None else silverman_bandwidth(sample.z)
    responses = np.asarray(responses, dtype=float)
    out = np.empty(len(z_grid))
    for j, z0 in enumerate(np.asarray(z_grid, dtype=float)):
        a = _ll_coefficients(sample.z, float(z0), h)
        out[j] = float(a @ responses)
    return out
