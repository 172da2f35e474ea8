"""Sharp bounds on the non-pecuniary cost of sector 1.

Three constructions.  Under perfect foresight the deterministic cost
C(y, z) is squeezed pointwise: with the sandwich functions L <= H <= U
pinning the unobserved H(y|z) = P(Y - C(Y,Z) <= y, D=1 | z), inverting at
x = F1(y|z) gives

    Clow(y, z)  = max(0, y - Linv(F1(y|z) | z)),
    Chigh(y, z) = y - Uinv(F1(y|z) | z).

Under imperfect foresight (selection on mean utility) only per-z bounds on
a constant-in-y cost survive, built from running extrema of conditional
means.  With random (scalar, additively separable) costs among sector-1
choosers, the marginal cdf bounds on Y1 - C combine with the observed cdf
of Y1 given D=1 into two-marginal bounds on the cdf of C itself.

Cells where F1(y|z) sits below the identification tolerance carry no
information about sector-1 costs and are masked to NaN, as are cells where
the generalized inverse's defining set is empty on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .envelopes import (
    CrossingReport,
    crossing_test,
    envelope_table,
    generalized_inverse,
    sandwich,
)
from .errors import DomainError
from .estimation import ConditionalCdfTable, conditional_mean, silverman_bandwidth
from .model import EvaluationGrid, ObservationSample


@dataclass(frozen=True)
class BoundSurface:
    """Pointwise cost bounds on a (y, z) grid with identification mask."""

    grid: EvaluationGrid
    Clow: np.ndarray
    Chigh: np.ndarray
    identified_mask: np.ndarray
    crossing: CrossingReport
    sandwich_crossing: CrossingReport
    identification_tol: float
    lower_support_bound: float = 0.0

    @property
    def rejected(self) -> bool:
        return self.crossing.rejected or self.sandwich_crossing.rejected


def cost_bounds_pf(table: ConditionalCdfTable, lower_support_bound: float = 0.0,
                   identification_tol: float | None = None,
                   crossing_tol: float = 1e-9,
                   interpolate: bool = False) -> BoundSurface:
    """Perfect-foresight bounds from envelope and sandwich inversion.

    Rejection (envelopes crossing, or L exceeding U) is flagged on the
    returned surface, never raised: population users may still inspect the
    cells.  When the surface is not rejected with crossing_tol=0 semantics,
    L <= U entrywise forces Clow <= Chigh at every identified cell.
    """
    if identification_tol is None:
        identification_tol = table.identification_tol()
    env = envelope_table(table, lower_support_bound)
    report = crossing_test(env.Flow, env.Fhigh, crossing_tol)
    sw = sandwich(table, env.Flow, env.Fhigh)
    sandwich_report = crossing_test(sw.L, sw.U, crossing_tol)

    y = table.grid.y
    ny, nz = table.F1.shape
    Clow = np.full((ny, nz), np.nan)
    Chigh = np.full((ny, nz), np.nan)
    mask = np.zeros((ny, nz), dtype=bool)
    for iz in range(nz):
        x = table.F1[:, iz]
        Lcol = sw.L[:, iz]
        Ucol = sw.U[:, iz]
        idx_low = np.searchsorted(Lcol, x, side="right")
        idx_up = np.searchsorted(Ucol, x, side="left")
        # U never reaching x leaves the upper inverse's set empty on the
        # grid; the cell goes dark rather than carrying a -inf bound
        keep = (x >= identification_tol) & (idx_up < ny)
        if not np.any(keep):
            continue
        if interpolate:
            linv = np.array([generalized_inverse(y, Lcol, xv, "lower", True)
                             for xv in x[keep]])
            uinv = np.array([generalized_inverse(y, Ucol, xv, "upper", True)
                             for xv in x[keep]])
        else:
            linv = y[np.minimum(idx_low[keep], ny - 1)]
            uinv = y[np.maximum(idx_up[keep] - 1, 0)]
        # U already at/above x on the first grid point: the crossing sits
        # off-grid in [b_lower, y[0]] because shifted income of sector-1
        # choosers never falls below the outcome support bound
        bottom = idx_up[keep] == 0
        if np.any(bottom):
            uinv = np.where(bottom, min(lower_support_bound, y[0]), uinv)
        Clow[keep, iz] = np.maximum(y[keep] - linv, 0.0)
        Chigh[keep, iz] = np.maximum(y[keep] - uinv, 0.0)
        mask[:, iz] = keep
    return BoundSurface(grid=table.grid, Clow=Clow, Chigh=Chigh,
                        identified_mask=mask, crossing=report,
                        sandwich_crossing=sandwich_report,
                        identification_tol=identification_tol,
                        lower_support_bound=lower_support_bound)


@dataclass(frozen=True)
class IfBoundCurve:
    """Per-z bounds on a constant-in-y cost under imperfect foresight."""

    z_grid: np.ndarray
    Clow: np.ndarray
    Chigh: np.ndarray
    m: np.ndarray
    m0b: np.ndarray
    p: np.ndarray
    p_tol: float
    lower_support_bound: float = 0.0
    bandwidth: float | None = None


def if_bounds_from_moments(z_grid, m, m0b, p, p_tol: float = 1e-6,
                           lower_support_bound: float = 0.0,
                           bandwidth: float | None = None) -> IfBoundCurve:
    """Bounds from the moment vectors directly.

    Clow(z) scales the drop of m(z) below its running future minimum by
    1/p(z), zero where p(z) is below tolerance.  Chigh(z) compares m(z)
    against the running past maximum of m0b(z) = E[Y(1-D) + b_lower D | z];
    division by a p(z) below tolerance follows the x/0 = +inf convention.
    """
    z_grid = np.asarray(z_grid, dtype=float)
    m = np.asarray(m, dtype=float)
    m0b = np.asarray(m0b, dtype=float)
    p = np.asarray(p, dtype=float)
    if not (z_grid.shape == m.shape == m0b.shape == p.shape) or z_grid.ndim != 1:
        raise DomainError("z grid and moment vectors must share a 1-D shape")
    if z_grid.size > 1 and np.any(np.diff(z_grid) <= 0):
        raise DomainError("z grid must be strictly increasing")

    future_min = np.flip(np.minimum.accumulate(np.flip(m)))
    past_max = np.maximum.accumulate(m0b)
    positive = p > p_tol
    Clow = np.zeros_like(m)
    Clow[positive] = np.maximum(m[positive] - future_min[positive], 0.0) / p[positive]
    Chigh = np.full_like(m, np.inf)
    Chigh[positive] = (m[positive] - past_max[positive]) / p[positive]
    return IfBoundCurve(z_grid=z_grid, Clow=Clow, Chigh=Chigh, m=m, m0b=m0b,
                        p=p, p_tol=p_tol, lower_support_bound=lower_support_bound,
                        bandwidth=bandwidth)


def cost_bounds_if(sample: ObservationSample, z_grid, bandwidth: float | None = None,
                   p_tol: float | None = None) -> IfBoundCurve:
    """Estimate the imperfect-foresight moment vectors and bound the cost."""
    if bandwidth is None:
        bandwidth = silverman_bandwidth(sample.z)
    b_low = sample.lower_support_bound
    m = conditional_mean(sample, sample.y, z_grid, bandwidth)
    m0b = conditional_mean(sample, sample.y * (1.0 - sample.d) + b_low * sample.d,
                           z_grid, bandwidth)
    p = np.clip(conditional_mean(sample, sample.d, z_grid, bandwidth), 0.0, 1.0)
    if p_tol is None:
        p_tol = max(5.0 / sample.n, 1e-3)
    return if_bounds_from_moments(z_grid, m, m0b, p, p_tol=p_tol,
                                  lower_support_bound=b_low, bandwidth=bandwidth)


@dataclass(frozen=True)
class TestabilityReport:
    """Joint refutation check available only where p vanishes."""

    rejected: bool
    worst_violation: float
    location: tuple | None
    tol: float


def testability_if(curve: IfBoundCurve, tol: float = 1e-9) -> TestabilityReport:
    """Reject iff m decreases by more than tol between two zero-p grid points."""
    zero = curve.p <= tol
    worst = 0.0
    location = None
    idx = np.flatnonzero(zero)
    for a in range(idx.size):
        for b in range(a + 1, idx.size):
            i, j = idx[a], idx[b]
            drop = curve.m[i] - curve.m[j]
            if drop > worst:
                worst = drop
                location = (float(curve.z_grid[j]), float(curve.z_grid[i]))
    return TestabilityReport(rejected=worst > tol, worst_violation=worst,
                             location=location, tol=tol)


@dataclass(frozen=True)
class RandomCostCdfBounds:
    """Two-marginal bounds on the cost cdf among sector-1 choosers."""

    cost_grid: np.ndarray
    z_grid: np.ndarray
    y_grid: np.ndarray
    FL: np.ndarray
    FU: np.ndarray
    Fcond: np.ndarray
    F1low: np.ndarray
    F1high: np.ndarray
    identified_z: np.ndarray
    p_tol: float


def _step_eval(grid: np.ndarray, vals: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Right-continuous step read-off; 0 below the first grid point."""
    idx = np.searchsorted(grid, t, side="right")
    out = vals[np.maximum(idx - 1, 0)]
    return np.where(idx > 0, out, 0.0)


def random_cost_bounds(table: ConditionalCdfTable, cost_grid,
                       lower_support_bound: float = 0.0,
                       p_tol: float | None = None) -> RandomCostCdfBounds:
    """Bound the cdf of C = Y1 - (Y1 - C) given D=1 from its two marginals.

    The shifted-income marginal is only partially identified, so the lower
    cost-cdf bound uses the upper marginal bound and vice versa.  The
    sup/inf defining the two-marginal bounds run over the union of the
    y-grid and the y-grid offset by the cost value, which contains every
    breakpoint of the step difference.
    """
    cost_grid = np.asarray(cost_grid, dtype=float)
    if cost_grid.ndim != 1 or cost_grid.size == 0:
        raise DomainError("cost grid must be a nonempty vector")
    if p_tol is None:
        p_tol = table.identification_tol()
    env = envelope_table(table, lower_support_bound)
    y = table.grid.y
    ny, nz = table.F.shape
    nc = cost_grid.size
    FL = np.full((nc, nz), np.nan)
    FU = np.full((nc, nz), np.nan)
    Fcond = np.full((ny, nz), np.nan)
    F1low = np.full((ny, nz), np.nan)
    F1high = np.full((ny, nz), np.nan)
    identified = table.p > p_tol
    for iz in np.flatnonzero(identified):
        p = table.p[iz]
        cond = np.clip(table.F1[:, iz] / p, 0.0, 1.0)
        low = np.clip((env.Flow[:, iz] - table.F[:, iz]) / p + cond, 0.0, 1.0)
        high = np.clip((env.Fhigh[:, iz] - table.F[:, iz]) / p + cond, 0.0, 1.0)
        # running max keeps low <= high since both pass through the same map
        cond = np.maximum.accumulate(cond)
        low = np.maximum.accumulate(low)
        high = np.maximum.accumulate(high)
        Fcond[:, iz] = cond
        F1low[:, iz] = low
        F1high[:, iz] = high
        for ic, c in enumerate(cost_grid):
            t = np.concatenate([y, y + c])
            a = _step_eval(y, cond, t)
            FL[ic, iz] = max(0.0, float(np.max(a - _step_eval(y, high, t - c))))
            FU[ic, iz] = 1.0 + min(0.0, float(np.min(a - _step_eval(y, low, t - c))))
    return RandomCostCdfBounds(cost_grid=cost_grid, z_grid=table.grid.z,
                               y_grid=y, FL=FL, FU=FU, Fcond=Fcond,
                               F1low=F1low, F1high=F1high,
                               identified_z=identified, p_tol=p_tol)


def lower_bound_interpolator(surface: BoundSurface):
    """Callable (y, z) -> Clow, linear in y over identified cells, nearest z.

    Columns with no identified cell fall back to zero cost (no claim is
    made there, and zero keeps the shifted income map the identity).
    """
    y_grid = surface.grid.y
    z_grid = surface.grid.z
    columns = []
    for iz in range(z_grid.size):
        keep = surface.identified_mask[:, iz]
        if np.any(keep):
            columns.append((y_grid[keep], surface.Clow[keep, iz]))
        else:
            columns.append(None)

    def evaluate(y, z):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        iz = np.argmin(np.abs(z[:, None] - z_grid[None, :]), axis=1)
        out = np.zeros_like(y)
        for col in np.unique(iz):
            sel = iz == col
            if columns[col] is not None:
                knots, vals = columns[col]
                out[sel] = np.interp(y[sel], knots, vals)
        return out

    return evaluate


def resimulate_sample(sample: ObservationSample, surface: BoundSurface) -> ObservationSample:
    """Rebuild observables under the lower-bound cost.

    Potential outcomes are reconstructed record by record: the sector-0
    value is y - d * Clow(y, z) and the sector-1 value inverts the shifted
    income map m(y) = y - Clow(y, z) on the grid (so it lands on a grid
    point; round-trip error is at most one grid step).  Sector choices are
    kept: the reconstruction makes every record exactly indifferent, and
    ties resolve to the observed sector.
    """
    cost_at = lower_bound_interpolator(surface)
    y_grid = surface.grid.y
    z_grid = surface.grid.z
    v = sample.y - sample.d * cost_at(sample.y, sample.z)
    y1 = np.empty_like(v)
    iz = np.argmin(np.abs(sample.z[:, None] - z_grid[None, :]), axis=1)
    for col in np.unique(iz):
        sel = iz == col
        keep = surface.identified_mask[:, col]
        if np.any(keep):
            knots = y_grid[keep]
            # protect inversion against sub-tolerance wiggles in y - Clow
            m = np.maximum.accumulate(knots - surface.Clow[keep, col])
            idx = np.searchsorted(m, v[sel], side="right")
            y1[sel] = knots[np.minimum(idx, knots.size - 1)]
        else:
            y1[sel] = v[sel]
    y_new = np.where(sample.d == 1, y1, v)
    b_low = min(sample.lower_support_bound, float(np.min(y_new)))
    return ObservationSample(y=y_new, d=sample.d, z=sample.z,
                             lower_support_bound=b_low)
