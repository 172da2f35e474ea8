"""Population-limit observable tables for synthetic DGPs.

For a DGP with lognormal potential incomes and cost C, the observable
conditional law given z decomposes through the selection event
psi_z(Y1) >= Y0 with psi_z(y) = y - C(y, z):

    F1(y | z) = P(X1 <= ln y, X0 <= ln psi_z(e^{X1}))
    F0(y | z) = P(X0 <= ln y, X1 <  ln psi_z^{-1}(e^{X0}))

Both are one-dimensional Gaussian integrals once the inner coordinate is
conditioned out; they are evaluated by composite Simpson cumulatives on a
dense node grid, which keeps absolute errors near 1e-12 and gives every y
grid value from a single pass per z column.  Quadratic-family truncation is
handled by capping both coordinates and renormalizing.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.stats import norm

from .errors import DomainError, InvalidDgpError
from .estimation import ConditionalCdfTable
from .model import DgpSpec, EvaluationGrid, SmivReport, _monotone_in_z_report

_NODES = 20001
_TAIL_SD = 8.5


def _params_at(dgp: DgpSpec, z: float) -> tuple:
    return (float(dgp.mu0(z)), float(dgp.mu1(z)),
            float(dgp.sigma0(z)), float(dgp.sigma1(z)))


def _node_grid(mu: float, sigma: float, cap: float, nodes: int) -> np.ndarray:
    hi = min(mu + _TAIL_SD * sigma, cap)
    lo = hi - 2.0 * _TAIL_SD * sigma
    return np.linspace(lo, hi, nodes)


def _pure_roy_degenerate(dgp: DgpSpec) -> bool:
    if dgp.family != "pure_roy" or dgp.outcome_corr != 1.0:
        return False
    z = dgp.z_law.support_probe()
    return (np.allclose(dgp.mu0(z), dgp.mu1(z), atol=0.0)
            and np.allclose(dgp.sigma0(z), dgp.sigma1(z), atol=0.0))


def _selection_column(dgp: DgpSpec, z: float, log_y: np.ndarray,
                      nodes: int) -> tuple:
    """(F, F0, F1, p) at one z for a perfect-foresight DGP."""
    mu0, mu1, s0, s1, r = *_params_at(dgp, z), dgp.outcome_corr
    if abs(r) >= 1.0:
        raise DomainError("population tables need |outcome_corr| < 1 "
                          "(except the degenerate pure_roy closed form)")
    cap = dgp._log_cap()
    sc0 = s0 * math.sqrt(1.0 - r * r)
    sc1 = s1 * math.sqrt(1.0 - r * r)

    # sector 1 sub-distribution: integrate over x1
    x1 = _node_grid(mu1, s1, cap, nodes)
    y1 = np.exp(x1)
    psi = y1 - np.asarray(dgp.cost(y1, z), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ub0 = np.where(psi > 0, np.log(np.where(psi > 0, psi, 1.0)), -np.inf)
    ub0 = np.minimum(ub0, cap)
    m0 = mu0 + r * (s0 / s1) * (x1 - mu1)
    inner0 = norm.cdf((ub0 - m0) / sc0)
    integrand1 = norm.pdf(x1, loc=mu1, scale=s1) * inner0
    cum1 = cumulative_simpson(integrand1, x=x1, initial=0.0)

    # sector 0 sub-distribution: integrate over x0; the selection event is
    # X1 < ln psi_z^{-1}(Y0), intersected with the cap under truncation
    x0 = _node_grid(mu0, s0, cap, nodes)
    y0 = np.exp(x0)
    inv = np.asarray(dgp.shifted_income_inverse(y0, z), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ub1 = np.where(inv > 0, np.log(np.where(inv > 0, inv, 1.0)), -np.inf)
    ub1 = np.where(np.isposinf(inv), np.inf, ub1)
    ub1 = np.minimum(ub1, cap)
    m1 = mu1 + r * (s1 / s0) * (x0 - mu0)
    inner1 = norm.cdf((ub1 - m1) / sc1)
    integrand0 = norm.pdf(x0, loc=mu0, scale=s0) * inner1
    cum0 = cumulative_simpson(integrand0, x=x0, initial=0.0)

    # the two sector totals partition the (possibly capped) probability mass,
    # so their sum is the exact normalizer (it is 1 up to quadrature error
    # without truncation)
    normalizer = float(cum1[-1] + cum0[-1])
    F1 = np.interp(log_y, x1, cum1, left=0.0, right=float(cum1[-1])) / normalizer
    F0 = np.interp(log_y, x0, cum0, left=0.0, right=float(cum0[-1])) / normalizer
    p = float(cum1[-1]) / normalizer
    return F0 + F1, F0, F1, p


def population_tables(dgp: DgpSpec, grid: EvaluationGrid, nodes: int = _NODES) -> ConditionalCdfTable:
    """Analytic observable tables (F, F0, F1, p) of a DGP on a grid."""
    ny, nz = grid.shape
    if np.any(grid.y <= 0):
        raise DomainError("lognormal DGPs need a positive y grid")
    log_y = np.log(grid.y)
    F = np.empty((ny, nz))
    F0 = np.empty((ny, nz))
    F1 = np.empty((ny, nz))
    p = np.empty(nz)

    if dgp.foresight == "imperfect":
        for j, z in enumerate(grid.z):
            mu0, mu1, s0, s1 = _params_at(dgp, float(z))
            take1 = bool(dgp.mean_shifted_income(float(z)) >= dgp.outcome_mean(0, float(z)))
            cap = dgp._log_cap()
            if take1:
                F1[:, j] = _truncated_normal_cdf(log_y, mu1, s1, cap)
                F0[:, j] = 0.0
            else:
                F0[:, j] = _truncated_normal_cdf(log_y, mu0, s0, cap)
                F1[:, j] = 0.0
            p[j] = 1.0 if take1 else 0.0
        F = F0 + F1
        return ConditionalCdfTable(grid=grid, F=F, F0=F0, F1=F1, p=p)

    if _pure_roy_degenerate(dgp):
        for j, z in enumerate(grid.z):
            mu, _, s, _ = _params_at(dgp, float(z))
            F1[:, j] = norm.cdf((log_y - mu) / s)
            F0[:, j] = 0.0
            p[j] = 1.0
        F = F0 + F1
        return ConditionalCdfTable(grid=grid, F=F, F0=F0, F1=F1, p=p)

    for j, z in enumerate(grid.z):
        F[:, j], F0[:, j], F1[:, j], p[j] = _selection_column(dgp, float(z), log_y, nodes)
    return ConditionalCdfTable(grid=grid, F=F, F0=F0, F1=F1, p=p)


def _truncated_normal_cdf(x: np.ndarray, mu: float, sigma: float, cap: float) -> np.ndarray:
    if not math.isfinite(cap):
        return norm.cdf((x - mu) / sigma)
    a = (cap - mu) / sigma
    return norm.cdf(np.minimum((x - mu) / sigma, a)) / norm.cdf(a)


def lower_orthant_table(dgp: DgpSpec, a_grid: np.ndarray, b_grid: np.ndarray,
                        z: float, nodes: int = 4001) -> np.ndarray:
    """P(Y0 <= a, Y1 - C(Y1, z) <= b | z) over an (a, b) grid at one z."""
    a_grid = np.asarray(a_grid, dtype=float)
    b_grid = np.asarray(b_grid, dtype=float)
    mu0, mu1, s0, s1, r = *_params_at(dgp, float(z)), dgp.outcome_corr
    cap = dgp._log_cap()
    inv = np.asarray(dgp.shifted_income_inverse(b_grid, z), dtype=float)
    with np.errstate(divide="ignore"):
        beta = np.where(inv > 0, np.log(np.where(inv > 0, inv, 1.0)), -np.inf)
    beta = np.where(np.isposinf(inv), np.inf, beta)
    with np.errstate(divide="ignore"):
        alpha = np.where(a_grid > 0, np.log(np.where(a_grid > 0, a_grid, 1.0)), -np.inf)

    if abs(r) >= 1.0:
        if math.isfinite(cap):
            raise DomainError("degenerate correlation with truncation is unsupported")
        pa = norm.cdf((alpha - mu0) / s0)
        pb = norm.cdf((beta - mu1) / s1)
        if r >= 1.0:
            return np.minimum(pa[:, None], pb[None, :])
        return np.maximum(0.0, pa[:, None] + pb[None, :] - 1.0)

    x1 = _node_grid(mu1, s1, cap, nodes)
    m0 = mu0 + r * (s0 / s1) * (x1 - mu1)
    sc0 = s0 * math.sqrt(1.0 - r * r)
    phi1 = norm.pdf(x1, loc=mu1, scale=s1)
    if math.isfinite(cap):
        total = cumulative_simpson(phi1 * norm.cdf((cap - m0) / sc0), x=x1, initial=0.0)
        normalizer = float(total[-1])
    else:
        normalizer = 1.0

    out = np.empty((a_grid.size, b_grid.size))
    beta_eval = np.minimum(beta, x1[-1])
    for i, al in enumerate(alpha):
        thresh = min(al, cap) if math.isfinite(cap) else al
        integrand = phi1 * norm.cdf((thresh - m0) / sc0)
        cum = cumulative_simpson(integrand, x=x1, initial=0.0)
        row = np.interp(beta_eval, x1, cum, left=0.0, right=float(cum[-1]))
        out[i, :] = np.where(np.isneginf(beta), 0.0, row) / normalizer
    return out


def check_smiv_dgp(dgp: DgpSpec, y_grid, z_grid, tol: float = 1e-9,
                   b_grid=None, nodes: int = 4001) -> SmivReport:
    """DGP-mode stochastic monotonicity check on joint lower orthants."""
    y_grid = np.asarray(y_grid, dtype=float)
    z_grid = np.asarray(z_grid, dtype=float)
    if y_grid.size == 0 or z_grid.size == 0:
        raise DomainError("check_smiv needs non-empty grids")
    b_grid = y_grid if b_grid is None else np.asarray(b_grid, dtype=float)
    stacked = np.empty((y_grid.size * b_grid.size, z_grid.size))
    for j, z in enumerate(z_grid):
        stacked[:, j] = lower_orthant_table(dgp, y_grid, b_grid, float(z), nodes=nodes).ravel()
    labels = [(float(a), float(b)) for a in y_grid for b in b_grid]
    return _monotone_in_z_report(stacked, labels, z_grid, tol, mode="dgp")
