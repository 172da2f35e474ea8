"""Kernel cdf estimation against a plain weighted-least-squares oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roybounds import (
    EvaluationGrid,
    NoSupportError,
    conditional_mean,
    estimate_tables,
    generate_sample,
    silverman_bandwidth,
)
from roybounds.estimation import epanechnikov, local_linear_fit


def oracle_local_linear(x, resp, x0, h):
    """Textbook local-linear estimate at x0 via explicit WLS on (1, x - x0)."""
    u = (x - x0) / h
    w = np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u**2), 0.0)
    keep = w > 0
    if keep.sum() == 0:
        return None
    X = np.column_stack([np.ones(keep.sum()), (x[keep] - x0)])
    sw = np.sqrt(w[keep])
    beta, *_ = np.linalg.lstsq(X * sw[:, None], resp[keep] * sw, rcond=None)
    return beta[0]


def test_epanechnikov_shape():
    u = np.array([-1.5, -1.0, 0.0, 0.5, 1.0, 2.0])
    k = epanechnikov(u)
    assert k[0] == 0.0 and k[-1] == 0.0
    assert k[2] == pytest.approx(0.75)
    assert np.all(k >= 0)


def test_silverman_positive(quasi_sample):
    h = silverman_bandwidth(quasi_sample.z)
    assert 0.0 < h < np.ptp(quasi_sample.z)


def test_local_linear_matches_wls_oracle(quasi_sample):
    resp = (quasi_sample.y <= 1.2).astype(float)
    h = 0.15
    for z0 in (0.2, 0.5, 0.8):
        ours = local_linear_fit(quasi_sample, resp, z0, h)
        ref = oracle_local_linear(quasi_sample.z, resp, z0, h)
        assert ours == pytest.approx(ref, abs=1e-10)


def test_no_support_raises():
    from roybounds import ObservationSample
    s = ObservationSample(y=np.ones(50), d=np.zeros(50, dtype=int),
                          z=np.full(50, 0.5))
    with pytest.raises(NoSupportError):
        local_linear_fit(s, np.ones(50), 0.99, 0.01)


def test_tables_additivity(quasi_sample, small_grid):
    t = estimate_tables(quasi_sample, small_grid)
    assert np.allclose(t.F, t.F0 + t.F1, atol=1e-9)


def test_tables_monotone_and_bounded(quasi_sample, small_grid):
    t = estimate_tables(quasi_sample, small_grid)
    for m in (t.F, t.F0, t.F1):
        assert np.all(np.diff(m, axis=0) >= -1e-12)
        assert np.all((m >= -1e-12) & (m <= 1 + 1e-12))
    assert np.all(t.F0 <= t.F + 1e-12) and np.all(t.F1 <= t.F + 1e-12)
    assert np.all((t.p >= 0) & (t.p <= 1))


def test_tables_top_pinned(quasi_sample):
    # at a grid reaching max(y), F should reach 1 within kernel tolerance
    grid = EvaluationGrid.from_sample(quasi_sample, n_y=30, n_z=4)
    t = estimate_tables(quasi_sample, grid)
    assert np.all(t.F[-1, :] >= 0.995)


def test_identification_tol_scales():
    from roybounds.estimation import ConditionalCdfTable
    grid = EvaluationGrid(y=np.array([0.0, 1.0]), z=np.array([0.0, 1.0]))
    F = np.array([[0.2, 0.2], [1.0, 1.0]])
    F1 = np.array([[0.1, 0.1], [0.5, 0.5]])
    pop = ConditionalCdfTable(grid=grid, F=F, F0=F - F1, F1=F1,
                              p=np.array([0.5, 0.5]), bandwidth=None, n_obs=None)
    est = ConditionalCdfTable(grid=grid, F=F, F0=F - F1, F1=F1,
                              p=np.array([0.5, 0.5]), bandwidth=0.1, n_obs=2000)
    assert pop.identification_tol() == pytest.approx(1e-6)
    assert est.identification_tol() == pytest.approx(max(5 / 2000, 1e-3))


def test_raw_estimates_can_be_nonmonotone_then_repaired(quasi_dgp):
    s = generate_sample(quasi_dgp, 300, seed=21)
    grid = EvaluationGrid.from_sample(s, n_y=25, n_z=5)
    raw = estimate_tables(s, grid, monotonize=False)
    fixed = estimate_tables(s, grid, monotonize=True)
    assert np.all(np.diff(fixed.F, axis=0) >= -1e-12)
    assert np.allclose(fixed.F, fixed.F0 + fixed.F1, atol=1e-9)
    # small-sample raw tables are allowed to wiggle; repair must not move
    # columns that were already fine
    already = np.all(np.diff(raw.F, axis=0) >= 0, axis=0)
    already &= np.all(np.diff(raw.F0, axis=0) >= 0, axis=0)
    already &= np.all(np.diff(raw.F1, axis=0) >= 0, axis=0)
    if already.any():
        j = int(np.argmax(already))
        assert np.allclose(raw.F[:, j], fixed.F[:, j], atol=1e-12)


def test_conditional_mean_matches_oracle(quasi_sample):
    zg = np.array([0.3, 0.7])
    h = 0.18
    got = conditional_mean(quasi_sample, quasi_sample.y, zg, h)
    for i, z0 in enumerate(zg):
        ref = oracle_local_linear(quasi_sample.z, quasi_sample.y, z0, h)
        assert got[i] == pytest.approx(ref, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_local_linear_reproduces_affine_exactly(seed):
    # a local-linear smoother fits affine functions with zero bias
    from roybounds import ObservationSample
    rng = np.random.default_rng(seed)
    z = rng.uniform(0, 1, 300)
    a, b = rng.normal(size=2)
    resp = a + b * z
    s = ObservationSample(y=np.abs(resp) + 1.0, d=np.zeros(300, dtype=int), z=z)
    z0 = float(rng.uniform(0.2, 0.8))
    got = local_linear_fit(s, resp, z0, 0.25)
    assert got == pytest.approx(a + b * z0, abs=1e-8)
