"""Model layer: DGP families, sampling, cost geometry, monotonicity checks."""

import numpy as np
import pytest

from roybounds import (
    DgpSpec,
    EvaluationGrid,
    InvalidDgpError,
    ObservationSample,
    ZLaw,
    check_smiv,
    check_smiv_data,
    cost_from_utilities,
    generate_sample,
    true_cost,
    utility_pair,
)
from roybounds.errors import DomainError


# -- sample container ---------------------------------------------------------

def test_sample_validation_rejects_bad_d():
    with pytest.raises(DomainError):
        ObservationSample(y=[1.0, 2.0], d=[0, 2], z=[0.1, 0.2])


def test_sample_validation_rejects_y_below_support():
    with pytest.raises(DomainError):
        ObservationSample(y=[1.0, -0.5], d=[0, 1], z=[0.1, 0.2],
                          lower_support_bound=0.0)


def test_sample_arrays_read_only(quasi_sample):
    with pytest.raises(ValueError):
        quasi_sample.y[0] = 99.0


def test_grid_from_sample_covers_range(quasi_sample):
    grid = EvaluationGrid.from_sample(quasi_sample, n_y=50, n_z=6)
    assert grid.y[0] >= quasi_sample.y.min() - 1e-12
    assert grid.y[-1] <= quasi_sample.y.max() + 1e-12
    assert np.all(np.diff(grid.y) > 0) and np.all(np.diff(grid.z) > 0)
    assert grid.z.size == 6


def test_grid_rejects_non_increasing():
    with pytest.raises(DomainError):
        EvaluationGrid(y=np.array([1.0, 1.0, 2.0]), z=np.array([0.0, 1.0]))


# -- DGP validation -----------------------------------------------------------

def test_quasi_linear_rejects_negative_cost_gap():
    with pytest.raises(InvalidDgpError):
        DgpSpec.quasi_linear(mu0=0.0, mu1=0.0, sigma0=0.5, sigma1=0.5,
                             g0=(0.2, 0.0), g1=(0.5, 0.0))


def test_multiplicative_rejects_slope_order():
    with pytest.raises(InvalidDgpError):
        DgpSpec.multiplicative(mu0=0.0, mu1=0.0, sigma0=0.5, sigma1=0.5,
                               g0=0.8, g1=1.2)


def test_isoelastic_needs_rho_above_one():
    with pytest.raises(InvalidDgpError):
        DgpSpec.isoelastic(mu0=0.0, mu1=0.0, sigma0=0.5, sigma1=0.6, rho=0.9)


def test_unknown_family_rejected():
    with pytest.raises(InvalidDgpError):
        DgpSpec(family="nope")


# -- true cost closed forms ---------------------------------------------------

def test_quasi_linear_cost_is_g_gap(quasi_dgp):
    y = np.array([0.5, 1.0, 3.0])
    for z in (0.1, 0.6):
        gap = (1.5 - 0.8 * z) - 0.3
        assert true_cost(quasi_dgp, y, z) == pytest.approx([gap] * 3)


def test_multiplicative_cost_scales_income():
    dgp = DgpSpec.multiplicative(mu0=0.0, mu1=0.1, sigma0=0.5, sigma1=0.5,
                                 g0=1.0, g1=0.6)
    y = np.array([1.0, 2.0])
    # utility g1*y1 vs outcome scale: cost solves g1*(y - C) form  =>  C = (1 - g1/g0) y
    assert true_cost(dgp, y, 0.3) == pytest.approx((1 - 0.6) * y)


def test_pure_roy_cost_is_zero(pure_roy_dgp):
    y = np.linspace(0.2, 5.0, 9)
    assert np.all(true_cost(pure_roy_dgp, y, 0.4) == 0.0)


def test_cost_nonnegative_across_families(quasi_dgp):
    iso = DgpSpec.isoelastic(mu0=0.0, mu1=0.2, sigma0=0.45, sigma1=0.6, rho=1.8)
    quad = DgpSpec.quadratic(mu0=0.0, mu1=0.1, sigma0=0.4, sigma1=0.4,
                             eta0=0.1, eta1=0.09, f=0.7)
    y = np.linspace(0.1, 3.0, 21)
    for dgp in (quasi_dgp, iso, quad):
        for z in (0.05, 0.5, 0.95):
            c = true_cost(dgp, y, z)
            assert np.all(c >= -1e-12)
            psi = y - c
            assert np.all(np.diff(psi) >= -1e-9), "shifted income must increase"


def test_cost_from_utilities_matches_quasi_linear_closed_form():
    pair = utility_pair(
        DgpSpec.quasi_linear(mu0=0.0, mu1=0.0, sigma0=0.5, sigma1=0.5,
                             g0=(2.0, -1.0), g1=(0.5, 0.0)))
    for y in (0.5, 1.7, 4.0):
        for z in (0.2, 0.8):
            gap = (2.0 - 1.0 * z) - 0.5
            assert cost_from_utilities(pair, y, z) == pytest.approx(gap, abs=1e-8)


def test_cost_from_utilities_isoelastic_root():
    dgp = DgpSpec.isoelastic(mu0=0.0, mu1=0.0, sigma0=0.4, sigma1=0.5, rho=2.0)
    pair = utility_pair(dgp)
    y, z = 2.0, 0.5
    c_root = cost_from_utilities(pair, y, z)
    assert c_root == pytest.approx(true_cost(dgp, y, z), abs=1e-7)


# -- sampling -----------------------------------------------------------------

def test_generate_sample_deterministic(quasi_dgp):
    a = generate_sample(quasi_dgp, 500, seed=3)
    b = generate_sample(quasi_dgp, 500, seed=3)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.d, b.d)
    assert np.array_equal(a.z, b.z)


def test_generate_sample_seed_sensitivity(quasi_dgp):
    a = generate_sample(quasi_dgp, 500, seed=3)
    b = generate_sample(quasi_dgp, 500, seed=4)
    assert not np.array_equal(a.y, b.y)


def test_selection_follows_net_utility(quasi_dgp):
    # perfect foresight: D=1 iff Y1 - C(Y1,Z) >= Y0, ties to sector 1
    s = generate_sample(quasi_dgp, 2000, seed=5)
    assert 0.05 < s.d.mean() < 0.95


def test_pure_roy_sample_is_comonotone(pure_roy_dgp):
    # equal laws + perfect correlation: Y0 = Y1, everyone indifferent, all d=1
    s = generate_sample(pure_roy_dgp, 1000, seed=6)
    assert np.all(s.d == 1)


def test_z_law_choice_support():
    dgp = DgpSpec.pure_roy(mu=0.0, sigma=0.5,
                           z_law=ZLaw(kind="choice", values=(0.2, 0.7)))
    s = generate_sample(dgp, 400, seed=0)
    assert set(np.unique(s.z)) == {0.2, 0.7}


# -- serialization ------------------------------------------------------------

def test_dgp_json_round_trip(quasi_dgp):
    clone = DgpSpec.from_json(quasi_dgp.to_json())
    y = np.array([0.7, 1.9])
    assert np.allclose(true_cost(clone, y, 0.4), true_cost(quasi_dgp, y, 0.4))
    a = generate_sample(quasi_dgp, 200, seed=9)
    b = generate_sample(clone, 200, seed=9)
    assert np.array_equal(a.y, b.y)


def test_custom_dgp_not_serializable():
    dgp = DgpSpec.custom(cost_fn=lambda y, z: 0.1 * y, mu0=0.0, mu1=0.0,
                         sigma0=0.5, sigma1=0.5)
    with pytest.raises(DomainError):
        dgp.to_json()


# -- stochastic monotonicity check --------------------------------------------

def _probe_grids(sample, n_y=25, n_z=5):
    y = np.unique(np.quantile(sample.y, np.linspace(0.05, 0.95, n_y)))
    z = np.linspace(0.1, 0.9, n_z)
    return y, z


def test_check_smiv_passes_on_valid_dgp(quasi_dgp):
    s = generate_sample(quasi_dgp, 8000, seed=11)
    y, z = _probe_grids(s)
    report = check_smiv_data(s, lambda yy, zz: true_cost(quasi_dgp, yy, zz),
                             y, z, tol=0.05)
    assert report.ok, report.worst_violation


def test_check_smiv_flags_reversed_instrument(quasi_dgp):
    # flipping z reverses the monotone direction and must fail the check
    s = generate_sample(quasi_dgp, 8000, seed=11)
    flipped = ObservationSample(y=s.y, d=s.d, z=1.0 - s.z,
                                lower_support_bound=s.lower_support_bound)
    y, z = _probe_grids(flipped)
    report = check_smiv_data(flipped,
                             lambda yy, zz: true_cost(quasi_dgp, yy, 1.0 - zz),
                             y, z, tol=0.05)
    assert not report.ok


def test_check_smiv_dispatcher_dgp_mode(quasi_dgp):
    rep = check_smiv(quasi_dgp, np.linspace(0.3, 3.0, 12),
                     np.linspace(0.1, 0.9, 4))
    assert rep.ok and rep.mode == "dgp"
