"""Sharp bounds on sector-switching costs in a two-sector selection model.

The package estimates conditional outcome distributions on a grid, turns
stochastic-monotonicity restrictions on an instrument into envelope bounds
on the counterfactual distributions, inverts those envelopes into pointwise
bounds on the nonpecuniary cost of sector 1, and wraps the lower bound in a
one-sided uniform confidence band.
"""

from .bounds import (
    BoundSurface,
    IfBoundCurve,
    RandomCostCdfBounds,
    TestabilityReport,
    cost_bounds_if,
    cost_bounds_pf,
    if_bounds_from_moments,
    lower_bound_interpolator,
    random_cost_bounds,
    resimulate_sample,
    testability_if,
)
from .coverage import CoverageReport, default_coverage_grid, run_coverage
from .envelopes import (
    CrossingReport,
    EnvelopeTable,
    SandwichTable,
    crossing_test,
    envelope_table,
    generalized_inverse,
    lower_envelope,
    sandwich,
    upper_envelope,
)
from .errors import (
    ConfigError,
    DomainError,
    InvalidDgpError,
    InvalidUtilityError,
    NoSupportError,
    RoyBoundsError,
)
from .estimation import (
    ConditionalCdfTable,
    conditional_mean,
    estimate_tables,
    local_linear_fit,
    silverman_bandwidth,
)
from .inference import (
    BootstrapResult,
    ConfidenceBand,
    GTable,
    bootstrap_errors,
    build_g_table,
    clr_band,
    confidence_band,
    default_epsilon,
    default_selection_subset,
    invert_g,
    monotonize_eps,
)
from .model import (
    DgpSpec,
    EvaluationGrid,
    ObservationSample,
    SectorUtilityPair,
    SmivReport,
    ZLaw,
    check_smiv,
    check_smiv_data,
    cost_from_utilities,
    generate_sample,
    true_cost,
    utility_pair,
)
from .population import check_smiv_dgp, lower_orthant_table, population_tables
from .reporting import (
    SurvivalSummary,
    band_values_at,
    cost_survival,
    ingest_csv,
    read_long_csv,
    write_band_csv,
    write_sample_csv,
    write_surface_csv,
    write_table_csv,
)

__version__ = "0.1.0"

__all__ = [
    "BoundSurface", "IfBoundCurve", "RandomCostCdfBounds", "TestabilityReport",
    "cost_bounds_if", "cost_bounds_pf", "if_bounds_from_moments",
    "lower_bound_interpolator", "random_cost_bounds", "resimulate_sample",
    "testability_if",
    "CoverageReport", "default_coverage_grid", "run_coverage",
    "CrossingReport", "EnvelopeTable", "SandwichTable", "crossing_test",
    "envelope_table", "generalized_inverse", "lower_envelope", "sandwich",
    "upper_envelope",
    "ConfigError", "DomainError", "InvalidDgpError", "InvalidUtilityError",
    "NoSupportError", "RoyBoundsError",
    "ConditionalCdfTable", "conditional_mean", "estimate_tables",
    "local_linear_fit", "silverman_bandwidth",
    "BootstrapResult", "ConfidenceBand", "GTable", "bootstrap_errors",
    "build_g_table", "clr_band", "confidence_band", "default_epsilon",
    "default_selection_subset", "invert_g", "monotonize_eps",
    "DgpSpec", "EvaluationGrid", "ObservationSample", "SectorUtilityPair",
    "SmivReport", "ZLaw", "check_smiv", "check_smiv_data",
    "cost_from_utilities", "generate_sample", "true_cost", "utility_pair",
    "check_smiv_dgp", "lower_orthant_table", "population_tables",
    "SurvivalSummary", "band_values_at", "cost_survival", "ingest_csv",
    "read_long_csv", "write_band_csv", "write_sample_csv",
    "write_surface_csv", "write_table_csv",
    "__version__",
]
