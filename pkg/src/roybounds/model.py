"""Core model objects: observed samples, sector utilities, synthetic DGPs.

The observable data are triples (Y, D, Z): an income Y bounded below, a
binary sector indicator D, and a scalar selection shifter Z.  Synthetic
data-generating processes pair lognormal potential incomes (Y0, Y1) with a
known non-pecuniary cost C(y, z) of working in sector 1, so every estimator
in the package can be validated against analytic ground truth.

Built-in cost families (each representable through a pair of sector
utilities, see :func:`utility_pair`):

    pure_roy        C = 0
    quasi_linear    C = g0(z) - g1(z)
    multiplicative  C = y * (1 - g1(z) / g0(z))
    quadratic       C = (eta1(z) - eta0(z) * f(z)) * y**2
    isoelastic      C = (1 - exp((s0(z)**2 - s1(z)**2) * rho / 2)) * y
    custom          user-supplied callable

Sector choice compares y1 - C(y1, z) against y0 record by record (perfect
foresight) or compares the two conditional means given z (imperfect
foresight).  Ties go to sector 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy.stats import norm

from .errors import DomainError, InvalidDgpError, InvalidUtilityError

FAMILIES = ("pure_roy", "quasi_linear", "multiplicative", "quadratic", "isoelastic", "custom")

_PROBE_POINTS = 33  # z probe resolution for closed-form shape validation


@dataclass(frozen=True)
class AffineInZ:
    """Affine map z -> intercept + slope * z, the JSON-portable parameter shape."""

    intercept: float
    slope: float = 0.0

    def __call__(self, z):
        return self.intercept + self.slope * np.asarray(z, dtype=float)

    def spec(self) -> dict:
        return {"intercept": self.intercept, "slope": self.slope}


def as_zparam(value):
    """Coerce a scalar, (intercept, slope) pair, dict, or callable to a map of z."""
    if value is None:
        return None
    if callable(value):
        return value
    if isinstance(value, dict):
        return AffineInZ(float(value["intercept"]), float(value.get("slope", 0.0)))
    if isinstance(value, (tuple, list)):
        a, b = value
        return AffineInZ(float(a), float(b))
    return AffineInZ(float(value))


def zparam_spec(fn) -> dict | float | None:
    """JSON form of a z parameter; raises for opaque callables."""
    if fn is None:
        return None
    if isinstance(fn, AffineInZ):
        return fn.spec() if fn.slope != 0.0 else fn.intercept
    raise DomainError("parameter is an opaque callable and cannot be serialized")


@dataclass(frozen=True)
class ZLaw:
    """Marginal law of the selection shifter Z.

    kind is one of "uniform" (low/high), "choice" (values with optional
    probs), or "fixed" (a single value).  The law is an explicit model
    input: nothing in the bounds machinery identifies it, so synthetic
    studies must state it.
    """

    kind: str = "uniform"
    low: float = 0.0
    high: float = 1.0
    values: tuple = ()
    probs: tuple = ()
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "choice", "fixed"):
            raise DomainError(f"unknown z law kind {self.kind!r}")
        if self.kind == "uniform" and not self.low < self.high:
            raise DomainError("uniform z law needs low < high")
        if self.kind == "choice":
            if len(self.values) == 0:
                raise DomainError("choice z law needs at least one value")
            if self.probs and len(self.probs) != len(self.values):
                raise DomainError("probs must match values")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, size=n)
        if self.kind == "choice":
            probs = np.asarray(self.probs, dtype=float) if self.probs else None
            return rng.choice(np.asarray(self.values, dtype=float), size=n, p=probs)
        return np.full(n, float(self.value))

    def support_probe(self, k: int = _PROBE_POINTS) -> np.ndarray:
        """Representative z values used for closed-form shape validation."""
        if self.kind == "uniform":
            return np.linspace(self.low, self.high, k)
        if self.kind == "choice":
            return np.asarray(self.values, dtype=float)
        return np.array([self.value])

    def to_json(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform", "low": self.low, "high": self.high}
        if self.kind == "choice":
            out = {"kind": "choice", "values": list(self.values)}
            if self.probs:
                out["probs"] = list(self.probs)
            return out
        return {"kind": "fixed", "value": self.value}

    @staticmethod
    def from_json(obj: dict) -> "ZLaw":
        kind = obj.get("kind", "uniform")
        if kind == "uniform":
            return ZLaw(kind="uniform", low=float(obj["low"]), high=float(obj["high"]))
        if kind == "choice":
            return ZLaw(
                kind="choice",
                values=tuple(float(v) for v in obj["values"]),
                probs=tuple(float(p) for p in obj.get("probs", ())),
            )
        return ZLaw(kind="fixed", value=float(obj["value"]))


@dataclass(frozen=True)
class ObservationSample:
    """Immutable record sample (y, d, z) with a known lower income bound.

    Invariants: equal lengths, finite values, d in {0, 1}, and
    y >= lower_support_bound everywhere.
    """

    y: np.ndarray
    d: np.ndarray
    z: np.ndarray
    lower_support_bound: float = 0.0

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        d = np.asarray(self.d)
        z = np.asarray(self.z, dtype=float)
        if not (y.ndim == d.ndim == z.ndim == 1):
            raise DomainError("y, d, z must be one-dimensional")
        if not (y.size == d.size == z.size):
            raise DomainError("y, d, z must have equal length")
        if y.size == 0:
            raise DomainError("empty sample")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise DomainError("non-finite y or z values")
        dd = d.astype(float)
        if not np.all((dd == 0.0) | (dd == 1.0)):
            raise DomainError("d must be binary 0/1")
        if np.any(y < self.lower_support_bound - 1e-12):
            bad = int(np.argmax(y < self.lower_support_bound - 1e-12))
            raise DomainError(
                f"y below lower support bound {self.lower_support_bound!r} at row {bad}"
            )
        d_int = dd.astype(np.int8)
        for name, arr in (("y", y), ("d", d_int), ("z", z)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def n_distinct_z(self) -> int:
        return int(np.unique(self.z).size)

    def require_z_variation(self) -> None:
        """Bound operations on samples need at least two distinct z values."""
        if self.n_distinct_z < 2:
            raise DomainError("bound operations need at least 2 distinct z values")


@dataclass(frozen=True)
class EvaluationGrid:
    """Strictly increasing evaluation points in y and z."""

    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z, dtype=float)
        for name, arr in (("y", y), ("z", z)):
            if arr.ndim != 1 or arr.size == 0:
                raise DomainError(f"{name} grid must be a non-empty vector")
            if arr.size > 1 and not np.all(np.diff(arr) > 0):
                raise DomainError(f"{name} grid must be strictly increasing")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple:
        return (self.y.size, self.z.size)

    def max_y_spacing(self) -> float:
        return float(np.max(np.diff(self.y))) if self.y.size > 1 else 0.0

    @staticmethod
    def from_sample(sample: ObservationSample, n_y: int = 200, n_z: int = 8) -> "EvaluationGrid":
        """Default grid: n_y empirical quantiles of y, n_z even points over the z range."""
        probs = np.linspace(0.0, 1.0, n_y)
        y = np.unique(np.quantile(sample.y, probs))
        zmin, zmax = float(np.min(sample.z)), float(np.max(sample.z))
        if zmin == zmax:
            z = np.array([zmin])
        else:
            z = np.linspace(zmin, zmax, n_z)
        return EvaluationGrid(y=y, z=z)


@dataclass(frozen=True)
class SectorUtilityPair:
    """Sector utilities u0(y, z), u1(y, z), increasing in y at every z."""

    u0: Callable
    u1: Callable

    def check_monotone(self, y_points: Sequence[float], z_points: Sequence[float],
                       tol: float = 1e-12) -> None:
        """Spot-check monotonicity in y on a probe grid; raises on violation."""
        ys = np.sort(np.asarray(y_points, dtype=float))
        if ys.size < 2:
            return
        for z in np.asarray(z_points, dtype=float):
            for u, name in ((self.u0, "u0"), (self.u1, "u1")):
                vals = np.array([float(u(y, z)) for y in ys])
                if np.any(np.diff(vals) <= -tol):
                    raise InvalidUtilityError(f"{name} is not increasing in y at z={z!r}")


def cost_from_utilities(pair: SectorUtilityPair, y: float, z: float,
                        tol: float = 1e-10) -> float:
    """Cost implied by a utility pair: y - u0^{-1}(u1(y, z), z).

    The inverse is taken in the first argument of u0 by bracketed
    root-finding (bracket expanded geometrically, then Brent) to absolute
    tolerance ``tol``.  Invariant under common strictly increasing
    transformations of both utilities.

    Raises
    ------
    InvalidUtilityError
        if u0 is detected non-monotone on the bracket.
    DomainError
        if no bracket containing the root can be found.
    """
    y = float(y)
    z = float(z)
    target = float(pair.u1(y, z))

    def g(x: float) -> float:
        return float(pair.u0(x, z)) - target

    lo, hi = y - 1.0, y + 1.0
    glo, ghi = g(lo), g(hi)
    width = 2.0
    for _ in range(200):
        if glo > ghi + 1e-12:
            raise InvalidUtilityError("u0 decreasing over the search bracket")
        if glo <= 0.0 <= ghi:
            break
        width *= 2.0
        if glo > 0.0:
            lo -= width
            glo = g(lo)
        if ghi < 0.0:
            hi += width
            ghi = g(hi)
    else:
        raise DomainError("could not bracket u0 inverse; u0 may not span u1's value")

    probes = np.array([g(x) for x in np.linspace(lo, hi, 9)])
    if np.any(np.diff(probes) < -1e-9 * max(1.0, np.max(np.abs(probes)))):
        raise InvalidUtilityError("u0 non-monotone on the bracket")

    root = optimize.brentq(g, lo, hi, xtol=min(tol, 1e-10) * 0.1, rtol=8.9e-16)
    return y - root


def _const(value: float) -> AffineInZ:
    return AffineInZ(float(value))


@dataclass(frozen=True)
class DgpSpec:
    """Synthetic data-generating process with a known cost function.

    Potential incomes are Y_d = exp(X_d) with X_d | Z=z normal with location
    mu_d(z) and scale sigma_d(z), and corr(X0, X1) = outcome_corr.  The
    quadratic family additionally truncates both X_d so that incomes stay
    under the curvature cap min_d 1/(2 eta_d); this keeps shifted income
    increasing on the support.

    ``foresight`` is "perfect" (record-level comparison) or "imperfect"
    (conditional-mean comparison given z, so selection is deterministic in
    z).  ``cost_fn`` is only read by the "custom" family.
    """

    family: str
    mu0: Callable = field(default_factory=lambda: _const(0.0))
    mu1: Callable = field(default_factory=lambda: _const(0.0))
    sigma0: Callable = field(default_factory=lambda: _const(1.0))
    sigma1: Callable = field(default_factory=lambda: _const(1.0))
    outcome_corr: float = 0.0
    g0: Callable | None = None
    g1: Callable | None = None
    eta0: Callable | None = None
    eta1: Callable | None = None
    f: Callable | None = None
    rho: float | None = None
    cost_fn: Callable | None = None
    foresight: str = "perfect"
    lower_support_bound: float = 0.0
    z_law: ZLaw = field(default_factory=ZLaw)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidDgpError(f"unknown family {self.family!r}")
        if self.foresight not in ("perfect", "imperfect"):
            raise InvalidDgpError(f"unknown foresight {self.foresight!r}")
        if not -1.0 <= self.outcome_corr <= 1.0:
            raise InvalidDgpError("outcome_corr must lie in [-1, 1]")
        for name in ("mu0", "mu1", "sigma0", "sigma1", "g0", "g1", "eta0", "eta1", "f"):
            object.__setattr__(self, name, as_zparam(getattr(self, name)))
        if self.family == "quasi_linear" and (self.g0 is None or self.g1 is None):
            raise InvalidDgpError("quasi_linear needs g0 and g1")
        if self.family == "multiplicative" and (self.g0 is None or self.g1 is None):
            raise InvalidDgpError("multiplicative needs g0 and g1")
        if self.family == "quadratic" and (self.eta0 is None or self.eta1 is None or self.f is None):
            raise InvalidDgpError("quadratic needs eta0, eta1 and f")
        if self.family == "isoelastic" and self.rho is None:
            raise InvalidDgpError("isoelastic needs rho")
        if self.family == "custom" and self.cost_fn is None:
            raise InvalidDgpError("custom family needs cost_fn")
        self._validate_shape()

    # -- closed-form validation of the two cost-shape restrictions ----------

    def _z_probe(self) -> np.ndarray:
        return self.z_law.support_probe()

    def _validate_shape(self) -> None:
        z = self._z_probe()
        s0 = np.atleast_1d(self.sigma0(z)).astype(float)
        s1 = np.atleast_1d(self.sigma1(z)).astype(float)
        if np.any(s0 <= 0) or np.any(s1 <= 0):
            raise InvalidDgpError("outcome scales must be positive")
        if self.family == "quasi_linear":
            gap = np.atleast_1d(self.g0(z) - self.g1(z))
            if np.any(gap < -1e-12):
                raise InvalidDgpError("quasi_linear cost g0 - g1 must be non-negative")
        elif self.family == "multiplicative":
            g0 = np.atleast_1d(self.g0(z)).astype(float)
            g1 = np.atleast_1d(self.g1(z)).astype(float)
            if np.any(g0 <= 0) or np.any(g1 <= 0):
                raise InvalidDgpError("multiplicative utility slopes must be positive")
            if np.any(g1 > g0 * (1 + 1e-12)):
                raise InvalidDgpError("multiplicative cost needs g1 <= g0")
        elif self.family == "quadratic":
            e0 = np.atleast_1d(self.eta0(z)).astype(float)
            e1 = np.atleast_1d(self.eta1(z)).astype(float)
            fr = np.atleast_1d(self.f(z)).astype(float)
            if np.any(e0 <= 0) or np.any(e1 <= 0):
                raise InvalidDgpError("quadratic curvatures must be positive")
            if np.any(fr <= 0) or np.any(fr > 1 + 1e-12):
                raise InvalidDgpError("quadratic moment ratio f must lie in (0, 1]")
            if np.any(e1 - e0 * fr < -1e-12):
                raise InvalidDgpError("quadratic cost eta1 - eta0*f must be non-negative")
        elif self.family == "isoelastic":
            if self.rho <= 1.0:
                raise InvalidDgpError("isoelastic needs rho > 1")
            if np.any(s0 > s1 + 1e-12):
                raise InvalidDgpError("isoelastic cost needs sigma0 <= sigma1")

    # -- family constructors -------------------------------------------------

    @staticmethod
    def pure_roy(mu, sigma, outcome_corr: float = 1.0, **kw) -> "DgpSpec":
        """Zero-cost benchmark; default comonotone equal laws give Y0 = Y1 a.s."""
        return DgpSpec(family="pure_roy", mu0=mu, mu1=mu, sigma0=sigma, sigma1=sigma,
                       outcome_corr=outcome_corr, **kw)

    @staticmethod
    def quasi_linear(mu0, mu1, sigma0, sigma1, g0, g1, **kw) -> "DgpSpec":
        return DgpSpec(family="quasi_linear", mu0=mu0, mu1=mu1, sigma0=sigma0,
                       sigma1=sigma1, g0=g0, g1=g1, **kw)

    @staticmethod
    def multiplicative(mu0, mu1, sigma0, sigma1, g0, g1, **kw) -> "DgpSpec":
        return DgpSpec(family="multiplicative", mu0=mu0, mu1=mu1, sigma0=sigma0,
                       sigma1=sigma1, g0=g0, g1=g1, **kw)

    @staticmethod
    def quadratic(mu0, mu1, sigma0, sigma1, eta0, eta1, f, **kw) -> "DgpSpec":
        return DgpSpec(family="quadratic", mu0=mu0, mu1=mu1, sigma0=sigma0,
                       sigma1=sigma1, eta0=eta0, eta1=eta1, f=f, **kw)

    @staticmethod
    def isoelastic(mu0, mu1, sigma0, sigma1, rho, **kw) -> "DgpSpec":
        return DgpSpec(family="isoelastic", mu0=mu0, mu1=mu1, sigma0=sigma0,
                       sigma1=sigma1, rho=rho, **kw)

    @staticmethod
    def custom(cost_fn, mu0, mu1, sigma0, sigma1, **kw) -> "DgpSpec":
        return DgpSpec(family="custom", cost_fn=cost_fn, mu0=mu0, mu1=mu1,
                       sigma0=sigma0, sigma1=sigma1, **kw)

    # -- cost geometry --------------------------------------------------------

    def cost(self, y, z):
        return true_cost(self, y, z)

    def shifted_income(self, y, z):
        """psi_z(y) = y - C(y, z); increasing in y on the support."""
        return np.asarray(y, dtype=float) - true_cost(self, y, z)

    def shifted_income_inverse(self, v, z):
        """Inverse of psi_z; +inf where the threshold never binds, -inf below range."""
        v = np.asarray(v, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.family == "pure_roy":
            return v.copy()
        if self.family == "quasi_linear":
            return v + (self.g0(z) - self.g1(z))
        if self.family in ("multiplicative", "isoelastic"):
            kappa = self._linear_cost_slope(z)  # psi(y) = kappa * y, kappa in (0, 1]
            out = np.where(v > 0, v / kappa, np.where(v < 0, -np.inf, 0.0))
            return out
        if self.family == "quadratic":
            kap = np.asarray(self.eta1(z) - self.eta0(z) * self.f(z), dtype=float)
            cap = self.support_cap()
            with np.errstate(invalid="ignore"):
                disc = 1.0 - 4.0 * kap * v
                root = np.where(disc >= 0, (1.0 - np.sqrt(np.maximum(disc, 0.0))) / (2.0 * kap), np.inf)
            out = np.where(v <= 0, np.where(v < 0, -np.inf, 0.0), root)
            # beyond the range of psi on the truncated support nothing binds
            top = self.shifted_income(cap, z)
            return np.where(v > top, np.inf, out)
        # custom: bracketed root-finding per point
        def inv_one(vv: float, zz: float) -> float:
            if vv <= 0:
                return 0.0 if vv == 0 else -np.inf
            fn = lambda x: float(self.shifted_income(x, zz)) - vv
            lo, hi = 1e-12, max(2.0 * vv, 1.0)
            for _ in range(200):
                if fn(hi) >= 0:
                    break
                hi *= 2.0
            else:
                return np.inf
            return float(optimize.brentq(fn, lo, hi, xtol=1e-12, rtol=8.9e-16))
        if v.ndim == 0:
            return np.float64(inv_one(float(v), float(z)))
        zb = np.broadcast_to(z, v.shape)
        return np.array([inv_one(float(a), float(b)) for a, b in zip(v.ravel(), zb.ravel())]).reshape(v.shape)

    def _linear_cost_slope(self, z):
        """kappa(z) with psi_z(y) = kappa * y for the two scale families."""
        if self.family == "multiplicative":
            return np.asarray(self.g1(z), dtype=float) / np.asarray(self.g0(z), dtype=float)
        if self.family == "isoelastic":
            s0 = np.asarray(self.sigma0(z), dtype=float)
            s1 = np.asarray(self.sigma1(z), dtype=float)
            return np.exp((s0**2 - s1**2) * self.rho / 2.0)
        raise InvalidDgpError("no linear cost slope for this family")

    def support_cap(self) -> float:
        """Almost-sure income cap (quadratic family only), inf otherwise."""
        if self.family != "quadratic":
            return math.inf
        z = self._z_probe()
        e0 = np.atleast_1d(self.eta0(z)).astype(float)
        e1 = np.atleast_1d(self.eta1(z)).astype(float)
        return float(np.min(1.0 / (2.0 * np.maximum(e0, e1))))

    # -- conditional moments (used by imperfect foresight) --------------------

    def _log_cap(self) -> float:
        cap = self.support_cap()
        return math.log(cap) if math.isfinite(cap) else math.inf

    def outcome_mean(self, d: int, z, power: int = 1):
        """E[Y_d^power | z] for the (possibly truncated) lognormal margin."""
        mu = np.asarray((self.mu1 if d == 1 else self.mu0)(z), dtype=float)
        sg = np.asarray((self.sigma1 if d == 1 else self.sigma0)(z), dtype=float)
        return _lognormal_moment(mu, sg, power, self._log_cap())

    def mean_shifted_income(self, z):
        """E[Y1 - C(Y1, z) | z], the sector-1 attractiveness index."""
        z = np.asarray(z, dtype=float)
        m1 = self.outcome_mean(1, z)
        if self.family == "pure_roy":
            return m1
        if self.family == "quasi_linear":
            return m1 - (self.g0(z) - self.g1(z))
        if self.family in ("multiplicative", "isoelastic"):
            return self._linear_cost_slope(z) * m1
        if self.family == "quadratic":
            kap = np.asarray(self.eta1(z) - self.eta0(z) * self.f(z), dtype=float)
            return m1 - kap * self.outcome_mean(1, z, power=2)
        return _gauss_hermite_mean(self, z)

    # -- serialization ---------------------------------------------------------

    def to_json(self) -> dict:
        params: dict = {
            "mu0": zparam_spec(self.mu0), "mu1": zparam_spec(self.mu1),
            "sigma0": zparam_spec(self.sigma0), "sigma1": zparam_spec(self.sigma1),
            "outcome_corr": self.outcome_corr,
        }
        for name in ("g0", "g1", "eta0", "eta1", "f"):
            fn = getattr(self, name)
            if fn is not None:
                params[name] = zparam_spec(fn)
        if self.rho is not None:
            params["rho"] = self.rho
        if self.family == "custom":
            raise DomainError("custom DGPs carry opaque callables and cannot be serialized")
        return {
            "family": self.family,
            "params": params,
            "foresight": self.foresight,
            "z_law": self.z_law.to_json(),
            "lower_support_bound": self.lower_support_bound,
        }

    @staticmethod
    def from_json(obj: dict) -> "DgpSpec":
        params = dict(obj.get("params", {}))
        corr = float(params.pop("outcome_corr", 0.0))
        rho = params.pop("rho", None)
        kw = {k: params[k] for k in params}
        return DgpSpec(
            family=obj["family"],
            outcome_corr=corr,
            rho=float(rho) if rho is not None else None,
            foresight=obj.get("foresight", "perfect"),
            lower_support_bound=float(obj.get("lower_support_bound", 0.0)),
            z_law=ZLaw.from_json(obj["z_law"]) if "z_law" in obj else ZLaw(),
            **kw,
        )


def _lognormal_moment(mu, sigma, k: int, log_cap: float = math.inf):
    """E[Y^k] for Y = exp(X), X ~ N(mu, sigma^2) truncated to X <= log_cap."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    base = np.exp(k * mu + 0.5 * (k * sigma) ** 2)
    if not math.isfinite(log_cap):
        return base
    a = (log_cap - mu) / sigma
    return base * norm.cdf(a - k * sigma) / norm.cdf(a)


_HERMITE_NODES, _HERMITE_WEIGHTS = np.polynomial.hermite_e.hermegauss(96)


def _gauss_hermite_mean(dgp: DgpSpec, z) -> np.ndarray:
    """Quadrature fallback for E[Y1 - C(Y1, z) | z] with custom costs."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty(z.shape)
    w = _HERMITE_WEIGHTS / math.sqrt(2.0 * math.pi)
    log_cap = dgp._log_cap()
    for i, zz in enumerate(z):
        x = float(dgp.mu1(zz)) + float(dgp.sigma1(zz)) * _HERMITE_NODES
        if math.isfinite(log_cap):
            keep = x <= log_cap
            ww = w[keep] / np.sum(w[keep])
            x = x[keep]
        else:
            ww = w
        y = np.exp(x)
        out[i] = float(np.sum(ww * (y - true_cost(dgp, y, zz))))
    return out if out.size > 1 else out[0]


def true_cost(dgp: DgpSpec, y, z):
    """Analytic cost C(y, z) of the DGP; raises if the closed form turns negative."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if dgp.family == "pure_roy":
        return np.zeros(np.broadcast(y, z).shape) if (y.ndim or z.ndim) else np.float64(0.0)
    if dgp.family == "quasi_linear":
        cost = (dgp.g0(z) - dgp.g1(z)) * np.ones_like(y)
    elif dgp.family == "multiplicative":
        cost = y * (1.0 - dgp.g1(z) / dgp.g0(z))
    elif dgp.family == "quadratic":
        cost = (dgp.eta1(z) - dgp.eta0(z) * dgp.f(z)) * y**2
    elif dgp.family == "isoelastic":
        s0 = np.asarray(dgp.sigma0(z), dtype=float)
        s1 = np.asarray(dgp.sigma1(z), dtype=float)
        cost = (1.0 - np.exp((s0**2 - s1**2) * dgp.rho / 2.0)) * y
    else:
        cost = np.asarray(dgp.cost_fn(y, z), dtype=float)
    if np.any(np.asarray(cost) < -1e-12):
        raise InvalidDgpError("analytic cost is negative on the requested points")
    return np.maximum(cost, 0.0)


def utility_pair(dgp: DgpSpec) -> SectorUtilityPair:
    """Static utility pair whose implied cost equals the family closed form.

    The quasi-linear and multiplicative pairs are the structural sector
    utilities themselves.  The quadratic and isoelastic families price risk
    through conditional moments, so the returned pair is the cost-equivalent
    static representation (u0 the identity, u1 shifted income).
    """
    if dgp.family == "quasi_linear":
        return SectorUtilityPair(
            u0=lambda y, z: y + float(dgp.g0(z)),
            u1=lambda y, z: y + float(dgp.g1(z)),
        )
    if dgp.family == "multiplicative":
        return SectorUtilityPair(
            u0=lambda y, z: float(dgp.g0(z)) * y,
            u1=lambda y, z: float(dgp.g1(z)) * y,
        )
    if dgp.family == "pure_roy":
        return SectorUtilityPair(u0=lambda y, z: y, u1=lambda y, z: y)
    return SectorUtilityPair(
        u0=lambda y, z: y,
        u1=lambda y, z: y - float(true_cost(dgp, y, z)),
    )


def _philox(seed) -> np.random.Generator:
    """Counter-based generator so replications can split seeds safely."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def generate_sample(dgp: DgpSpec, n: int, seed, z_law: ZLaw | None = None) -> ObservationSample:
    """Draw n records (y, d, z) from the DGP; bit-reproducible given a seed.

    Sector choice uses the record-level rule 1{y1 - C(y1, z) >= y0} under
    perfect foresight (ties to sector 1) and the conditional-mean rule
    1{E[Y1 - C(Y1, Z)|z] >= E[Y0|z]} under imperfect foresight.
    """
    if n < 1:
        raise DomainError("sample size must be positive")
    law = z_law if z_law is not None else dgp.z_law
    rng = _philox(seed)
    z = law.draw(rng, n)
    r = dgp.outcome_corr
    a = rng.standard_normal(n)
    b = rng.standard_normal(n)
    u0 = a
    u1 = r * a + math.sqrt(max(0.0, 1.0 - r * r)) * b
    x0 = np.asarray(dgp.mu0(z), dtype=float) + np.asarray(dgp.sigma0(z), dtype=float) * u0
    x1 = np.asarray(dgp.mu1(z), dtype=float) + np.asarray(dgp.sigma1(z), dtype=float) * u1

    log_cap = dgp._log_cap()
    if math.isfinite(log_cap):
        # rejection keeps the conditional-on-cap joint law exact
        for _ in range(1000):
            bad = (x0 > log_cap) | (x1 > log_cap)
            if not np.any(bad):
                break
            m = int(np.sum(bad))
            a2 = rng.standard_normal(m)
            b2 = rng.standard_normal(m)
            u0b = a2
            u1b = r * a2 + math.sqrt(max(0.0, 1.0 - r * r)) * b2
            zb = z[bad]
            x0[bad] = np.asarray(dgp.mu0(zb), dtype=float) + np.asarray(dgp.sigma0(zb), dtype=float) * u0b
            x1[bad] = np.asarray(dgp.mu1(zb), dtype=float) + np.asarray(dgp.sigma1(zb), dtype=float) * u1b
        else:
            raise InvalidDgpError("support truncation rejects nearly all draws")

    y0 = np.exp(x0)
    y1 = np.exp(x1)
    if dgp.foresight == "perfect":
        d = dgp.shifted_income(y1, z) >= y0
    else:
        d = np.asarray(dgp.mean_shifted_income(z) >= dgp.outcome_mean(0, z))
    y = np.where(d, y1, y0)
    return ObservationSample(y=y, d=d.astype(np.int8), z=z,
                             lower_support_bound=dgp.lower_support_bound)


@dataclass(frozen=True)
class SmivReport:
    """Outcome of a stochastic-monotonicity check."""

    ok: bool
    worst_violation: float
    location: tuple | None
    mode: str


def check_smiv(source, y_grid, z_grid, tol: float = 1e-9, **kwargs) -> SmivReport:
    """Check stochastic monotonicity of the selection-relevant pair in z.

    DGP mode (``source`` is a :class:`DgpSpec`): verifies that the joint
    lower-orthant probabilities P(Y0 <= a, Y1 - C(Y1, z) <= b | z) are non
    increasing in z over the grid.  Data mode (``source`` is an
    :class:`ObservationSample`): verifies the observable implication that
    P(Y - D*C(Y, Z) <= y | z) is non increasing in z for a candidate cost
    passed as ``cost=`` (callable of (y, z)).
    """
    y_grid = np.asarray(y_grid, dtype=float)
    z_grid = np.asarray(z_grid, dtype=float)
    if y_grid.size == 0 or z_grid.size == 0:
        raise DomainError("check_smiv needs non-empty grids")
    if isinstance(source, DgpSpec):
        from .population import check_smiv_dgp

        return check_smiv_dgp(source, y_grid, z_grid, tol=tol, **kwargs)
    if isinstance(source, ObservationSample):
        cost = kwargs.pop("cost", None)
        if cost is None:
            raise DomainError("data mode needs a candidate cost via cost=")
        return check_smiv_data(source, cost, y_grid, z_grid, tol=tol, **kwargs)
    raise DomainError("source must be a DgpSpec or an ObservationSample")


def check_smiv_data(sample: ObservationSample, cost, y_grid, z_grid,
                    tol: float = 1e-9, bandwidth: float | None = None) -> SmivReport:
    """Observable-implication check on data under a candidate cost."""
    from .estimation import estimate_tables

    y_grid = np.asarray(y_grid, dtype=float)
    z_grid = np.asarray(z_grid, dtype=float)
    c = np.asarray(cost(sample.y, sample.z), dtype=float)
    v = sample.y - sample.d * c
    shifted = ObservationSample(y=v, d=sample.d, z=sample.z,
                                lower_support_bound=float(min(np.min(v), 0.0)))
    table = estimate_tables(shifted, EvaluationGrid(y=y_grid, z=z_grid), bandwidth=bandwidth)
    return _monotone_in_z_report(table.F, list(y_grid), z_grid, tol, mode="data")


def _monotone_in_z_report(mat: np.ndarray, row_labels, z_grid, tol: float, mode: str) -> SmivReport:
    """Non-increasing-in-z check for a matrix with one column per z."""
    if mat.shape[1] < 2:
        return SmivReport(ok=True, worst_violation=0.0, location=None, mode=mode)
    inc = np.diff(mat, axis=1)  # positive entries are violations
    worst = float(np.max(inc))
    if worst <= tol:
        return SmivReport(ok=True, worst_violation=max(worst, 0.0), location=None, mode=mode)
    iy, iz = np.unravel_index(int(np.argmax(inc)), inc.shape)
    loc = (row_labels[iy], float(z_grid[iz + 1]))
    return SmivReport(ok=False, worst_violation=worst, location=loc, mode=mode)
