"""Regular one-parameter exponential families in mean-value parameterization.

Every family here has densities of the form

    M(x) = exp(-eta * x) * h(x) / Z(eta),

i.e. the natural parameter carries a minus sign; the textbook plus-sign
convention is recovered via ``eta_textbook = -eta``.  Each family is
reparameterized by its mean ``mu = E[X]`` over an *open* interval, and all
closed forms (log densities, parameter maps, variances, KL divergences and
the fourth KL derivative in the second argument) are expressed in ``mu``.

``X`` is the sufficient statistic.  For most families the observed outcome
is ``X`` itself; for :class:`NormalFixedMean` the observed value is the
square of a centered Gaussian draw, and ``mu`` is its mean (the Gaussian
variance).

All logarithms are natural, so codelengths derived from ``log_density``
are in nats.  Boundary parameter values are rejected everywhere: the
families are only regular on the open interior of the mean domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

__all__ = [
    "FamilyError",
    "DomainError",
    "SupportError",
    "UnsupportedOperationError",
    "TruncationError",
    "ConditionVerdict",
    "Family",
    "Bernoulli",
    "Binomial",
    "Poisson",
    "Geometric",
    "Exponential",
    "NormalFixedVariance",
    "NormalFixedMean",
    "get_family",
    "list_families",
    "check_condition1",
]


class FamilyError(ValueError):
    """Base class for errors raised by this module."""


class DomainError(FamilyError):
    """A mean or natural parameter lies outside its open domain."""


class SupportError(FamilyError):
    """An outcome lies outside the family's support."""


class UnsupportedOperationError(FamilyError):
    """The requested closed form is not available for this family."""


class TruncationError(FamilyError):
    """A countable-support sum failed to reach the requested tail mass."""


@dataclass(frozen=True)
class ConditionVerdict:
    """Outcome of the moment/derivative growth check for a (family, source) pair."""

    passed: bool
    reason: str | None = None
    required_moments: int = 4

    def __bool__(self) -> bool:
        return self.passed


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class Family:
    """Base class: one family = one sufficient statistic + carrier.

    Subclasses provide the closed forms.  ``natural_param`` and
    ``log_partition`` accept scalars or arrays and skip domain validation
    (callers guarantee interior values); the public operations validate.
    """

    name: str = ""
    mean_domain: tuple[float, float] = (-math.inf, math.inf)
    #: True when the support is a discrete set (finite or countable).
    discrete: bool = False
    #: Values of a finite support, or None.
    finite_support: tuple[float, ...] | None = None
    #: Even moment order k such that the fourth KL derivative is
    #: O(mu**(k - 6)) toward every unbounded tail.  4 for every family here.
    condition_moment_order: int = 4

    # -- parameter and support validation ---------------------------------

    def require_mean(self, mu: float) -> float:
        lo, hi = self.mean_domain
        mu = float(mu)
        if not math.isfinite(mu) or not (lo < mu < hi):
            raise DomainError(
                f"{self.name}: mean {mu!r} outside open domain ({lo}, {hi})"
            )
        return mu

    def require_support(self, x) -> np.ndarray:
        """Validate outcomes; returns a float64 array."""
        raise NotImplementedError

    # -- closed forms ------------------------------------------------------

    def log_density(self, mu, x):
        """ln M_mu(x) in nats; log probability mass for discrete families."""
        raise NotImplementedError

    def log_carrier(self, x):
        """ln h(x); log_density(mu, x) == -eta(mu)*x - A(mu) + log_carrier(x)."""
        raise NotImplementedError

    def natural_param(self, mu):
        """eta(mu) under the minus-sign convention."""
        raise NotImplementedError

    def log_partition(self, mu):
        """A(mu) = ln Z(eta(mu))."""
        raise NotImplementedError

    def natural_domain(self) -> tuple[float, float]:
        """Open interval of eta with Z(eta) finite."""
        raise NotImplementedError

    def mean_from_natural(self, eta: float) -> float:
        raise NotImplementedError

    def variance(self, mu: float) -> float:
        """var of X under M_mu (the reciprocal Fisher information)."""
        raise NotImplementedError

    def central_moments(self, mu: float) -> tuple[float, float, float]:
        """Second, third and fourth central moments of X under M_mu."""
        raise NotImplementedError

    def kl_fourth_derivative(self, mu_star: float, mu: float) -> float:
        """d^4/dmu^4 of D(M_{mu_star} || M_mu) in the second argument."""
        raise NotImplementedError

    def sample(self, mu: float, size: int, rng: np.random.Generator) -> np.ndarray:
        """i.i.d. draws of the sufficient statistic, as float64."""
        raise NotImplementedError

    # -- derived operations --------------------------------------------------

    def mean_to_natural(self, mu: float) -> float:
        return float(self.natural_param(self.require_mean(mu)))

    def natural_to_mean(self, eta: float) -> float:
        lo, hi = self.natural_domain()
        eta = float(eta)
        if not math.isfinite(eta) or not (lo < eta < hi):
            raise DomainError(
                f"{self.name}: natural parameter {eta!r} outside ({lo}, {hi}) "
                "(log-partition would be infinite)"
            )
        mu = float(self.mean_from_natural(eta))
        return self.require_mean(mu)

    def variance_at(self, mu: float) -> float:
        return float(self.variance(self.require_mean(mu)))

    def fisher_information(self, mu: float) -> float:
        """1 / variance_at(mu); the identity is exact, not asymptotic."""
        return 1.0 / self.variance_at(mu)

    def kl_divergence(self, mu_from: float, mu_to: float) -> float:
        """D(M_{mu_from} || M_{mu_to}) in nats, from the natural-parameter form."""
        mf = self.require_mean(mu_from)
        mt = self.require_mean(mu_to)
        return float(
            (self.natural_param(mt) - self.natural_param(mf)) * mf
            + self.log_partition(mt)
            - self.log_partition(mf)
        )

    def describe(self) -> str:
        lo, hi = self.mean_domain
        return f"{self.name}: mean domain ({lo}, {hi}), support {self.support_label()}"

    def support_label(self) -> str:
        raise NotImplementedError

    @property
    def key(self) -> tuple:
        """Hashable identity used for caching."""
        return (self.name,)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"<{type(self).__name__} {self.name}>"

    def __eq__(self, other) -> bool:
        return isinstance(other, Family) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)


def _require_integers(name: str, x: np.ndarray, lo: int, hi: float) -> None:
    bad = (x < lo) | (x > hi) | (x != np.floor(x)) | ~np.isfinite(x)
    if np.any(bad):
        val = np.atleast_1d(x)[np.atleast_1d(bad)][0]
        raise SupportError(f"{name}: outcome {val!r} outside support")


class Bernoulli(Family):
    name = "bernoulli"
    mean_domain = (0.0, 1.0)
    discrete = True
    finite_support = (0.0, 1.0)

    def support_label(self) -> str:
        return "{0, 1}"

    def require_support(self, x) -> np.ndarray:
        x = _as_array(x)
        _require_integers(self.name, x, 0, 1)
        return x

    def log_density(self, mu, x):
        x = _as_array(x)
        return np.where(x == 1.0, np.log(mu), np.log1p(-_as_array(mu)))

    def log_carrier(self, x):
        return np.zeros_like(_as_array(x))

    def natural_param(self, mu):
        return np.log1p(-_as_array(mu)) - np.log(mu)

    def log_partition(self, mu):
        return -np.log1p(-_as_array(mu))

    def natural_domain(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def mean_from_natural(self, eta: float) -> float:
        # mu = 1 / (1 + e^eta)
        if eta >= 0:
            return math.exp(-eta) / (1.0 + math.exp(-eta))
        return 1.0 / (1.0 + math.exp(eta))

    def variance(self, mu: float) -> float:
        return mu * (1.0 - mu)

    def central_moments(self, mu: float) -> tuple[float, float, float]:
        q = 1.0 - mu
        v = self.variance(mu)
        return v, v * (q - mu), v * (mu**3 + q**3)

    def kl_fourth_derivative(self, mu_star: float, mu: float) -> float:
        mu_star = self.require_mean(mu_star)
        mu = self.require_mean(mu)
        return 6.0 * mu_star / mu**4 + 6.0 * (1.0 - mu_star) / (1.0 - mu) ** 4

    def sample(self, mu, size, rng):
        mu = self.require_mean(mu)
        return rng.binomial(1, mu, size=size).astype(np.float64)


class Binomial(Family):
    """Binomial with a fixed number of trials; the mean runs over (0, m)."""

    discrete = True

    def __init__(self, m: int):
        if int(m) != m or m < 1:
            raise DomainError(f"binomial: number of trials must be a positive integer, got {m!r}")
        self.m = int(m)
        self.name = f"binomial({self.m})"
        self.mean_domain = (0.0, float(self.m))
        self.finite_support = tuple(float(v) for v in range(self.m + 1))

    @property
    def key(self) -> tuple:
        return ("binomial", self.m)

    def support_label(self) -> str:
        return f"{{0, ..., {self.m}}}"

    def require_support(self, x) -> np.ndarray:
        x = _as_array(x)
        _require_integers(self.name, x, 0, self.m)
        return x

    def log_density(self, mu, x):
        x = _as_array(x)
        m = self.m
        theta = _as_array(mu) / m
        return (
            gammaln(m + 1)
            - gammaln(x + 1)
            - gammaln(m - x + 1)
            + xlogy(x, theta)
            + xlogy(m - x, 1.0 - theta)
        )

    def log_carrier(self, x):
        x = _as_array(x)
        m = self.m
        return gammaln(m + 1) - gammaln(x + 1) - gammaln(m - x + 1)

    def natural_param(self, mu):
        mu = _as_array(mu)
        return np.log(self.m - mu) - np.log(mu)

    def log_partition(self, mu):
        m = self.m
        return m * (math.log(m) - np.log(m - _as_array(mu)))

    def natural_domain(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def mean_from_natural(self, eta: float) -> float:
        if eta >= 0:
            return self.m * math.exp(-eta) / (1.0 + math.exp(-eta))
        return self.m / (1.0 + math.exp(eta))

    def variance(self, mu: float) -> float:
        return mu * (1.0 - mu / self.m)

    def central_moments(self, mu: float) -> tuple[float, float, float]:
        theta = mu / self.m
        tq = theta * (1.0 - theta)
        v = self.variance(mu)
        return v, v * (1.0 - 2.0 * theta), 3.0 * v * v + v * (1.0 - 6.0 * tq)

    def kl_fourth_derivative(self, mu_star: float, mu: float) -> float:
        mu_star = self.require_mean(mu_star)
        mu = self.require_mean(mu)
        m = self.m
        return 6.0 * mu_star / mu**4 + 6.0 * (m - mu_star) / (m - mu) ** 4

    def sample(self, mu, size, rng):
        mu = self.require_mean(mu)
        return rng.binomial(self.m, mu / self.m, size=size).astype(np.float64)


class Poisson(Family):
    name = "poisson"
    mean_domain = (0.0, math.inf)
    discrete = True

    def support_label(self) -> str:
        return "{0, 1, 2, ...}"

    def require_support(self, x) -> np.ndarray:
        x = _as_array(x)
        _require_integers(self.name, x, 0, math.inf)
        return x

    def log_density(self, mu, x):
        x = _as_array(x)
        return -_as_array(mu) + xlogy(x, mu) - gammaln(x + 1)

    def log_carrier(self, x):
        return -gammaln(_as_array(x) + 1)

    def natural_param(self, mu):
        return -np.log(mu)

    def log_partition(self, mu):
        return _as_array(mu)

    def natural_domain(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def mean_from_natural(self, eta: float) -> float:
        return math.exp(-eta)

    def variance(self, mu: float) -> float:
        return mu

    def central_moments(self, mu: float) -> tuple[float, float, float]:
        v = self.variance(mu)
        return v, v, v + 3.0 * v * v

    def kl_fourth_derivative(self, mu_star: float, mu: float) -> float:
        mu_star = self.require_mean(mu_star)
        mu = self.require_mean(mu)
        return 6.0 * mu_star / mu**4

    def sample(self, mu, size, rng):
        mu = self.require_mean(mu)
        return rng.poisson(mu, size=size).astype(np.float64)


class Geometric(Family):
    """Geometric on {0, 1, ...} with mean mu (success probability 1/(mu+1))."""

    name = "geometric"
    mean_domain = (0.0, math.inf)
    discrete = True

    def support_label(self) -> str:
        return "{0, 1, 2, ...}"

    def require_support(self, x) -> np.ndarray:
        x = _as_array(x)
        _require_integers(self.name, x, 0, math.inf)
        return x

    def log_density(self, mu, x):
        x = _as_array(x)
        return xlogy(x, mu) - (x + 1.0) * np.log1p(_as_array(mu))

    def log_carrier(self, x):
        return np.zeros_like(_as_array(x))

    def natural_param(self, mu):
        mu = _as_array(mu)
        return np.log1p(mu) - np.log(mu)

    def log_partition(self, mu):
        return np.log1p(_as_array(mu))

    def natural_domain(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def mean_from_natural(self, eta: float) -> float:
        return 1.0 / math.expm1(eta)

    def variance(self, mu: float) -> float:
        return mu * (mu + 1.0)

    def central_moments(self, mu: float) -> tuple[float, float, float]:
        v = self.variance(mu)
        return v, v * (2.0 * mu + 1.0), 9.0 * v * v + v

    def kl_fourth_derivative(self, mu_star: float, mu: float) -> float:
        mu_star = self.require_mean(mu_star)
        mu = self.require_mean(mu)
        return 6.0 * mu_star / mu**4 - 6.0 * (mu_star + 1.0) / (mu + 1.0) ** 4

    def sample(self, mu, size, rng):
        mu = self.require_mean(mu)
        # numpy's geometric counts trials to first success (support {1, 2, ...})
        return (rng.geometric(1.0 / (mu + 1.0), size=size) - 1).astype(np.float64)


class Exponential(Family):
    name = "exponential"
    mean_domain = (0.0, math.inf)

    def support_label(self) -> str:
        return "[0, inf)"

    def require_support(self, x) -> np.ndarray:
        x = _as_array(x)
        if np.any(~np.isfinite(x) | (x < 0)):
            val = np.atleast_1d(x)[np.atleast_1d(~np.isfinite(x) | (x < 0))][0]
            raise SupportError(f"{self.name}: outcome {val!r} outside support")
        return x

    def log_density(self, mu, x):
        mu = _as_array(mu)
        return -np.log(mu) - _as_array(x) / mu

    def log_carrier(self, x):
        return np.zeros_like(_as_array(x))

    def natural_param(self, mu):
        return 1.0 / _as_array(mu)

    def log_partition(self, mu):
        return np.log(_as_array(mu))

    def natural_domain(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def mean_from_natural(self, eta: float) -> float:
        return 1.0 / eta

    def variance(self, mu: float) -> float:
        return mu * mu

    def central_moments(self, mu: float) -> tuple[float, float, float]:
        v = self.variance(mu)
        return v, 2.0 * mu**3, 9.0 * v * v

    def kl_fourth_derivative(self, mu_star: float, mu: float) -> float:
        mu_star = self.require_mean(mu_star)
        mu = self.require_mean(mu)
        return -6.0 / mu**4 + 24.0 * mu_star / mu**5

    def sample(self, mu, size, rng):
        mu = self.require_mean(mu)
        return rng.exponential(mu, size=size)


class NormalFixedVariance(Family):
    """Gaussian location family; the variance is a fixed constant."""

    mean_domain = (-math.inf, math.inf)

    def __init__(self, sigma2: float = 1.0):
        if not (sigma2 > 0 and math.isfinite(sigma2)):
            raise DomainError(f"normal-fixed-variance: sigma2 must be positive, got {sigma2!r}")
        self.sigma2 = float(sigma2)
        self.name = f"normal-fixed-variance({self.sigma2:g})"

    @property
    def key(self) -> tuple:
        return ("normal-fixed-variance", self.sigma2)

    def support_label(self) -> str:
        return "(-inf, inf)"

    def require_support(self, x) -> np.ndarray:
        x = _as_array(x)
        if np.any(~np.isfinite(x)):
            raise SupportError(f"{self.name}: non-finite outcome")
        return x

    def log_density(self, mu, x):
        s2 = self.sigma2
        d = _as_array(x) - _as_array(mu)
        return -0.5 * math.log(2.0 * math.pi * s2) - d * d / (2.0 * s2)

    def log_carrier(self, x):
        x = _as_array(x)
        return -0.5 * math.log(2.0 * math.pi * self.sigma2) - x * x / (2.0 * self.sigma2)

    def natural_param(self, mu):
        return -_as_array(mu) / self.sigma2

    def log_partition(self, mu):
        mu = _as_array(mu)
        return mu * mu / (2.0 * self.sigma2)

    def natural_domain(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def mean_from_natural(self, eta: float) -> float:
        return -eta * self.sigma2

    def variance(self, mu: float) -> float:
        return self.sigma2

    def central_moments(self, mu: float) -> tuple[float, float, float]:
        v = self.variance(mu)
        return v, 0.0, 3.0 * v * v

    def kl_fourth_derivative(self, mu_star: float, mu: float) -> float:
        self.require_mean(mu_star)
        self.require_mean(mu)
        return 0.0

    def sample(self, mu, size, rng):
        mu = self.require_mean(mu)
        return rng.normal(mu, math.sqrt(self.sigma2), size=size)


class NormalFixedMean(Family):
    """Squares of centered Gaussians: X = Z^2 with Z ~ N(0, mu).

    The modeled random variable is the squared outcome, so the mean
    parameter mu = E[X] is the Gaussian variance.  Densities are taken with
    respect to x = z^2 > 0 (the carrier diverges at 0, a null event).
    """

    name = "normal-fixed-mean"
    mean_domain = (0.0, math.inf)

    def support_label(self) -> str:
        return "(0, inf) (squared outcomes)"

    def require_support(self, x) -> np.ndarray:
        x = _as_array(x)
        if np.any(~np.isfinite(x) | (x <= 0)):
            val = np.atleast_1d(x)[np.atleast_1d(~np.isfinite(x) | (x <= 0))][0]
            raise SupportError(
                f"{self.name}: outcome {val!r} outside support (squared outcomes are positive)"
            )
        return x

    def log_density(self, mu, x):
        mu = _as_array(mu)
        x = _as_array(x)
        return -0.5 * (np.log(2.0 * math.pi * mu) + np.log(x)) - x / (2.0 * mu)

    def log_carrier(self, x):
        x = _as_array(x)
        return -0.5 * (math.log(2.0 * math.pi) + np.log(x))

    def natural_param(self, mu):
        return 1.0 / (2.0 * _as_array(mu))

    def log_partition(self, mu):
        return 0.5 * np.log(_as_array(mu))

    def natural_domain(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def mean_from_natural(self, eta: float) -> float:
        return 1.0 / (2.0 * eta)

    def variance(self, mu: float) -> float:
        return 2.0 * mu * mu

    def central_moments(self, mu: float) -> tuple[float, float, float]:
        v = self.variance(mu)
        return v, 8.0 * mu**3, 15.0 * v * v

    def kl_fourth_derivative(self, mu_star: float, mu: float) -> float:
        mu_star = self.require_mean(mu_star)
        mu = self.require_mean(mu)
        return -3.0 / mu**4 + 12.0 * mu_star / mu**5

    def sample(self, mu, size, rng):
        mu = self.require_mean(mu)
        z = rng.normal(0.0, math.sqrt(mu), size=size)
        return z * z


def truncated_support(family: Family, mu: float, tail_mass: float = 1e-12,
                      cap: int = 10**6) -> tuple[np.ndarray, np.ndarray]:
    """Support values and masses of a discrete family covering 1 - tail_mass.

    Accumulates the countable support until the remaining tail mass drops
    below ``tail_mass``; finite supports are returned whole.  Raises
    :class:`TruncationError` if ``cap`` values do not suffice.
    """
    if not family.discrete:
        raise UnsupportedOperationError(f"{family.name}: support enumeration needs a discrete family")
    mu = family.require_mean(mu)
    if family.finite_support is not None:
        xs = np.asarray(family.finite_support)
        return xs, np.exp(family.log_density(mu, xs))
    chunk = 1024
    xs = []
    ps = []
    total = 0.0
    start = 0
    while start < cap:
        block = np.arange(start, min(start + chunk, cap), dtype=np.float64)
        pb = np.exp(family.log_density(mu, block))
        csum = total + np.cumsum(pb)
        hit = np.nonzero(1.0 - csum < tail_mass)[0]
        if hit.size:
            k = int(hit[0]) + 1
            xs.append(block[:k])
            ps.append(pb[:k])
            return np.concatenate(xs), np.concatenate(ps)
        xs.append(block)
        ps.append(pb)
        total = float(csum[-1])
        start += chunk
    raise TruncationError(
        f"{family.name}: tail mass {tail_mass:g} not reached within {cap} support values"
    )


def check_condition1(family: Family, moments) -> ConditionVerdict:
    """Moment/derivative growth check for redundancy experiments.

    ``moments`` is a report with a ``highest_finite_moment`` attribute
    (``None`` meaning all moments exist), as produced by
    ``sources.Source.moments``.

    For each direction in which the statistic is unbounded, an even moment
    order k is needed such that the fourth KL derivative grows at most like
    mu**(k-6) into that tail; for all supported families k = 4 works (the
    derivative table decays at least like mu**-4 toward infinite means).
    Toward bounded tails the derivative is dominated by a polynomial in the
    reciprocal distance to the boundary, and a bounded statistic has all
    moments, so only the k = 4 requirement can fail.
    """
    k = family.condition_moment_order
    hfm = getattr(moments, "highest_finite_moment", None)
    if hfm is None or hfm >= k:
        return ConditionVerdict(True, None, k)
    return ConditionVerdict(
        False,
        f"needs first {k} moments of the statistic; source declares only {hfm}",
        k,
    )


_BUILDERS = {
    "bernoulli": lambda arg: Bernoulli(),
    "binomial": lambda arg: Binomial(int(arg)) if arg else _missing_arg("binomial", "m"),
    "poisson": lambda arg: Poisson(),
    "geometric": lambda arg: Geometric(),
    "exponential": lambda arg: Exponential(),
    "normal-fixed-variance": lambda arg: NormalFixedVariance(float(arg) if arg else 1.0),
    "normal-fixed-mean": lambda arg: NormalFixedMean(),
}


def _missing_arg(name: str, param: str):
    raise FamilyError(f"{name}: missing required parameter {param} (use e.g. '{name}:2')")


def get_family(spec: str) -> Family:
    """Build a family from a spec string such as 'poisson' or 'binomial:2'."""
    name, _, arg = spec.strip().lower().partition(":")
    try:
        builder = _BUILDERS[name]
    except KeyError:
        known = ", ".join(sorted(_BUILDERS))
        raise FamilyError(f"unknown family {spec!r} (known: {known})") from None
    try:
        return builder(arg)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, FamilyError):
            raise
        raise FamilyError(f"bad parameter in family spec {spec!r}: {exc}") from None


def list_families() -> list[str]:
    """One description line per supported family."""
    rows = [
        Bernoulli(),
        Binomial(2),
        Poisson(),
        Geometric(),
        Exponential(),
        NormalFixedVariance(1.0),
        NormalFixedMean(),
    ]
    notes = {
        "binomial(2)": "spec string binomial:m (m fixed trials)",
        "normal-fixed-variance(1)": "spec string normal-fixed-variance:sigma2",
        "normal-fixed-mean": "models squared centered-Gaussian outcomes",
    }
    out = []
    for fam in rows:
        note = notes.get(fam.name, "")
        out.append(fam.describe() + (f" [{note}]" if note else ""))
    return out
