"""Universal codelength functions over sequences of the sufficient statistic.

Implements, in nats:

* the sequential plug-in code, which prices each outcome with the family
  member fitted to the past through the smoothed estimator
  ``(x0*n0 + sum x_i) / (n + n0)`` (or, in the skip-startup variant, a flat
  per-symbol fallback for the first m outcomes followed by the plain
  empirical-mean estimator);
* conjugate-prior Bayes mixture codes with exact marginal likelihoods;
* the normalized-maximum-likelihood code at a fixed horizon for
  finite-alphabet families, with the normalizer computed by counting
  sufficient statistics rather than enumerating sequences;
* a discretized two-part code over an explicit parameter grid;
* the oracle code (a fixed family member) and the maximum-likelihood
  codelength, whose infimum over the closure of the mean domain handles
  boundary-valued averages by their limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import betaln, gammaln, logsumexp, xlogy

from .families import (
    Bernoulli,
    Binomial,
    Exponential,
    Family,
    Geometric,
    NormalFixedVariance,
    Poisson,
)

__all__ = [
    "CodeError",
    "BoundaryError",
    "UnsupportedCodeError",
    "SkipStartup",
    "PluginConfig",
    "default_plugin_config",
    "PredictorState",
    "CodelengthReport",
    "smoothed_ml_estimate",
    "plugin_codelength",
    "BetaPrior",
    "GammaPrior",
    "default_prior",
    "bayes_codelength",
    "nml_log_normalizer",
    "nml_codelength",
    "two_part_grid",
    "two_part_codelength",
    "oracle_codelength",
    "ml_codelength",
    "ml_stat",
]

LN2 = math.log(2.0)


class CodeError(ValueError):
    """Base class for codelength errors."""


class BoundaryError(CodeError):
    """A required estimate landed on the boundary of the mean domain."""


class UnsupportedCodeError(CodeError):
    """The requested code is not defined for this family."""


@dataclass(frozen=True)
class SkipStartup:
    """Skip-startup variant: charge ``fallback`` nats per outcome for the
    first ``m`` outcomes, then switch to the unmodified empirical-mean
    estimator.  ``fallback`` maps an outcome to a per-symbol codelength;
    left as None it defaults to the flat one-bit code for the Bernoulli
    family, while every other family requires an explicit choice."""

    m: int
    fallback: Callable[[float], float] | None = None

    def __post_init__(self):
        if int(self.m) < 1:
            raise CodeError("skip-startup needs m >= 1")

    def fallback_for(self, family: Family) -> Callable[[float], float]:
        if self.fallback is not None:
            return self.fallback
        if isinstance(family, Bernoulli):
            return bernoulli_flat_fallback
        raise CodeError(
            f"{family.name}: skip-startup needs an explicit fallback code"
        )


@dataclass(frozen=True)
class PluginConfig:
    """Configuration of the plug-in predictor.

    ``x0`` is the fake initial outcome (strictly interior to the family's
    mean domain) observed with multiplicity ``n0 > 0``.  When ``skip`` is
    set the fake outcome is unused and the skip-startup variant applies.
    """

    x0: float
    n0: float = 1.0
    skip: SkipStartup | None = None

    def __post_init__(self):
        if not (self.n0 > 0 and math.isfinite(self.n0)):
            raise CodeError(f"n0 must be positive and finite, got {self.n0!r}")

    def validate_for(self, family: Family) -> None:
        family.require_mean(self.x0)


_ANCHORS = {
    "bernoulli": 0.5,
    "poisson": 1.0,
    "geometric": 1.0,
    "exponential": 1.0,
    "normal-fixed-mean": 1.0,
}


def default_plugin_config(family: Family) -> PluginConfig:
    """Family-specific interior anchor with unit fake-outcome weight."""
    if isinstance(family, Binomial):
        return PluginConfig(x0=family.m / 2.0, n0=1.0)
    if isinstance(family, NormalFixedVariance):
        return PluginConfig(x0=0.0, n0=1.0)
    try:
        return PluginConfig(x0=_ANCHORS[family.name], n0=1.0)
    except KeyError:
        raise UnsupportedCodeError(f"no default plug-in anchor for {family.name}") from None


def bernoulli_flat_fallback(x: float) -> float:
    """Flat one-bit-per-outcome fallback for Bernoulli skip startup."""
    return LN2


@dataclass
class CodelengthReport:
    """Total and per-symbol codelengths of one code on one sequence."""

    code_id: str
    total: float
    per_symbol: np.ndarray


class PredictorState:
    """Mutable sequential state of a plug-in predictor.

    Tracks the outcome count, the running statistic sum and the accumulated
    codelength; one instance per stream, never shared.
    """

    def __init__(self, family: Family, config: PluginConfig):
        if config.skip is None:
            config.validate_for(family)
        self.family = family
        self.config = config
        self.count = 0
        self.stat_sum = 0.0
        self.accumulated_length = 0.0

    def mean_estimate(self) -> float:
        """Current estimate; smoothed, or plain empirical mean after skip startup."""
        cfg = self.config
        if cfg.skip is None:
            return (cfg.x0 * cfg.n0 + self.stat_sum) / (self.count + cfg.n0)
        if self.count < cfg.skip.m:
            raise BoundaryError("no estimate during skip startup")
        return self._interior(self.stat_sum / self.count)

    def _interior(self, mu: float) -> float:
        lo, hi = self.family.mean_domain
        if not (lo < mu < hi):
            raise BoundaryError(
                f"{self.family.name}: estimate {mu!r} on the boundary of ({lo}, {hi})"
            )
        return mu

    def update(self, x: float) -> float:
        """Observe one outcome; returns its predictive codelength in nats."""
        xv = float(self.family.require_support(np.asarray([x]))[0])
        cfg = self.config
        if cfg.skip is not None and self.count < cfg.skip.m:
            step = float(cfg.skip.fallback_for(self.family)(xv))
        else:
            step = -float(self.family.log_density(self.mean_estimate(), xv))
        if not math.isfinite(step):
            raise CodeError(f"infinite per-symbol codelength at outcome {xv!r}")
        self.count += 1
        self.stat_sum += xv
        self.accumulated_length += step
        return step


def smoothed_ml_estimate(family: Family, config: PluginConfig, prefix) -> float:
    """(x0*n0 + sum prefix) / (len(prefix) + n0); the fake-outcome estimator."""
    if config.skip is not None:
        raise CodeError("smoothed estimate is defined for the fake-outcome variant only")
    config.validate_for(family)
    x = family.require_support(np.asarray(prefix, dtype=np.float64))
    return float((config.x0 * config.n0 + x.sum()) / (x.size + config.n0))


def _prefix_estimates(config: PluginConfig, x: np.ndarray) -> np.ndarray:
    """Smoothed estimates before each of the len(x) outcomes."""
    prefix = np.concatenate(([0.0], np.cumsum(x)[:-1])) if x.size else np.empty(0)
    counts = np.arange(x.size, dtype=np.float64)
    return (config.x0 * config.n0 + prefix) / (config.n0 + counts)


def plugin_codelength(family: Family, config: PluginConfig, seq) -> CodelengthReport:
    """Sequential plug-in codelength; per_symbol[i] prices outcome i+1 with
    the estimate fitted to the first i outcomes."""
    x = family.require_support(np.asarray(seq, dtype=np.float64))
    if x.size == 0:
        return CodelengthReport("plugin", 0.0, np.empty(0))
    if config.skip is None:
        config.validate_for(family)
        mu_hat = _prefix_estimates(config, x)
        per = -family.log_density(mu_hat, x)
    else:
        m = int(config.skip.m)
        fallback = config.skip.fallback_for(family)
        if x.size <= m:
            per = np.array([float(fallback(v)) for v in x])
        else:
            head = np.array([float(fallback(v)) for v in x[:m]])
            csum = np.cumsum(x)[m - 1 : -1]
            counts = np.arange(m, x.size, dtype=np.float64)
            mu_hat = csum / counts
            lo, hi = family.mean_domain
            if np.any(mu_hat <= lo) or np.any(mu_hat >= hi):
                raise BoundaryError(
                    f"{family.name}: post-startup estimate on the domain boundary"
                )
            per = np.concatenate((head, -family.log_density(mu_hat, x[m:])))
    if not np.all(np.isfinite(per)):
        raise CodeError("infinite per-symbol codelength")
    return CodelengthReport("plugin", float(per.sum()), per)


# -- Bayes codes with conjugate priors ---------------------------------------


@dataclass(frozen=True)
class BetaPrior:
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise CodeError("Beta prior needs positive hyperparameters")


@dataclass(frozen=True)
class GammaPrior:
    shape: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise CodeError("Gamma prior needs positive hyperparameters")


def default_prior(family: Family):
    if isinstance(family, (Bernoulli, Binomial, Geometric)):
        return BetaPrior(1.0, 1.0)
    if isinstance(family, (Poisson, Exponential)):
        return GammaPrior(1.0, 1.0)
    raise UnsupportedCodeError(f"no conjugate prior wired for {family.name}")


def _bayes_stat_prefix(family: Family, prior, counts: np.ndarray,
                       sums: np.ndarray) -> np.ndarray:
    """Negative log of the carrier-free marginal at each prefix.

    counts[k] = k and sums[k] = sum of the first k outcomes; entry 0 is the
    empty prefix.  Adding the negative cumulative log carrier gives the
    negative log marginal likelihood.
    """
    if isinstance(family, (Bernoulli, Binomial)):
        if not isinstance(prior, BetaPrior):
            raise UnsupportedCodeError(f"{family.name} needs a Beta prior")
        m = family.m if isinstance(family, Binomial) else 1
        a, b = prior.a, prior.b
        return betaln(a, b) - betaln(a + sums, b + m * counts - sums)
    if isinstance(family, Geometric):
        if not isinstance(prior, BetaPrior):
            raise UnsupportedCodeError("geometric needs a Beta prior")
        a, b = prior.a, prior.b
        return betaln(a, b) - betaln(a + counts, b + sums)
    if isinstance(family, Poisson):
        if not isinstance(prior, GammaPrior):
            raise UnsupportedCodeError("poisson needs a Gamma prior")
        al, be = prior.shape, prior.rate
        return -(
            al * math.log(be)
            - gammaln(al)
            + gammaln(al + sums)
            - (al + sums) * np.log(be + counts)
        )
    if isinstance(family, Exponential):
        if not isinstance(prior, GammaPrior):
            raise UnsupportedCodeError("exponential needs a Gamma prior")
        al, be = prior.shape, prior.rate
        return -(
            al * math.log(be)
            - gammaln(al)
            + gammaln(al + counts)
            - (al + counts) * np.log(be + sums)
        )
    raise UnsupportedCodeError(f"no conjugate Bayes code for {family.name}")


def bayes_codelength(family: Family, prior, seq) -> CodelengthReport:
    """Negative log marginal likelihood under the conjugate prior; the
    per-symbol entries are the sequential predictive lengths and telescope
    to the total exactly."""
    x = family.require_support(np.asarray(seq, dtype=np.float64))
    counts = np.arange(x.size + 1, dtype=np.float64)
    sums = np.concatenate(([0.0], np.cumsum(x)))
    stat = _bayes_stat_prefix(family, prior, counts, sums)
    carrier = np.concatenate(([0.0], np.cumsum(family.log_carrier(x)))) if x.size else stat * 0.0
    neg_log_marg = stat - carrier
    per = np.diff(neg_log_marg)
    if not np.all(np.isfinite(per)):
        raise CodeError("infinite per-symbol Bayes codelength")
    return CodelengthReport("bayes", float(neg_log_marg[-1]), per)


# -- NML at a fixed horizon ---------------------------------------------------


@lru_cache(maxsize=None)
def _nml_log_normalizer_cached(family_key: tuple, n: int) -> float:
    if family_key[0] == "bernoulli":
        trials = n
    else:
        trials = n * family_key[1]
    k = np.arange(trials + 1, dtype=np.float64)
    loglik = xlogy(k, k / trials) + xlogy(trials - k, 1.0 - k / trials)
    logcount = gammaln(trials + 1) - gammaln(k + 1) - gammaln(trials - k + 1)
    return float(logsumexp(logcount + loglik))


def nml_log_normalizer(family: Family, n: int) -> float:
    """ln of the horizon-n parametric complexity, by sufficient-statistic
    counting.

    Sequences over a finite alphabet share their maximized likelihood
    through the statistic total s; the number of sequences carrying a given
    total, weighted by carriers, collapses to a single binomial coefficient
    (for m-trial families, C(n*m, s) by Vandermonde convolution), so the
    normalizer is a sum of n*m + 1 terms however long the horizon.
    """
    if n < 1:
        raise CodeError("horizon must be at least 1")
    if isinstance(family, Bernoulli):
        return _nml_log_normalizer_cached(("bernoulli",), int(n))
    if isinstance(family, Binomial):
        return _nml_log_normalizer_cached(("binomial", family.m), int(n))
    raise UnsupportedCodeError(
        f"{family.name}: parametric complexity at a fixed horizon is "
        "infinite/undefined for non-finite alphabets"
    )


def nml_codelength(family: Family, horizon: int, seq) -> float:
    """Codelength of the horizon-n minimax code: maximized likelihood over
    the closure of the mean domain plus the log normalizer."""
    x = family.require_support(np.asarray(seq, dtype=np.float64))
    if x.size != int(horizon):
        raise CodeError(f"sequence length {x.size} does not match horizon {horizon}")
    return ml_codelength(family, x) + nml_log_normalizer(family, int(horizon))


# -- two-part code ------------------------------------------------------------


def two_part_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """Uniform grid over [lo, hi] with spacing 1/sqrt(n)."""
    if not (hi > lo):
        raise CodeError(f"empty grid interval [{lo}, {hi}]")
    if n < 1:
        raise CodeError("grid resolution needs n >= 1")
    count = int(math.floor((hi - lo) * math.sqrt(n))) + 1
    return np.linspace(lo, hi, max(count, 2))


def two_part_codelength(family: Family, seq, grid) -> float:
    """ln(grid size) plus the best grid point's codelength.

    The grid is part of the code, fixed before seeing data; it may exclude
    the maximum-likelihood region and still yields a finite length.
    """
    x = family.require_support(np.asarray(seq, dtype=np.float64))
    if x.size == 0:
        raise CodeError("two-part code needs a nonempty sequence")
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise CodeError("two-part grid is empty")
    for g in grid:
        family.require_mean(float(g))
    s = float(x.sum())
    n = x.size
    stat = family.natural_param(grid) * s + n * family.log_partition(grid)
    carrier = float(np.sum(family.log_carrier(x)))
    return math.log(grid.size) + float(np.min(stat)) - carrier


# -- oracle and maximum-likelihood lengths ------------------------------------


def oracle_codelength(family: Family, mu_star: float, seq) -> float:
    """Codelength of the fixed family member with mean mu_star."""
    mu_star = family.require_mean(mu_star)
    x = family.require_support(np.asarray(seq, dtype=np.float64))
    if x.size == 0:
        return 0.0
    return float(-np.sum(family.log_density(mu_star, x)))


def ml_stat(family: Family, xbar: float) -> float:
    """inf over the closure of the mean domain of eta(mu)*xbar + A(mu).

    The infimum sits at mu = xbar when the average is interior.  For
    discrete families a boundary average means every outcome equals the
    boundary point and the limiting value is 0 (the limiting member puts
    all mass there).  For the exponential family on [0, inf) the limit at
    xbar = 0 is -inf: no maximum-likelihood codelength exists.
    """
    lo, hi = family.mean_domain
    if lo < xbar < hi:
        return float(family.natural_param(xbar) * xbar + family.log_partition(xbar))
    if family.discrete and (xbar == lo or xbar == hi):
        return 0.0
    raise BoundaryError(
        f"{family.name}: maximum-likelihood codelength undefined at average {xbar!r} "
        "(limiting infimum is infinite or the average is out of range)"
    )


def ml_codelength(family: Family, seq) -> float:
    """inf over the closure of the mean domain of -ln M_mu(seq)."""
    x = family.require_support(np.asarray(seq, dtype=np.float64))
    if x.size == 0:
        raise CodeError("maximum-likelihood codelength needs a nonempty sequence")
    xbar = float(x.mean())
    carrier = float(np.sum(family.log_carrier(x)))
    return x.size * ml_stat(family, xbar) - carrier
