"""Data-generating distributions for the sufficient statistic.

A :class:`Source` is an arbitrary distribution P over X values, not
necessarily inside any model family.  Sources expose exact moments where
closed forms exist (sample moments for empirical data, population
convention) and deterministic sampling keyed by ``(seed, stream)``.

The KL projection of P onto an exponential family matches means, so
``optimal_mean`` is simply E_P[X], rejected when it does not lie strictly
inside the family's mean domain.  The redundancy slope ratio
``theoretical_c`` is var_P(X) divided by the model variance at that
projected mean.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .families import DomainError, Family

__all__ = [
    "SourceError",
    "EmpiricalParseError",
    "ProjectionError",
    "MomentReport",
    "Source",
    "PointMass",
    "FiniteSupport",
    "InModel",
    "Mixture",
    "Empirical",
    "uniform_integers",
    "stream_rng",
    "sample_iid",
    "moments",
    "optimal_mean",
    "theoretical_c",
    "load_empirical",
]


class SourceError(ValueError):
    """Base class for source construction and use errors."""


class EmpiricalParseError(SourceError):
    """A data file could not be parsed; the message cites the line."""


class ProjectionError(SourceError):
    """E_P[X] does not lie strictly inside the family's mean domain."""


@dataclass(frozen=True)
class MomentReport:
    """Which moments of a source exist, and their values where finite.

    ``highest_finite_moment`` is None when all moments exist.
    ``fourth_central`` is +inf when fewer than four moments are declared.
    """

    mean: float
    variance: float
    fourth_central: float
    highest_finite_moment: int | None


class Source:
    """Base class; subclasses define moments and sampling.

    ``declared_moment_order`` caps the number of moments the source is
    declared to possess.  Every concrete kind here has all moments, so the
    cap exists to model heavy-tailed inputs in condition checks.
    """

    source_id: str = ""

    def __init__(self, declared_moment_order: int | None = None):
        if declared_moment_order is not None:
            declared_moment_order = int(declared_moment_order)
            if declared_moment_order < 2:
                raise SourceError("declared_moment_order must be at least 2")
        self.declared_moment_order = declared_moment_order

    def mean(self) -> float:
        raise NotImplementedError

    def central_moments(self) -> tuple[float, float, float]:
        """(m2, m3, m4) central moments."""
        raise NotImplementedError

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def variance(self) -> float:
        return self.central_moments()[0]

    def moments(self) -> MomentReport:
        m2, _, m4 = self.central_moments()
        hfm = self.declared_moment_order
        if hfm is not None and hfm < 4:
            m4 = math.inf
        return MomentReport(self.mean(), m2, m4, hfm)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"<Source {self.source_id}>"


class PointMass(Source):
    """Degenerate distribution on a single value."""

    def __init__(self, value: float, declared_moment_order: int | None = None):
        super().__init__(declared_moment_order)
        value = float(value)
        if not math.isfinite(value):
            raise SourceError(f"point mass value must be finite, got {value!r}")
        self.value = value
        self.source_id = f"pointmass({value:g})"

    def mean(self) -> float:
        return self.value

    def central_moments(self) -> tuple[float, float, float]:
        return 0.0, 0.0, 0.0

    def draw(self, n, rng):
        return np.full(int(n), self.value, dtype=np.float64)


class FiniteSupport(Source):
    """Finite support with explicit probabilities."""

    def __init__(self, values, probs, declared_moment_order: int | None = None):
        super().__init__(declared_moment_order)
        values = np.asarray(values, dtype=np.float64)
        probs = np.asarray(probs, dtype=np.float64)
        if values.ndim != 1 or values.shape != probs.shape or values.size == 0:
            raise SourceError("finite support needs matching nonempty value/probability lists")
        if not np.all(np.isfinite(values)):
            raise SourceError("finite support values must be finite")
        if np.any(probs < 0):
            raise SourceError("probabilities must be nonnegative")
        if abs(float(probs.sum()) - 1.0) > 1e-12:
            raise SourceError(f"probabilities sum to {probs.sum()!r}, not 1")
        self.values = values
        self.probs = probs
        pairs = ",".join(f"{v:g}:{p:g}" for v, p in zip(values, probs))
        self.source_id = f"finite{{{pairs}}}"

    def mean(self) -> float:
        return float(self.values @ self.probs)

    def central_moments(self) -> tuple[float, float, float]:
        d = self.values - self.mean()
        return (
            float((d**2) @ self.probs),
            float((d**3) @ self.probs),
            float((d**4) @ self.probs),
        )

    def draw(self, n, rng):
        return rng.choice(self.values, size=int(n), replace=True, p=self.probs)


class InModel(Source):
    """A member of a model family, used for well-specified baselines."""

    def __init__(self, family: Family, mu: float, declared_moment_order: int | None = None):
        super().__init__(declared_moment_order)
        self.family = family
        self.mu = family.require_mean(mu)
        self.source_id = f"inmodel({family.name},{self.mu:g})"

    def mean(self) -> float:
        return self.mu

    def central_moments(self) -> tuple[float, float, float]:
        return self.family.central_moments(self.mu)

    def draw(self, n, rng):
        return self.family.sample(self.mu, int(n), rng)


class Mixture(Source):
    """Finite mixture; moments are exact (law of total variance and its
    higher-order analogues), so slope predictions carry no Monte Carlo noise."""

    def __init__(self, components, declared_moment_order: int | None = None):
        super().__init__(declared_moment_order)
        comps = [(float(w), s) for w, s in components]
        if not comps:
            raise SourceError("mixture needs at least one component")
        if any(w < 0 for w, _ in comps):
            raise SourceError("mixture weights must be nonnegative")
        total = sum(w for w, _ in comps)
        if abs(total - 1.0) > 1e-12:
            raise SourceError(f"mixture weights sum to {total!r}, not 1")
        self.components = comps
        inner = ";".join(f"{w:g}*{s.source_id}" for w, s in comps)
        self.source_id = f"mix({inner})"

    def mean(self) -> float:
        return sum(w * s.mean() for w, s in self.components)

    def central_moments(self) -> tuple[float, float, float]:
        mu = self.mean()
        m2 = m3 = m4 = 0.0
        for w, s in self.components:
            c2, c3, c4 = s.central_moments()
            d = s.mean() - mu
            m2 += w * (c2 + d * d)
            m3 += w * (c3 + 3.0 * c2 * d + d**3)
            m4 += w * (c4 + 4.0 * c3 * d + 6.0 * c2 * d * d + d**4)
        return m2, m3, m4

    def draw(self, n, rng):
        n = int(n)
        weights = np.array([w for w, _ in self.components])
        picks = rng.choice(len(self.components), size=n, p=weights)
        out = np.empty(n, dtype=np.float64)
        for idx, (_, comp) in enumerate(self.components):
            sel = picks == idx
            k = int(sel.sum())
            if k:
                out[sel] = comp.draw(k, rng)
        return out

    def moments(self) -> MomentReport:
        rep = super().moments()
        hfms = [s.declared_moment_order for _, s in self.components]
        hfms.append(self.declared_moment_order)
        finite = [h for h in hfms if h is not None]
        hfm = min(finite) if finite else None
        m4 = math.inf if (hfm is not None and hfm < 4) else rep.fourth_central
        return MomentReport(rep.mean, rep.variance, m4, hfm)


class Empirical(Source):
    """The empirical measure of a data set; resampled with replacement.

    Moments use the population convention (divide by n): the source *is*
    the listed data, not an estimate of something else.
    """

    def __init__(self, data, declared_moment_order: int | None = None,
                 origin: str | None = None):
        super().__init__(declared_moment_order)
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 1 or data.size == 0:
            raise SourceError("empirical source needs a nonempty 1-d data vector")
        if not np.all(np.isfinite(data)):
            raise SourceError("empirical data must be finite")
        self.data = data
        tag = origin if origin else f"n={data.size}"
        self.source_id = f"empirical({tag})"

    def mean(self) -> float:
        return float(self.data.mean())

    def central_moments(self) -> tuple[float, float, float]:
        d = self.data - self.data.mean()
        return float(np.mean(d**2)), float(np.mean(d**3)), float(np.mean(d**4))

    def draw(self, n, rng):
        return rng.choice(self.data, size=int(n), replace=True)


def uniform_integers(lo: int, hi: int, **kwargs) -> FiniteSupport:
    """Uniform distribution on the integers lo..hi inclusive."""
    if hi < lo:
        raise SourceError(f"empty integer range {lo}..{hi}")
    values = np.arange(lo, hi + 1, dtype=np.float64)
    probs = np.full(values.size, 1.0 / values.size)
    src = FiniteSupport(values, probs, **kwargs)
    src.source_id = f"uniform{{{lo}..{hi}}}"
    return src


def _stream_words(parts) -> tuple[int, ...]:
    """Stable uint32 words identifying a stream; independent of hash seeds."""
    words: list[int] = []
    for part in parts:
        if isinstance(part, (int, np.integer)):
            words.append(int(part) & 0xFFFFFFFF)
            words.append((int(part) >> 32) & 0xFFFFFFFF)
        else:
            words.append(zlib.crc32(str(part).encode("utf-8")))
    return tuple(words)


def stream_rng(seed: int, *stream) -> np.random.Generator:
    """Deterministic generator for a named stream under a 64-bit seed.

    Distinct (seed, stream) pairs give independent streams; identical pairs
    reproduce identical draw sequences on every run and platform.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=_stream_words(stream))
    return np.random.default_rng(ss)


def sample_iid(source: Source, n: int, seed: int, stream=()) -> np.ndarray:
    """n i.i.d. draws from the source on the given stream."""
    if n < 0:
        raise SourceError("sample size must be nonnegative")
    if not isinstance(stream, tuple):
        stream = (stream,)
    return source.draw(int(n), stream_rng(seed, *stream))


def moments(source: Source) -> MomentReport:
    return source.moments()


def optimal_mean(source: Source, family: Family) -> float:
    """Mean of the family member KL-closest to the source.

    For exponential families the KL projection matches the first moment, so
    this is E_P[X]; it must lie strictly inside the mean domain for the
    projection to exist.
    """
    mu = source.mean()
    try:
        return family.require_mean(mu)
    except DomainError as exc:
        raise ProjectionError(
            f"KL projection undefined: source mean {mu!r} is not interior to "
            f"{family.name}'s mean domain ({exc})"
        ) from None


def theoretical_c(source: Source, family: Family) -> float:
    """var_P(X) / var of the KL-closest family member; the slope ratio."""
    mu = optimal_mean(source, family)
    rep = source.moments()
    if rep.highest_finite_moment is not None and rep.highest_finite_moment < 2:
        raise SourceError("source variance is not declared finite")
    var_p = rep.variance
    if not math.isfinite(var_p):
        raise SourceError("source variance is infinite")
    return var_p / family.variance_at(mu)


def load_empirical(path) -> Empirical:
    """Read an empirical source: one number per line, '#' comments, blanks skipped."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                values.append(float(text))
            except ValueError:
                raise EmpiricalParseError(
                    f"{path}: line {lineno}: cannot parse {text!r} as a number"
                ) from None
    if not values:
        raise EmpiricalParseError(f"{path}: no data lines found")
    return Empirical(np.asarray(values), origin=str(path))
