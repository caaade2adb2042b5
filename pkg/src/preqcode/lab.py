"""Monte Carlo and exact experiments on universal-code behavior.

The central quantity is the *relative redundancy gap* of a code on one
sampled sequence: its codelength minus the codelength of the fixed family
member KL-closest to the source.  Averaged over replicates on a grid of
sample sizes this estimates the redundancy curve, whose slope against
(1/2) ln n is the constant of interest: variance-matched codes approach 1,
the plug-in code approaches var_P(X) / var_model(X).

Replicates draw from streams derived from (seed, replicate index), so
results are independent of worker count and scheduling; different codes
evaluated under the same seed share replicate streams (common random
numbers).  Per-point uncertainty is the replicate-level standard error; no
bootstrap.

Gap evaluation cancels the carrier terms, which are common to every code
and the oracle, so the hot path is a handful of vectorized passes over
each replicate's prefix statistics.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import codes as _codes
from . import sources as _sources
from .codes import (
    BetaPrior,
    GammaPrior,
    PluginConfig,
    UnsupportedCodeError,
    default_plugin_config,
    default_prior,
    ml_stat,
    nml_log_normalizer,
    two_part_grid,
)
from .families import Family, check_condition1
from .sources import Source

__all__ = [
    "LabError",
    "ConditionRefusedError",
    "DEFAULT_N_GRID",
    "PluginCode",
    "BayesCode",
    "NMLCode",
    "TwoPartCode",
    "make_code",
    "RedundancyCurve",
    "SlopeFit",
    "DnCurve",
    "DecompositionReport",
    "MseCurve",
    "SelectionTable",
    "redundancy_curve",
    "fit_c",
    "dn_curve",
    "kl_decomposition_check",
    "estimator_mse_curve",
    "model_selection_experiment",
]

DEFAULT_N_GRID = tuple(int(2**k) for k in range(6, 15))
DEFAULT_FIT_N_MIN = 256


class LabError(ValueError):
    """Base class for experiment harness errors."""


class ConditionRefusedError(LabError):
    """The (source, family) pair fails the moment growth condition."""


def _check_grid(n_grid) -> np.ndarray:
    grid = np.asarray(n_grid, dtype=np.int64)
    if grid.ndim != 1 or grid.size == 0:
        raise LabError("n_grid must be a nonempty 1-d list of sample sizes")
    if grid[0] < 1 or np.any(np.diff(grid) <= 0):
        raise LabError("n_grid must be strictly increasing and positive")
    return grid


def _map_replicates(fn, replicates: int, threads: int) -> np.ndarray:
    """Stack per-replicate row vectors in replicate order."""
    if replicates < 1:
        raise LabError("replicates must be at least 1")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(fn, range(replicates)))
    else:
        rows = [fn(r) for r in range(replicates)]
    return np.vstack(rows)


def _mean_and_stderr(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = rows.mean(axis=0)
    if rows.shape[0] > 1:
        stderr = rows.std(axis=0, ddof=1) / math.sqrt(rows.shape[0])
    else:
        stderr = np.zeros_like(mean)
    return mean, stderr


# -- code adapters -------------------------------------------------------------
#
# Each adapter evaluates, per replicate, the gap trajectory
#     L_code(x^n) - L_oracle(x^n)        at every n in the grid,
# and the full codelength trajectory used by model selection.  Carrier terms
# cancel inside gaps; full lengths reinstate them via the cumulative carrier.


class PluginCode:
    code_id = "plugin"

    def __init__(self, config: PluginConfig | None = None):
        self.config = config

    def _config_for(self, family: Family) -> PluginConfig:
        return self.config if self.config is not None else default_plugin_config(family)

    def describe(self) -> str:
        if self.config is None:
            return "plugin(default)"
        return f"plugin(x0={self.config.x0:g},n0={self.config.n0:g})"

    def supports(self, family: Family) -> bool:
        return True

    def gap_trajectory(self, family: Family, mu_star: float, x: np.ndarray,
                       grid: np.ndarray) -> np.ndarray:
        cfg = self._config_for(family)
        if cfg.skip is not None:
            report = _codes.plugin_codelength(family, cfg, x)
            oracle_per = -family.log_density(mu_star, x)
            return np.cumsum(report.per_symbol - oracle_per)[grid - 1]
        cfg.validate_for(family)
        mu_hat = _codes._prefix_estimates(cfg, x)
        eta_s = float(family.natural_param(mu_star))
        a_s = float(family.log_partition(mu_star))
        steps = (family.natural_param(mu_hat) - eta_s) * x + (
            family.log_partition(mu_hat) - a_s
        )
        return np.cumsum(steps)[grid - 1]

    def length_trajectory(self, family: Family, x: np.ndarray,
                          grid: np.ndarray) -> np.ndarray:
        report = _codes.plugin_codelength(family, self._config_for(family), x)
        return np.cumsum(report.per_symbol)[grid - 1]


class BayesCode:
    code_id = "bayes"

    def __init__(self, prior: BetaPrior | GammaPrior | None = None):
        self.prior = prior

    def _prior_for(self, family: Family):
        return self.prior if self.prior is not None else default_prior(family)

    def describe(self) -> str:
        return "bayes(default)" if self.prior is None else f"bayes({self.prior})"

    def supports(self, family: Family) -> bool:
        try:
            self._prior_for(family)
            return True
        except UnsupportedCodeError:
            return False

    def _stat_at(self, family: Family, x: np.ndarray, grid: np.ndarray) -> np.ndarray:
        counts = grid.astype(np.float64)
        sums = np.cumsum(x)[grid - 1]
        return _codes._bayes_stat_prefix(family, self._prior_for(family), counts, sums)

    def gap_trajectory(self, family, mu_star, x, grid):
        eta_s = float(family.natural_param(mu_star))
        a_s = float(family.log_partition(mu_star))
        sums = np.cumsum(x)[grid - 1]
        return self._stat_at(family, x, grid) - (eta_s * sums + grid * a_s)

    def length_trajectory(self, family, x, grid):
        carrier = np.cumsum(family.log_carrier(x))[grid - 1]
        return self._stat_at(family, x, grid) - carrier


class NMLCode:
    code_id = "nml"

    def describe(self) -> str:
        return "nml"

    def supports(self, family: Family) -> bool:
        return family.finite_support is not None

    def _ml_stat_at(self, family, x, grid):
        means = np.cumsum(x)[grid - 1] / grid
        return np.array([ml_stat(family, float(m)) for m in means])

    def gap_trajectory(self, family, mu_star, x, grid):
        if not self.supports(family):
            raise UnsupportedCodeError(
                f"{family.name}: fixed-horizon minimax code undefined for non-finite alphabets"
            )
        eta_s = float(family.natural_param(mu_star))
        a_s = float(family.log_partition(mu_star))
        sums = np.cumsum(x)[grid - 1]
        comp = np.array([nml_log_normalizer(family, int(n)) for n in grid])
        return grid * self._ml_stat_at(family, x, grid) + comp - (eta_s * sums + grid * a_s)

    def length_trajectory(self, family, x, grid):
        if not self.supports(family):
            raise UnsupportedCodeError(
                f"{family.name}: fixed-horizon minimax code undefined for non-finite alphabets"
            )
        carrier = np.cumsum(family.log_carrier(x))[grid - 1]
        comp = np.array([nml_log_normalizer(family, int(n)) for n in grid])
        return grid * self._ml_stat_at(family, x, grid) + comp - carrier


class TwoPartCode:
    """Two-part code over a fixed parameter interval, grid spacing 1/sqrt(n).

    The interval is experiment configuration, never inferred from data
    (the grid is part of the code description).
    """

    code_id = "two_part"

    def __init__(self, lo: float, hi: float):
        if not (hi > lo):
            raise LabError(f"empty two-part interval [{lo}, {hi}]")
        self.lo = float(lo)
        self.hi = float(hi)

    def describe(self) -> str:
        return f"two_part[{self.lo:g},{self.hi:g}]"

    def supports(self, family: Family) -> bool:
        lo, hi = family.mean_domain
        return lo < self.lo and self.hi < hi

    def _best_stat(self, family, x, grid):
        sums = np.cumsum(x)[grid - 1]
        best = np.empty(grid.size)
        sizes = np.empty(grid.size)
        for i, n in enumerate(grid):
            g = two_part_grid(self.lo, self.hi, int(n))
            stat = family.natural_param(g) * sums[i] + float(n) * family.log_partition(g)
            best[i] = float(np.min(stat))
            sizes[i] = g.size
        return best, np.log(sizes)

    def gap_trajectory(self, family, mu_star, x, grid):
        eta_s = float(family.natural_param(mu_star))
        a_s = float(family.log_partition(mu_star))
        sums = np.cumsum(x)[grid - 1]
        best, log_sizes = self._best_stat(family, x, grid)
        return log_sizes + best - (eta_s * sums + grid * a_s)

    def length_trajectory(self, family, x, grid):
        carrier = np.cumsum(family.log_carrier(x))[grid - 1]
        best, log_sizes = self._best_stat(family, x, grid)
        return log_sizes + best - carrier


def make_code(kind: str, family: Family | None = None, **kwargs):
    """Build a code adapter from a CLI-style kind name."""
    kind = kind.lower()
    if kind == "plugin":
        cfg = None
        if "x0" in kwargs or "n0" in kwargs:
            if family is None and "x0" not in kwargs:
                raise LabError("plugin code with n0 override needs x0 too")
            x0 = kwargs.get("x0")
            if x0 is None:
                x0 = default_plugin_config(family).x0
            cfg = PluginConfig(x0=float(x0), n0=float(kwargs.get("n0", 1.0)))
        return PluginCode(cfg)
    if kind == "bayes":
        prior = None
        if "a" in kwargs or "b" in kwargs:
            prior = BetaPrior(float(kwargs.get("a", 1.0)), float(kwargs.get("b", 1.0)))
        elif "shape" in kwargs or "rate" in kwargs:
            prior = GammaPrior(float(kwargs.get("shape", 1.0)), float(kwargs.get("rate", 1.0)))
        return BayesCode(prior)
    if kind == "nml":
        return NMLCode()
    if kind in ("two_part", "twopart", "two-part"):
        return TwoPartCode(float(kwargs.get("lo", 0.1)), float(kwargs.get("hi", 30.0)))
    raise LabError(f"unknown code kind {kind!r}")


# -- result records ------------------------------------------------------------


@dataclass
class RedundancyCurve:
    """Monte Carlo estimate of a code's redundancy gap over a size grid."""

    family_id: str
    source_id: str
    code_id: str
    n_grid: np.ndarray
    mean_gap: np.ndarray
    stderr: np.ndarray
    replicates: int
    seed: int
    meta: dict = field(default_factory=dict)


@dataclass
class SlopeFit:
    """Weighted least-squares slope of a redundancy curve against (1/2) ln n."""

    c_hat: float
    intercept: float
    c_stderr: float
    n_min_used: int


@dataclass
class DnCurve:
    """Per-n gap between the oracle codelength and the hindsight-best
    codelength; its mean estimates the redundancy-minus-expected-regret
    magnitude, converging to c/2 on finite alphabets."""

    family_id: str
    source_id: str
    n_grid: np.ndarray
    d_hat: np.ndarray
    stderr: np.ndarray
    limit_prediction: float
    replicates: int
    seed: int


@dataclass
class DecompositionReport:
    """Redundancy versus the summed expected-divergence form, shared streams."""

    n: int
    replicates: int
    lhs: float
    rhs: float
    lhs_stderr: float
    rhs_stderr: float
    diff: float
    diff_stderr: float
    agree: bool


@dataclass
class MseCurve:
    """Monte Carlo mean squared error of the plug-in estimator."""

    family_id: str
    source_id: str
    n_grid: np.ndarray
    mse: np.ndarray
    stderr: np.ndarray
    scaled: np.ndarray  # (n+1) * mse, for limit inspection
    replicates: int
    seed: int


@dataclass
class SelectionTable:
    """Model-selection error rates per sample size and code kind."""

    rows: list  # (n, code_id, error_rate, tie_rate, replicates); rates may be NaN
    meta: dict = field(default_factory=dict)


# -- experiments ---------------------------------------------------------------


def _require_condition(source: Source, family: Family, allow_failure: bool) -> dict:
    verdict = check_condition1(family, source.moments())
    if not verdict.passed and not allow_failure:
        raise ConditionRefusedError(
            f"moment condition fails for ({source.source_id}, {family.name}): {verdict.reason}"
        )
    return {"condition_passed": verdict.passed, "condition_reason": verdict.reason,
            "condition_overridden": bool(not verdict.passed and allow_failure)}


def redundancy_curve(source: Source, family: Family, code, n_grid=DEFAULT_N_GRID,
                     replicates: int = 1000, seed: int = 0, *,
                     allow_condition_failure: bool = False,
                     threads: int = 1) -> RedundancyCurve:
    """Mean and standard error of the code-minus-oracle gap at each grid size.

    Replicate r draws its sequence from stream (seed, "redundancy", r), so
    two codes run under the same seed see identical data.
    """
    grid = _check_grid(n_grid)
    mu_star = _sources.optimal_mean(source, family)
    meta = _require_condition(source, family, allow_condition_failure)
    if not code.supports(family):
        raise UnsupportedCodeError(f"{code.code_id} is undefined for {family.name}")
    n_max = int(grid[-1])

    def one(rep: int) -> np.ndarray:
        x = _sources.sample_iid(source, n_max, seed, ("redundancy", rep))
        x = family.require_support(x)
        return code.gap_trajectory(family, mu_star, x, grid)

    rows = _map_replicates(one, replicates, threads)
    mean, stderr = _mean_and_stderr(rows)
    meta.update(
        code=code.describe(),
        mu_star=mu_star,
        common_random_numbers="stream=(seed,'redundancy',replicate)",
    )
    return RedundancyCurve(
        family.name, source.source_id, code.code_id, grid, mean, stderr,
        replicates, int(seed), meta,
    )


def fit_c(curve: RedundancyCurve, n_min: int = DEFAULT_FIT_N_MIN) -> SlopeFit:
    """Fit mean_gap = intercept + c * (1/2) ln n by weighted least squares.

    Weights are 1/stderr^2, or uniform when any grid point is degenerate
    (zero stderr).  At least four grid points at or above n_min are
    required; the small-n head is excluded because its O(1) startup cost
    contaminates the asymptotic slope.
    """
    sel = curve.n_grid >= int(n_min)
    if int(sel.sum()) < 4:
        raise LabError(
            f"need at least 4 grid points with n >= {n_min}; have {int(sel.sum())}"
        )
    n = curve.n_grid[sel].astype(np.float64)
    y = curve.mean_gap[sel]
    se = curve.stderr[sel]
    t = 0.5 * np.log(n)
    degenerate = bool(np.any(se <= 0.0))
    w = np.ones_like(t) if degenerate else 1.0 / (se * se)
    design = np.column_stack((np.ones_like(t), t))
    wd = design * w[:, None]
    gram = design.T @ wd
    beta = np.linalg.solve(gram, wd.T @ y)
    cov = np.linalg.inv(gram)
    if degenerate:
        resid = y - design @ beta
        dof = max(t.size - 2, 1)
        cov = cov * float(resid @ resid) / dof
    return SlopeFit(
        c_hat=float(beta[1]),
        intercept=float(beta[0]),
        c_stderr=float(math.sqrt(max(cov[1, 1], 0.0))),
        n_min_used=int(n_min),
    )


def dn_curve(source: Source, family: Family, n_grid=DEFAULT_N_GRID,
             replicates: int = 1000, seed: int = 0, *, threads: int = 1) -> DnCurve:
    """Estimate E[oracle codelength - hindsight-best codelength] per n.

    Defined here for finite alphabets only, where the limit is
    (1/2) var_P(X) / var_model(X); the countable/continuous extension is
    not established, so such families are refused.
    """
    if family.finite_support is None:
        raise LabError(
            f"{family.name}: the hindsight-gap limit is established for finite alphabets only"
        )
    grid = _check_grid(n_grid)
    mu_star = _sources.optimal_mean(source, family)
    eta_s = float(family.natural_param(mu_star))
    a_s = float(family.log_partition(mu_star))
    limit = 0.5 * _sources.theoretical_c(source, family)
    n_max = int(grid[-1])

    def one(rep: int) -> np.ndarray:
        x = family.require_support(_sources.sample_iid(source, n_max, seed, ("dn", rep)))
        sums = np.cumsum(x)[grid - 1]
        means = sums / grid
        ml = np.array([ml_stat(family, float(v)) for v in means])
        return (eta_s * sums + grid * a_s) - grid * ml

    rows = _map_replicates(one, replicates, threads)
    d_hat, stderr = _mean_and_stderr(rows)
    return DnCurve(family.name, source.source_id, grid, d_hat, stderr, limit,
                   replicates, int(seed))


def kl_decomposition_check(source: Source, family: Family, config: PluginConfig,
                           n: int, replicates: int = 1000, seed: int = 0, *,
                           allow_condition_failure: bool = False) -> DecompositionReport:
    """Check that the plug-in redundancy equals the summed expected KL
    divergence from the projected member to the running estimates.

    Both sides are estimated on the same replicate streams; they agree when
    the paired difference is within 4 standard errors (exactly, for
    degenerate sources, where both sides are deterministic).
    """
    if n < 0:
        raise LabError("n must be nonnegative")
    mu_star = _sources.optimal_mean(source, family)
    _require_condition(source, family, allow_condition_failure)
    if n == 0:
        return DecompositionReport(0, replicates, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, True)
    cfg = config
    cfg.validate_for(family)
    eta_s = float(family.natural_param(mu_star))
    a_s = float(family.log_partition(mu_star))
    draws = np.stack(
        [family.require_support(_sources.sample_iid(source, n, seed, ("kl-decomp", rep)))
         for rep in range(replicates)]
    )
    prefix = np.concatenate(
        (np.zeros((replicates, 1)), np.cumsum(draws, axis=1)[:, :-1]), axis=1
    )
    counts = np.arange(n, dtype=np.float64)
    mu_hat = (cfg.x0 * cfg.n0 + prefix) / (cfg.n0 + counts)
    eta_h = family.natural_param(mu_hat)
    a_h = family.log_partition(mu_hat)
    lhs_rows = np.sum((eta_h - eta_s) * draws + (a_h - a_s), axis=1)
    rhs_rows = np.sum((eta_h - eta_s) * mu_star + (a_h - a_s), axis=1)
    lhs, lhs_se = float(lhs_rows.mean()), _scalar_stderr(lhs_rows)
    rhs, rhs_se = float(rhs_rows.mean()), _scalar_stderr(rhs_rows)
    diff_rows = lhs_rows - rhs_rows
    diff, diff_se = float(diff_rows.mean()), _scalar_stderr(diff_rows)
    agree = (diff == 0.0) if diff_se == 0.0 else (abs(diff) <= 4.0 * diff_se)
    return DecompositionReport(int(n), replicates, lhs, rhs, lhs_se, rhs_se,
                               diff, diff_se, agree)


def _scalar_stderr(rows: np.ndarray) -> float:
    if rows.size <= 1:
        return 0.0
    return float(rows.std(ddof=1) / math.sqrt(rows.size))


def estimator_mse_curve(source: Source, family: Family, config: PluginConfig,
                        n_grid=DEFAULT_N_GRID, replicates: int = 1000,
                        seed: int = 0, *, threads: int = 1) -> MseCurve:
    """Monte Carlo E[(mu_hat_n - mu_star)^2] with (n+1)-scaled values.

    The scaled curve approaches var_P(X): the estimator's deviation splits
    into an O((n+1)^-2) fake-outcome bias term plus the empirical-average
    variance var_P(X)/(n+1).
    """
    grid = _check_grid(n_grid)
    mu_star = _sources.optimal_mean(source, family)
    config.validate_for(family)
    n_max = int(grid[-1])

    def one(rep: int) -> np.ndarray:
        x = family.require_support(_sources.sample_iid(source, n_max, seed, ("mse", rep)))
        sums = np.cumsum(x)[grid - 1]
        mu_hat = (config.x0 * config.n0 + sums) / (config.n0 + grid)
        dev = mu_hat - mu_star
        return dev * dev

    rows = _map_replicates(one, replicates, threads)
    mse, stderr = _mean_and_stderr(rows)
    return MseCurve(family.name, source.source_id, grid, mse, stderr,
                    (grid + 1) * mse, replicates, int(seed))


def model_selection_experiment(true_family: Family, mu_true: float, candidates,
                               code_kind: str, n_grid=DEFAULT_N_GRID,
                               replicates: int = 400, seed: int = 0, *,
                               codes_by_kind: dict | None = None,
                               threads: int = 1) -> SelectionTable:
    """Pick the candidate family with the smaller codelength at each n.

    Data are drawn from ``true_family`` at ``mu_true`` (which must be
    interior to every candidate's domain).  Ties go to the earlier
    candidate in the given order and are counted separately.  ``code_kind``
    is one of plugin/bayes/nml/two_part or 'all'; kinds undefined for a
    candidate (fixed-horizon minimax on countable alphabets) yield NaN
    rates, flagged 'undefined' in CSV output.
    """
    grid = _check_grid(n_grid)
    if replicates < 1:
        raise LabError("replicates must be at least 1")
    candidates = list(candidates)
    if len(candidates) < 2:
        raise LabError("model selection needs at least two candidate families")
    for fam in candidates:
        fam.require_mean(mu_true)
    true_family.require_mean(mu_true)
    if codes_by_kind is None:
        codes_by_kind = {}
    kinds = (["plugin", "bayes", "nml", "two_part"] if code_kind == "all"
             else [code_kind])
    adapters = {k: codes_by_kind.get(k, make_code(k)) for k in kinds}
    true_idx = next(
        (i for i, fam in enumerate(candidates) if fam.key == true_family.key), None
    )
    if true_idx is None:
        raise LabError("true family must be one of the candidates")
    n_max = int(grid[-1])

    defined = {
        kind: all(code.supports(fam) for fam in candidates)
        for kind, code in adapters.items()
    }

    def one(rep: int) -> np.ndarray:
        rng_x = _sources.stream_rng(seed, "select", rep)
        x = true_family.sample(mu_true, n_max, rng_x)
        out = np.empty((len(kinds), grid.size, 2))
        for ki, kind in enumerate(kinds):
            if not defined[kind]:
                out[ki] = np.nan
                continue
            code = adapters[kind]
            lengths = np.stack(
                [code.length_trajectory(fam, fam.require_support(x), grid)
                 for fam in candidates]
            )
            best = np.argmin(lengths, axis=0)
            ties = np.abs(lengths[0] - lengths[1]) == 0.0 if len(candidates) == 2 else (
                np.sum(lengths == lengths.min(axis=0), axis=0) > 1
            )
            best = np.where(ties, 0, best)
            out[ki, :, 0] = best != true_idx
            out[ki, :, 1] = ties
        return out.reshape(1, -1)

    rows = _map_replicates(one, replicates, threads)
    stacked = rows.reshape(replicates, len(kinds), grid.size, 2)
    table = []
    for ki, kind in enumerate(kinds):
        for gi, n in enumerate(grid):
            if not defined[kind]:
                table.append((int(n), kind, math.nan, math.nan, replicates))
                continue
            err = float(stacked[:, ki, gi, 0].mean())
            tie = float(stacked[:, ki, gi, 1].mean())
            table.append((int(n), kind, err, tie, replicates))
    meta = {
        "true_family": true_family.name,
        "mu_true": float(mu_true),
        "candidates": [fam.name for fam in candidates],
        "tie_rule": "earlier candidate wins; ties counted separately",
        "undefined_kinds": [k for k, ok in defined.items() if not ok],
    }
    return SelectionTable(table, meta)
