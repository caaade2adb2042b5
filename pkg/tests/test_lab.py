"""Experiment harness: determinism, exact special cases, slope fitting."""

import math

import numpy as np
import pytest

from preqcode.codes import PluginConfig, UnsupportedCodeError
from preqcode.families import Bernoulli, Binomial, Geometric, Poisson
from preqcode.lab import (
    BayesCode,
    ConditionRefusedError,
    LabError,
    NMLCode,
    PluginCode,
    RedundancyCurve,
    TwoPartCode,
    dn_curve,
    estimator_mse_curve,
    fit_c,
    kl_decomposition_check,
    make_code,
    model_selection_experiment,
    redundancy_curve,
)
from preqcode.sources import FiniteSupport, InModel, PointMass, uniform_integers


def synthetic_curve(values, n_grid, stderr=None):
    n_grid = np.asarray(n_grid, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    se = np.zeros_like(values) if stderr is None else np.asarray(stderr, dtype=float)
    return RedundancyCurve("f", "s", "c", n_grid, values, se, 1, 0)


class TestFitC:
    def test_exact_recovery(self):
        grid = [2**k for k in range(6, 15)]
        curve = synthetic_curve([3.0 + 0.5 * math.log(n) for n in grid], grid)
        fit = fit_c(curve, n_min=64)
        assert fit.c_hat == pytest.approx(1.0, abs=1e-12)
        assert fit.intercept == pytest.approx(3.0, abs=1e-11)
        assert fit.c_stderr == pytest.approx(0.0, abs=1e-9)

    def test_constant_curve(self):
        grid = [2**k for k in range(6, 15)]
        fit = fit_c(synthetic_curve([7.0] * len(grid), grid), n_min=64)
        assert fit.c_hat == pytest.approx(0.0, abs=1e-12)

    def test_weighted_fit_uses_stderr(self):
        grid = [256, 512, 1024, 2048, 4096]
        values = [1.0 + 0.5 * math.log(n) for n in grid]
        values[0] += 5.0  # wild outlier with huge stderr
        se = [100.0, 1e-3, 1e-3, 1e-3, 1e-3]
        fit = fit_c(synthetic_curve(values, grid, se), n_min=1)
        assert fit.c_hat == pytest.approx(1.0, abs=1e-6)

    def test_too_few_points(self):
        grid = [64, 128, 256, 512]
        with pytest.raises(LabError):
            fit_c(synthetic_curve([1, 2, 3, 4], grid), n_min=256)

    def test_n_min_respected(self):
        grid = [2**k for k in range(2, 15)]
        # head deviates from the asymptote; tail is exact
        values = [0.5 * math.log(n) + (10.0 if n < 256 else 0.0) for n in grid]
        fit = fit_c(synthetic_curve(values, grid), n_min=256)
        assert fit.n_min_used == 256
        assert fit.c_hat == pytest.approx(1.0, abs=1e-10)


class TestRedundancyCurve:
    def test_degenerate_anchored_is_zero(self):
        curve = redundancy_curve(
            PointMass(4.0), Poisson(), PluginCode(PluginConfig(4.0, 1.0)),
            n_grid=[64, 256, 1024], replicates=1, seed=7,
        )
        np.testing.assert_array_equal(curve.mean_gap, 0.0)
        np.testing.assert_array_equal(curve.stderr, 0.0)

    def test_degenerate_off_anchor_bounded(self):
        curve = redundancy_curve(
            PointMass(4.0), Poisson(), PluginCode(PluginConfig(1.0, 1.0)),
            n_grid=[2**6, 2**10, 2**14], replicates=1, seed=7,
        )
        assert curve.mean_gap[-1] - curve.mean_gap[0] <= 0.5

    def test_rerun_identical(self):
        src = uniform_integers(0, 8)
        kwargs = dict(n_grid=[64, 128, 256], replicates=20, seed=3)
        a = redundancy_curve(src, Poisson(), PluginCode(PluginConfig(1.0, 1.0)), **kwargs)
        b = redundancy_curve(src, Poisson(), PluginCode(PluginConfig(1.0, 1.0)), **kwargs)
        np.testing.assert_array_equal(a.mean_gap, b.mean_gap)
        np.testing.assert_array_equal(a.stderr, b.stderr)
        assert np.all(a.stderr > 0)  # non-degenerate source

    def test_threads_do_not_change_results(self):
        src = uniform_integers(0, 8)
        kwargs = dict(n_grid=[64, 128, 256], replicates=16, seed=3)
        a = redundancy_curve(src, Poisson(), PluginCode(PluginConfig(1.0, 1.0)),
                             threads=1, **kwargs)
        b = redundancy_curve(src, Poisson(), PluginCode(PluginConfig(1.0, 1.0)),
                             threads=4, **kwargs)
        np.testing.assert_array_equal(a.mean_gap, b.mean_gap)

    def test_codes_share_streams(self):
        src = FiniteSupport([0.0, 2.0], [0.5, 0.5])
        fam = Binomial(2)
        kwargs = dict(n_grid=[64, 128], replicates=5, seed=11)
        a = redundancy_curve(src, fam, PluginCode(), **kwargs)
        b = redundancy_curve(src, fam, BayesCode(), **kwargs)
        assert a.meta["common_random_numbers"] == b.meta["common_random_numbers"]

    def test_condition_refusal_and_override(self):
        src = uniform_integers(0, 8, declared_moment_order=3)
        with pytest.raises(ConditionRefusedError):
            redundancy_curve(src, Poisson(), PluginCode(PluginConfig(1.0, 1.0)),
                             n_grid=[64], replicates=2, seed=0)
        curve = redundancy_curve(src, Poisson(), PluginCode(PluginConfig(1.0, 1.0)),
                                 n_grid=[64], replicates=2, seed=0,
                                 allow_condition_failure=True)
        assert curve.meta["condition_overridden"]

    def test_gap_nonnegative_within_noise(self):
        fam = Binomial(2)
        src = FiniteSupport([0.0, 2.0], [0.5, 0.5])
        for code in (PluginCode(), BayesCode(), NMLCode(), TwoPartCode(0.05, 1.95)):
            curve = redundancy_curve(src, fam, code, n_grid=[64, 256], replicates=50, seed=5)
            assert np.all(curve.mean_gap >= -4.0 * curve.stderr)

    def test_nml_rejected_for_countable(self):
        with pytest.raises(UnsupportedCodeError):
            redundancy_curve(InModel(Poisson(), 2.0), Poisson(), NMLCode(),
                             n_grid=[64], replicates=2, seed=0)

    def test_bad_grid(self):
        with pytest.raises(LabError):
            redundancy_curve(PointMass(4.0), Poisson(), PluginCode(PluginConfig(1.0, 1.0)),
                             n_grid=[64, 64], replicates=1, seed=0)

    def test_skip_variant_curve_matches_reports(self):
        from preqcode.codes import SkipStartup, bernoulli_flat_fallback, oracle_codelength
        from preqcode.codes import plugin_codelength
        from preqcode.sources import sample_iid

        cfg = PluginConfig(0.5, 1.0, skip=SkipStartup(8, bernoulli_flat_fallback))
        src = InModel(Bernoulli(), 0.5)
        curve = redundancy_curve(src, Bernoulli(), PluginCode(cfg),
                                 n_grid=[16, 64], replicates=3, seed=2)
        x = sample_iid(src, 64, 2, ("redundancy", 0))
        direct = (plugin_codelength(Bernoulli(), cfg, x).total
                  - oracle_codelength(Bernoulli(), 0.5, x))
        # single-replicate check against the direct computation
        one = redundancy_curve(src, Bernoulli(), PluginCode(cfg),
                               n_grid=[64], replicates=1, seed=2)
        assert one.mean_gap[0] == pytest.approx(direct, abs=1e-9)
        assert curve.n_grid.size == 2


class TestDnCurve:
    def test_redundancy_regret_gap_identity_on_shared_streams(self):
        """Per replicate, (code - hindsight) = (code - oracle) + (oracle -
        hindsight) exactly, so on shared streams the expected regret equals
        the redundancy plus the hindsight-gap mean, and regret dominates."""
        from preqcode.codes import ml_codelength, oracle_codelength, plugin_codelength
        from preqcode.sources import sample_iid

        fam = Bernoulli()
        src = InModel(fam, 0.35)
        cfg = PluginConfig(0.5, 1.0)
        redundancy = regret = gap = 0.0
        reps = 200
        for rep in range(reps):
            x = sample_iid(src, 128, 21, ("shared", rep))
            code = plugin_codelength(fam, cfg, x).total
            oracle = oracle_codelength(fam, 0.35, x)
            hindsight = ml_codelength(fam, x)
            redundancy += code - oracle
            regret += code - hindsight
            gap += oracle - hindsight
        assert regret / reps == pytest.approx(redundancy / reps + gap / reps, abs=1e-9)
        assert gap >= 0.0

    def test_nonnegative(self):
        curve = dn_curve(InModel(Bernoulli(), 0.3), Bernoulli(),
                         n_grid=[64, 256, 1024], replicates=200, seed=5)
        assert np.all(curve.d_hat >= -2.0 * curve.stderr)

    def test_limit_prediction(self):
        src = FiniteSupport([0.0, 2.0], [0.5, 0.5])
        curve = dn_curve(src, Binomial(2), n_grid=[64], replicates=2, seed=0)
        assert curve.limit_prediction == pytest.approx(1.0, rel=1e-12)

    def test_countable_refused(self):
        with pytest.raises(LabError):
            dn_curve(InModel(Poisson(), 2.0), Poisson(), n_grid=[64], replicates=2, seed=0)

    def test_rerun_identical(self):
        src = InModel(Bernoulli(), 0.3)
        a = dn_curve(src, Bernoulli(), n_grid=[64, 256], replicates=20, seed=9)
        b = dn_curve(src, Bernoulli(), n_grid=[64, 256], replicates=20, seed=9)
        np.testing.assert_array_equal(a.d_hat, b.d_hat)


class TestDecomposition:
    def test_degenerate_exact(self):
        rep = kl_decomposition_check(PointMass(4.0), Poisson(), PluginConfig(1.0, 1.0),
                                     n=32, replicates=50, seed=1)
        assert rep.lhs == rep.rhs
        assert rep.diff == 0.0
        assert rep.agree

    def test_monte_carlo_agreement(self):
        rep = kl_decomposition_check(InModel(Bernoulli(), 0.5), Bernoulli(),
                                     PluginConfig(0.5, 1.0), n=32, replicates=4000, seed=2)
        assert rep.agree
        assert rep.lhs == pytest.approx(rep.rhs, abs=6 * (rep.lhs_stderr + rep.rhs_stderr))

    def test_zero_length(self):
        rep = kl_decomposition_check(PointMass(4.0), Poisson(), PluginConfig(1.0, 1.0),
                                     n=0, replicates=10, seed=0)
        assert rep.lhs == rep.rhs == 0.0
        assert rep.agree


class TestMseCurve:
    def test_point_mass_closed_form(self):
        curve = estimator_mse_curve(PointMass(4.0), Poisson(), PluginConfig(1.0, 1.0),
                                    n_grid=[64, 4096], replicates=1, seed=0)
        for n, got in zip(curve.n_grid, curve.mse):
            assert got == pytest.approx((3.0 / (n + 1)) ** 2, abs=1e-12)

    def test_scaled_tracks_variance(self):
        src = uniform_integers(0, 8)
        curve = estimator_mse_curve(src, Poisson(), PluginConfig(1.0, 1.0),
                                    n_grid=[4096], replicates=4000, seed=3)
        assert curve.scaled[0] == pytest.approx(20.0 / 3.0, rel=0.08)

    def test_monotone_tail(self):
        src = uniform_integers(0, 8)
        curve = estimator_mse_curve(src, Poisson(), PluginConfig(1.0, 1.0),
                                    n_grid=[256, 1024, 4096], replicates=3000, seed=4)
        for i in range(curve.n_grid.size - 1):
            noise = 3.0 * math.hypot(curve.stderr[i], curve.stderr[i + 1])
            assert curve.mse[i + 1] <= curve.mse[i] + noise


class TestModelSelection:
    CANDS = staticmethod(lambda: [Poisson(), Geometric()])

    def test_deterministic(self):
        a = model_selection_experiment(Poisson(), 2.0, self.CANDS(), "plugin",
                                       n_grid=[16, 64], replicates=50, seed=3)
        b = model_selection_experiment(Poisson(), 2.0, self.CANDS(), "plugin",
                                       n_grid=[16, 64], replicates=50, seed=3)
        assert a.rows == b.rows

    def test_error_rate_decays(self):
        tab = model_selection_experiment(Geometric(), 2.0, self.CANDS(), "bayes",
                                         n_grid=[4, 64, 512], replicates=300, seed=8)
        errs = [r[2] for r in tab.rows]
        assert errs[-1] <= errs[0] + 0.05

    def test_nml_undefined_cells(self):
        tab = model_selection_experiment(Poisson(), 2.0, self.CANDS(), "nml",
                                         n_grid=[16], replicates=5, seed=0)
        n, kind, err, tie, reps = tab.rows[0]
        assert kind == "nml"
        assert math.isnan(err) and math.isnan(tie)
        assert "nml" in tab.meta["undefined_kinds"]

    def test_zero_replicates_rejected(self):
        with pytest.raises(LabError):
            model_selection_experiment(Poisson(), 2.0, self.CANDS(), "plugin",
                                       n_grid=[16], replicates=0, seed=0)

    def test_true_family_must_be_candidate(self):
        with pytest.raises(LabError):
            model_selection_experiment(Bernoulli(), 0.5, self.CANDS(), "plugin",
                                       n_grid=[16], replicates=5, seed=0)

    def test_mu_must_fit_candidates(self):
        with pytest.raises(Exception):
            model_selection_experiment(Poisson(), 2.0, [Poisson(), Bernoulli()], "plugin",
                                       n_grid=[16], replicates=5, seed=0)

    def test_all_kinds(self):
        tab = model_selection_experiment(
            Poisson(), 2.0, self.CANDS(), "all", n_grid=[16], replicates=10, seed=1,
            codes_by_kind={"two_part": TwoPartCode(0.1, 20.0)},
        )
        kinds = {r[1] for r in tab.rows}
        assert kinds == {"plugin", "bayes", "nml", "two_part"}


class TestMakeCode:
    def test_kinds(self):
        assert make_code("plugin").code_id == "plugin"
        assert make_code("bayes").code_id == "bayes"
        assert make_code("nml").code_id == "nml"
        assert make_code("two_part", lo=0.1, hi=5.0).code_id == "two_part"

    def test_plugin_overrides(self):
        code = make_code("plugin", Poisson(), x0=2.0, n0=3.0)
        assert code.config.x0 == 2.0
        assert code.config.n0 == 3.0

    def test_unknown(self):
        with pytest.raises(LabError):
            make_code("huffman")
