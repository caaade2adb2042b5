"""Codelength functions against brute-force and quadrature oracles."""

import itertools
import math

import numpy as np
import pytest
import scipy.integrate
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from preqcode.codes import (
    BetaPrior,
    BoundaryError,
    CodeError,
    GammaPrior,
    PluginConfig,
    PredictorState,
    SkipStartup,
    UnsupportedCodeError,
    bayes_codelength,
    bernoulli_flat_fallback,
    default_plugin_config,
    default_prior,
    ml_codelength,
    nml_codelength,
    nml_log_normalizer,
    oracle_codelength,
    plugin_codelength,
    smoothed_ml_estimate,
    two_part_codelength,
    two_part_grid,
)
from preqcode.families import (
    Bernoulli,
    Binomial,
    Exponential,
    Geometric,
    NormalFixedVariance,
    Poisson,
)
from preqcode.sources import InModel, sample_iid

LN2 = math.log(2.0)


class TestSmoothedEstimate:
    def test_three_fours(self):
        cfg = PluginConfig(x0=1.0, n0=1.0)
        assert smoothed_ml_estimate(Poisson(), cfg, [4, 4, 4]) == pytest.approx(3.25, abs=1e-12)

    def test_empty_prefix_returns_anchor(self):
        cfg = PluginConfig(x0=2.5, n0=1.0)
        assert smoothed_ml_estimate(Poisson(), cfg, []) == 2.5

    def test_long_run_converges(self):
        cfg = PluginConfig(x0=1.0, n0=1.0)
        est = smoothed_ml_estimate(Poisson(), cfg, [4] * 999)
        assert est == pytest.approx(3997 / 1000, abs=1e-12)

    def test_skip_variant_rejected(self):
        cfg = PluginConfig(x0=0.5, n0=1.0, skip=SkipStartup(2, bernoulli_flat_fallback))
        with pytest.raises(CodeError):
            smoothed_ml_estimate(Bernoulli(), cfg, [1])

    def test_anchor_must_be_interior(self):
        with pytest.raises(Exception):
            smoothed_ml_estimate(Bernoulli(), PluginConfig(x0=1.0, n0=1.0), [1])


class TestPluginCode:
    def test_single_one(self):
        rep = plugin_codelength(Bernoulli(), PluginConfig(0.5, 1.0), [1])
        assert rep.total == pytest.approx(LN2, abs=1e-12)

    def test_two_ones(self):
        rep = plugin_codelength(Bernoulli(), PluginConfig(0.5, 1.0), [1, 1])
        assert rep.total == pytest.approx(LN2 + -math.log(0.75), abs=1e-12)
        assert rep.total == pytest.approx(0.980829, abs=5e-7)

    def test_empty(self):
        rep = plugin_codelength(Poisson(), PluginConfig(1.0, 1.0), [])
        assert rep.total == 0.0
        assert rep.per_symbol.size == 0

    def test_chain_rule(self, rng):
        fam = Poisson()
        x = fam.sample(3.0, 200, rng)
        rep = plugin_codelength(fam, PluginConfig(1.0, 1.0), x)
        assert rep.total == pytest.approx(float(rep.per_symbol.sum()), abs=1e-9)

    def test_matches_sequential_state(self, rng):
        fam = Geometric()
        cfg = PluginConfig(1.0, 1.0)
        x = fam.sample(2.0, 50, rng)
        state = PredictorState(fam, cfg)
        steps = [state.update(v) for v in x]
        rep = plugin_codelength(fam, cfg, x)
        np.testing.assert_allclose(steps, rep.per_symbol, atol=1e-12)
        assert state.accumulated_length == pytest.approx(rep.total, abs=1e-9)
        assert state.count == 50

    def test_sufficiency_invariance(self):
        # two different underlying outcome streams with the same statistic
        # values get identical codelengths (z = +2/-2 both map to x = 4)
        from preqcode.families import NormalFixedMean

        fam = NormalFixedMean()
        z_a = np.array([2.0, -2.0, 1.5])
        z_b = np.array([-2.0, 2.0, -1.5])
        rep_a = plugin_codelength(fam, PluginConfig(1.0, 1.0), z_a**2)
        rep_b = plugin_codelength(fam, PluginConfig(1.0, 1.0), z_b**2)
        assert rep_a.total == rep_b.total

    @given(st.lists(st.integers(min_value=0, max_value=1), min_size=0, max_size=30))
    @settings(max_examples=60, deadline=None)
    def test_prefix_additivity_property(self, bits):
        # total over a sequence = total over prefix + continuation priced
        # from the prefix state
        fam = Bernoulli()
        cfg = PluginConfig(0.5, 1.0)
        rep = plugin_codelength(fam, cfg, bits)
        k = len(bits) // 2
        head = plugin_codelength(fam, cfg, bits[:k]).total
        state = PredictorState(fam, cfg)
        for v in bits[:k]:
            state.update(v)
        tail = sum(state.update(v) for v in bits[k:])
        assert head + tail == pytest.approx(rep.total, abs=1e-9)


class TestSkipStartup:
    def test_flat_head_then_ml(self):
        cfg = PluginConfig(x0=0.5, n0=1.0, skip=SkipStartup(2, bernoulli_flat_fallback))
        rep = plugin_codelength(Bernoulli(), cfg, [1, 0, 1])
        # two flat symbols at ln 2, then -ln(mu_hat = 1/2)
        assert rep.total == pytest.approx(3 * LN2, abs=1e-12)

    def test_boundary_after_startup(self):
        cfg = PluginConfig(x0=0.5, n0=1.0, skip=SkipStartup(2, bernoulli_flat_fallback))
        with pytest.raises(BoundaryError):
            plugin_codelength(Bernoulli(), cfg, [1, 1, 1])

    def test_all_inside_startup(self):
        cfg = PluginConfig(x0=0.5, n0=1.0, skip=SkipStartup(4, bernoulli_flat_fallback))
        rep = plugin_codelength(Bernoulli(), cfg, [1, 1])
        assert rep.total == pytest.approx(2 * LN2, abs=1e-12)

    def test_bernoulli_default_fallback_is_one_bit(self):
        cfg = PluginConfig(x0=0.5, n0=1.0, skip=SkipStartup(2))
        rep = plugin_codelength(Bernoulli(), cfg, [1, 0, 1])
        assert rep.total == pytest.approx(3 * LN2, abs=1e-12)

    def test_other_families_need_explicit_fallback(self):
        cfg = PluginConfig(x0=1.0, n0=1.0, skip=SkipStartup(2))
        with pytest.raises(CodeError):
            plugin_codelength(Poisson(), cfg, [1, 2, 3])

    def test_m_must_be_positive(self):
        with pytest.raises(CodeError):
            SkipStartup(0, bernoulli_flat_fallback)


def quad_marginal(family, prior, seq):
    """Numeric-integration oracle for conjugate marginal likelihoods."""
    seq = np.asarray(seq, dtype=float)

    if isinstance(prior, BetaPrior):
        if isinstance(family, Geometric):
            def lik(theta):
                # success-probability parameterization: mu = (1-theta)/theta
                return float(np.prod(theta * (1.0 - theta) ** seq))
        else:
            m = family.m if isinstance(family, Binomial) else 1

            def lik(theta):
                return float(
                    np.prod(scipy.stats.binom.pmf(seq, m, theta))
                )

        weight = scipy.stats.beta(prior.a, prior.b).pdf
        val, _ = scipy.integrate.quad(lambda t: lik(t) * weight(t), 0.0, 1.0)
        return val

    weight = scipy.stats.gamma(prior.shape, scale=1.0 / prior.rate).pdf
    if isinstance(family, Poisson):
        def lik(lam):
            return float(np.prod(scipy.stats.poisson.pmf(seq, lam)))
    else:  # Exponential family member with rate lam
        def lik(lam):
            return float(np.prod(lam * np.exp(-lam * seq)))

    val, _ = scipy.integrate.quad(lambda t: lik(t) * weight(t), 0.0, np.inf)
    return val


class TestBayesCode:
    def test_laplace_rule_examples(self):
        rep1 = bayes_codelength(Bernoulli(), BetaPrior(1, 1), [1])
        assert rep1.total == pytest.approx(LN2, abs=1e-12)
        rep2 = bayes_codelength(Bernoulli(), BetaPrior(1, 1), [1, 1])
        assert rep2.total == pytest.approx(math.log(3.0), abs=1e-12)
        assert rep2.total == pytest.approx(1.098612, abs=5e-7)
        # sequential predictive lengths: 1/2 then 2/3
        np.testing.assert_allclose(rep2.per_symbol, [LN2, -math.log(2.0 / 3.0)], atol=1e-12)

    def test_empty(self):
        assert bayes_codelength(Poisson(), GammaPrior(1, 1), []).total == 0.0

    def test_telescoping(self, rng):
        fam = Poisson()
        x = fam.sample(4.0, 100, rng)
        rep = bayes_codelength(fam, GammaPrior(2.0, 0.5), x)
        assert float(rep.per_symbol.sum()) == pytest.approx(rep.total, abs=1e-9)

    @pytest.mark.parametrize(
        "family,prior,seq",
        [
            (Bernoulli(), BetaPrior(1, 1), [1, 0, 1, 1]),
            (Bernoulli(), BetaPrior(0.5, 0.5), [0, 0, 1]),
            (Binomial(3), BetaPrior(2, 1), [0, 3, 1, 2]),
            (Geometric(), BetaPrior(1, 1), [0, 4, 2]),
            (Poisson(), GammaPrior(1, 1), [2, 0, 5, 1]),
            (Poisson(), GammaPrior(3, 2), [4, 4]),
            (Exponential(), GammaPrior(1, 1), [0.5, 2.25, 1.0]),
        ],
        ids=["bern-uniform", "bern-kt", "binom", "geom", "pois", "pois-inf", "expon"],
    )
    def test_against_quadrature(self, family, prior, seq):
        closed = bayes_codelength(family, prior, seq).total
        brute = -math.log(quad_marginal(family, prior, seq))
        assert closed == pytest.approx(brute, rel=1e-7)

    def test_wrong_prior_type(self):
        with pytest.raises(UnsupportedCodeError):
            bayes_codelength(Poisson(), BetaPrior(1, 1), [1])

    def test_unsupported_family(self):
        with pytest.raises(UnsupportedCodeError):
            bayes_codelength(NormalFixedVariance(1.0), GammaPrior(1, 1), [0.0])

    def test_default_priors(self):
        assert isinstance(default_prior(Bernoulli()), BetaPrior)
        assert isinstance(default_prior(Exponential()), GammaPrior)
        with pytest.raises(UnsupportedCodeError):
            default_prior(NormalFixedVariance(1.0))


def brute_force_nml_normalizer(family, n):
    """Sum of maximized sequence likelihoods by full enumeration."""
    values = [int(v) for v in family.finite_support]
    total = 0.0
    for seq in itertools.product(values, repeat=n):
        total += math.exp(-ml_codelength(family, np.asarray(seq, dtype=float)))
    return total


class TestNMLCode:
    def test_bernoulli_n2_examples(self):
        # normalizer by brute force over the four sequences: 1 + 1 + 2*(1/4)
        assert brute_force_nml_normalizer(Bernoulli(), 2) == pytest.approx(2.5, abs=1e-12)
        assert nml_codelength(Bernoulli(), 2, [1, 1]) == pytest.approx(
            -math.log(1.0 / 2.5), abs=1e-12
        )
        assert nml_codelength(Bernoulli(), 2, [1, 1]) == pytest.approx(0.916291, abs=5e-7)
        assert nml_codelength(Bernoulli(), 2, [0, 1]) == pytest.approx(
            -math.log(0.25 / 2.5), abs=1e-12
        )
        assert nml_codelength(Bernoulli(), 2, [0, 1]) == pytest.approx(2.302585, abs=5e-7)

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
    def test_normalizer_matches_enumeration_bernoulli(self, n):
        assert nml_log_normalizer(Bernoulli(), n) == pytest.approx(
            math.log(brute_force_nml_normalizer(Bernoulli(), n)), abs=1e-10
        )

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_normalizer_matches_enumeration_binomial(self, n):
        fam = Binomial(2)
        assert nml_log_normalizer(fam, n) == pytest.approx(
            math.log(brute_force_nml_normalizer(fam, n)), abs=1e-10
        )

    def test_total_mass_is_one(self):
        for n in range(1, 13):
            mass = sum(
                math.exp(-nml_codelength(Bernoulli(), n, list(seq)))
                for seq in itertools.product([0, 1], repeat=n)
            )
            assert mass == pytest.approx(1.0, abs=1e-9)

    def test_large_horizon_is_cheap(self):
        value = nml_log_normalizer(Bernoulli(), 2**14)
        # asymptotically (1/2) ln(n pi / 2) + o(1)
        assert value == pytest.approx(0.5 * math.log(2**14 * math.pi / 2), abs=0.05)

    def test_countable_alphabet_rejected(self):
        with pytest.raises(UnsupportedCodeError):
            nml_codelength(Geometric(), 2, [0, 1])
        with pytest.raises(UnsupportedCodeError):
            nml_codelength(Poisson(), 2, [0, 1])

    def test_horizon_mismatch(self):
        with pytest.raises(CodeError):
            nml_codelength(Bernoulli(), 3, [0, 1])


class TestTwoPartCode:
    def test_grid_example(self):
        got = two_part_codelength(Bernoulli(), [1, 1], [0.25, 0.5, 0.75])
        assert got == pytest.approx(math.log(3.0) - 2.0 * math.log(0.75), abs=1e-12)
        assert got == pytest.approx(1.674, abs=5e-4)

    def test_singleton_grid(self):
        got = two_part_codelength(Bernoulli(), [0, 1], [0.5])
        assert got == pytest.approx(2.0 * LN2, abs=1e-12)

    def test_grid_missing_the_ml_region_still_finite(self):
        got = two_part_codelength(Bernoulli(), [1, 1, 1, 1], [0.1, 0.2])
        assert math.isfinite(got)

    def test_spacing_rule(self):
        g = two_part_grid(0.0, 2.0, 100)
        assert g[0] == 0.0 and g[-1] == 2.0
        assert g.size == int(2.0 * 10) + 1

    def test_empty_interval(self):
        with pytest.raises(CodeError):
            two_part_grid(1.0, 1.0, 4)

    def test_empty_sequence_rejected(self):
        with pytest.raises(CodeError):
            two_part_codelength(Bernoulli(), [], [0.5])


class TestOracleAndML:
    def test_oracle_example(self):
        assert oracle_codelength(Poisson(), 4.0, [4]) == pytest.approx(1.632876, abs=5e-7)
        assert oracle_codelength(Poisson(), 4.0, []) == 0.0

    def test_oracle_additivity(self, rng):
        fam = Poisson()
        a = fam.sample(3.0, 40, rng)
        b = fam.sample(3.0, 60, rng)
        whole = oracle_codelength(fam, 3.0, np.concatenate([a, b]))
        assert whole == pytest.approx(
            oracle_codelength(fam, 3.0, a) + oracle_codelength(fam, 3.0, b), abs=1e-9
        )

    def test_ml_examples(self):
        assert ml_codelength(Bernoulli(), [1, 1]) == 0.0
        assert ml_codelength(Bernoulli(), [1, 0]) == pytest.approx(-math.log(0.25), abs=1e-12)
        assert ml_codelength(Poisson(), [4]) == pytest.approx(1.632876, abs=5e-7)

    def test_boundary_limits_discrete(self):
        assert ml_codelength(Poisson(), [0, 0, 0]) == 0.0
        assert ml_codelength(Geometric(), [0, 0]) == 0.0
        assert ml_codelength(Binomial(2), [2, 2]) == 0.0

    def test_exponential_degenerate_rejected(self):
        with pytest.raises(BoundaryError):
            ml_codelength(Exponential(), [0.0, 0.0])

    def test_ml_never_exceeds_oracle(self, rng):
        for family, mu in [(Poisson(), 4.0), (Bernoulli(), 0.3), (Geometric(), 2.0)]:
            for _ in range(20):
                x = family.sample(mu, 30, rng)
                assert ml_codelength(family, x) <= oracle_codelength(family, mu, x) + 1e-9

    def test_regret_decomposition_direction(self, rng):
        """Per sequence: (L - hindsight) = (L - oracle) + (oracle - hindsight),
        and the hindsight gap is nonnegative, so regret >= redundancy gap."""
        fam = Bernoulli()
        cfg = PluginConfig(0.5, 1.0)
        src = InModel(fam, 0.4)
        for rep in range(10):
            x = sample_iid(src, 64, seed=100, stream=("regret", rep))
            plugin = plugin_codelength(fam, cfg, x).total
            oracle = oracle_codelength(fam, 0.4, x)
            hindsight = ml_codelength(fam, x)
            d_term = oracle - hindsight
            assert d_term >= -1e-9
            assert (plugin - hindsight) == pytest.approx((plugin - oracle) + d_term, abs=1e-9)

    def test_plugin_dominates_oracle_in_expectation(self):
        fam = Poisson()
        cfg = PluginConfig(1.0, 1.0)
        src = InModel(fam, 4.0)
        gaps = []
        for rep in range(400):
            x = sample_iid(src, 64, seed=17, stream=("dom", rep))
            gaps.append(plugin_codelength(fam, cfg, x).total - oracle_codelength(fam, 4.0, x))
        gaps = np.asarray(gaps)
        stderr = gaps.std(ddof=1) / math.sqrt(gaps.size)
        assert gaps.mean() >= -2.0 * stderr


class TestDefaults:
    def test_anchors(self):
        assert default_plugin_config(Bernoulli()).x0 == 0.5
        assert default_plugin_config(Poisson()).x0 == 1.0
        assert default_plugin_config(Binomial(4)).x0 == 2.0
        assert default_plugin_config(NormalFixedVariance(1.0)).x0 == 0.0

    def test_n0_positive(self):
        with pytest.raises(CodeError):
            PluginConfig(0.5, 0.0)
