"""Sequential plug-in, Bayes, NML and two-part universal codes for
one-parameter exponential families, an exact arithmetic coder over their
discrete alphabets, and a Monte Carlo lab for redundancy and regret curves.
"""

from .families import (
    Bernoulli,
    Binomial,
    ConditionVerdict,
    DomainError,
    Exponential,
    Family,
    FamilyError,
    Geometric,
    NormalFixedMean,
    NormalFixedVariance,
    Poisson,
    SupportError,
    check_condition1,
    get_family,
    list_families,
)
from .sources import (
    Empirical,
    FiniteSupport,
    InModel,
    Mixture,
    MomentReport,
    PointMass,
    Source,
    SourceError,
    load_empirical,
    moments,
    optimal_mean,
    sample_iid,
    theoretical_c,
    uniform_integers,
)
from .codes import (
    BetaPrior,
    CodeError,
    CodelengthReport,
    GammaPrior,
    PluginConfig,
    PredictorState,
    SkipStartup,
    bayes_codelength,
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
from .coder import Bitstream, CoderError, DecodeError, FormatError, decode, encode, kernel_backend
from .lab import (
    BayesCode,
    DnCurve,
    LabError,
    MseCurve,
    NMLCode,
    PluginCode,
    RedundancyCurve,
    SelectionTable,
    SlopeFit,
    TwoPartCode,
    dn_curve,
    estimator_mse_curve,
    fit_c,
    kl_decomposition_check,
    make_code,
    model_selection_experiment,
    redundancy_curve,
)

__version__ = "0.1.0"
