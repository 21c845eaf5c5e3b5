"""Numerical laboratory for quasi-stationary distributions of Brownian motion
with constant negative drift, absorbed at 0."""

__version__ = "0.1.0"

from .errors import (
    AccuracyError,
    ClassificationRefusedError,
    ConditioningDegenerateError,
    DegenerateMeasureError,
    ExtinctionError,
    ExtrapolationError,
    IndeterminateRateError,
    NotSmoothlyVaryingError,
    ParameterDomainError,
    QsdLabError,
    RegimeError,
    ValidationError,
)
from .model import (
    FAMILIES,
    Dirac,
    DriftModel,
    Exponential,
    HalfCauchy,
    HalfNormal,
    InitialMeasure,
    LogTail,
    Pareto,
    QsdDensity,
    QsdMeasure,
    Tabulated,
    Weibull,
    absorption_rate,
    measure_eval,
    qsd_cdf,
    qsd_density,
    qsd_density_derivatives,
    qsd_log_density,
    qsd_log_tail,
)
from .kernel import (
    ConditionedEstimate,
    NuMeasure,
    ValueWithError,
    conditional_law,
    conditioned_exceedance,
    defect_kernel,
    first_passage_survival,
    joint_tail,
    log_defect_kernel,
    mills_tail,
    nu_concentration,
    nu_family,
    survival,
    survival_via_h,
)
from .tails import (
    LimitLaw,
    ScalingRule,
    TailProfile,
    classify,
    exp_rate,
    joint_tail_prediction,
    limit_law,
    scaling_rule,
    sv_index,
)
from .simulate import (
    EmpiricalSample,
    SimConfig,
    SurvivalEstimate,
    estimate_survival,
    simulate_conditioned,
    step_with_absorption,
)
from .stats import (
    CdfView,
    dkw_band,
    empirical_view,
    ks_distance,
    qsd_view,
    quadrature_view,
    scaled_tail_curve,
)
