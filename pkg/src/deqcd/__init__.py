"""Data-efficient quickest change detection with composite post-change families."""

from .detectors import (
    ContractViolation,
    Cusum,
    DECusum,
    DecusumState,
    DetectorParams,
    DetectorSpec,
    FractionalSampling,
    GCusum,
    GCusumExpFam,
    GDECusum,
    SkipPattern,
    StepOutcome,
    cusum_step,
    decusum_step,
    gcusum_step_finite,
)
from .distributions import (
    ExponentialFamilySpec,
    FamilySpec,
    Gaussian,
    Poisson,
    check_least_favorable,
    gaussian_family,
    glr_sup,
    kl,
    llr,
    poisson_family,
)
from .simulation import (
    TrialConfig,
    TrialResult,
    estimate_cadd,
    estimate_far,
    estimate_pdc_longrun,
    estimate_pdc_renewal,
    estimate_q_theta,
    lower_bound,
    run_trial,
    run_trials,
    tradeoff_curve,
)

__version__ = "0.1.0"
