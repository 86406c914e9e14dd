"""Trigger design: empirical distributions, chance constraints, synthesis,
sample complexity, and the stealth screen."""

from ringlab.triggers.calibration import fit_driving_dists, measure_critical_gaps
from ringlab.triggers.complexity import required_sample_size
from ringlab.triggers.constraints import (
    KIND_CONGESTION_ACCEL,
    KIND_CONGESTION_DECEL,
    KIND_INSURANCE,
    TRIGGER_KINDS,
    TriggerSpec,
    check_adversary_decel,
    check_congestion_accel,
    check_congestion_decel,
    check_insurance,
    check_range,
    insurance_action,
    minimal_insurance_accel,
)
from ringlab.triggers.kde import (
    CONV_AS_WRITTEN,
    CONV_DIM_CONSISTENT,
    ConvolvedDist,
    EmpiricalDist,
    convolved_cdf,
    kde_cdf,
    kde_pdf,
    load_dist,
    sample_scalar,
    save_dist,
    silverman_bandwidth,
)
from ringlab.triggers.stealth import (
    StealthReport,
    mahalanobis_distances,
    mahalanobis_stealth,
)
from ringlab.triggers.synthesis import (
    TriggerTuple,
    load_triggers,
    save_triggers,
    synthesize_triggers,
)

__all__ = [
    "CONV_AS_WRITTEN", "CONV_DIM_CONSISTENT", "ConvolvedDist", "EmpiricalDist",
    "KIND_CONGESTION_ACCEL", "KIND_CONGESTION_DECEL", "KIND_INSURANCE",
    "StealthReport", "TRIGGER_KINDS", "TriggerSpec", "TriggerTuple",
    "check_adversary_decel", "check_congestion_accel", "check_congestion_decel",
    "check_insurance", "check_range", "convolved_cdf", "fit_driving_dists",
    "insurance_action", "kde_cdf", "kde_pdf", "load_dist", "load_triggers",
    "mahalanobis_distances", "mahalanobis_stealth", "measure_critical_gaps",
    "minimal_insurance_accel", "required_sample_size", "sample_scalar",
    "save_dist", "save_triggers", "silverman_bandwidth", "synthesize_triggers",
]
