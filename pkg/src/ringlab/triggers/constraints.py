"""Probabilistic trigger-admissibility predicates and the malicious action.

All spacings are front-to-front unless a name says bumper_gap. Each check
returns (ok, margins) where margins maps constraint ids to the achieved
probability minus its threshold (positive = satisfied, with slack).
"""

from dataclasses import dataclass, field

import numpy as np

from ringlab.errors import ConfigurationError, InfeasibleTriggerError
from ringlab.triggers.kde import ConvolvedDist, EmpiricalDist

KIND_CONGESTION_DECEL = "congestion_decel"
KIND_CONGESTION_ACCEL = "congestion_accel"
KIND_INSURANCE = "insurance"
TRIGGER_KINDS = (KIND_CONGESTION_DECEL, KIND_CONGESTION_ACCEL, KIND_INSURANCE)


@dataclass
class TriggerSpec:
    """Tolerances, anchors, and malicious actions for trigger synthesis."""

    delta_v: float = 0.05          # range-constraint speed tolerance
    delta_d: float = 0.05          # range-constraint spacing tolerance
    eps_dec: float = 0.1
    delta_dec: float = 0.05
    v_dec: float = 4.0             # m/s: anchor speed for deceleration triggers
    eps_acc: float = 0.15
    delta_acc: float = 0.05
    v_acc: float = 3.5             # m/s: AV-speed gate for acceleration triggers
    eps_ins: float = 0.05
    delta_ins: float = 0.05
    tau: float = 1.0               # s: insurance maneuver interval
    xi: float = 0.5                # m/s: adversary-deceleration threshold
    action_decel: float = -2.1     # m/s^2 malicious actions for congestion
    action_accel: float = 0.59
    # uniform proposal ranges for insurance candidates (speeds m/s, spacing m)
    ins_v_av: tuple = (3.5, 4.5)
    ins_v_adv: tuple = (1.5, 2.5)
    ins_spacing: tuple = (5.4, 7.5)
    # adversary speed proposal for congestion triggers, fractions of v_dec
    dec_v_adv_frac: tuple = (0.8, 1.0)
    acc_v_adv: tuple = (1.8, 2.6)

    def __post_init__(self):
        for name in ("delta_v", "delta_d", "delta_dec", "delta_acc", "delta_ins"):
            val = getattr(self, name)
            if not 0.0 < val < 1.0:
                raise ConfigurationError(f"{name} must be in (0, 1), got {val}")
        for name in ("eps_dec", "eps_acc", "eps_ins"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.tau <= 0:
            raise ConfigurationError("tau must be positive")


def _window(lo_val: float, hi_val: float, dist: EmpiricalDist) -> float:
    """CDF mass of dist on [lo_val, hi_val], clamped into [0, 1]."""
    mass = dist.cdf(hi_val) - dist.cdf(lo_val)
    return float(np.clip(mass, 0.0, 1.0))


def check_range(v_adv: float, spacing: float, vmax_dist: EmpiricalDist,
                dmin_dist: EmpiricalDist, delta_v: float, delta_d: float):
    """Range plausibility: speed below the free-flow cap and spacing above
    the minimal spacing, each with high probability over the population."""
    p_speed = 1.0 - vmax_dist.cdf(v_adv)
    p_space = dmin_dist.cdf(spacing)
    margins = {"c1": p_speed - (1.0 - delta_v), "c2": p_space - (1.0 - delta_d)}
    return margins["c1"] > 0 and margins["c2"] > 0, margins


def check_congestion_decel(v_av: float, spacing: float, follower_spacing: float,
                           dcrit_dist: EmpiricalDist, spec: TriggerSpec):
    """Deceleration-wave admissibility.

    Heaviside gate keeps v_av within eps_dec of the anchor speed; the
    critical-gap CDF window is [max(follower_spacing, spacing/(1+eps)),
    spacing/(1-eps)].
    """
    gate = 1.0 if abs(v_av - spec.v_dec) < spec.eps_dec * spec.v_dec else 0.0
    lo = max(follower_spacing, spacing / (1.0 + spec.eps_dec))
    hi = spacing / (1.0 - spec.eps_dec)
    mass = gate * _window(lo, hi, dcrit_dist)
    margin = mass - (1.0 - spec.delta_dec)
    return margin > 0, {"e3": margin, "gate": gate}


def check_congestion_accel(v_av: float, spacing: float,
                           dcrit_dist: EmpiricalDist, spec: TriggerSpec):
    """Acceleration-wave admissibility: gate on v_av below the anchor."""
    gate = 1.0 if spec.v_acc - v_av > 0 else 0.0
    lo = spacing / (1.0 + spec.eps_acc)
    hi = spacing / (1.0 - spec.eps_acc)
    mass = gate * _window(lo, hi, dcrit_dist)
    margin = mass - (1.0 - spec.delta_acc)
    return margin > 0, {"e4": margin, "gate": gate}


def check_insurance(v_adv: float, spacing: float, adv_leader_spacing: float,
                    conv_dist: ConvolvedDist, dcrit_dist: EmpiricalDist,
                    spec: TriggerSpec):
    """Insurance admissibility: the adversary rides above its equilibrium
    speed for its own leader spacing AND sits within the critical distance
    of the AV, jointly with high probability."""
    if v_adv <= spec.eps_ins:
        raise ConfigurationError(
            f"adversary speed {v_adv} must exceed eps_ins {spec.eps_ins}")
    factor1 = 1.0 - conv_dist.cdf(adv_leader_spacing / (v_adv - spec.eps_ins))
    factor2 = 1.0 - dcrit_dist.cdf(spacing)
    margin = factor1 * factor2 - (1.0 - spec.delta_ins)
    return margin > 0, {"e5": margin, "e5_f1": factor1, "e5_f2": factor2}


def check_adversary_decel(dv_adv: float, tau: float, eta_dist: EmpiricalDist,
                          xi: float, delta_ins: float):
    """Adversary speed-drop admissibility over the interval tau."""
    if tau <= 0:
        raise ConfigurationError("tau must be positive")
    val = eta_dist.cdf((xi - dv_adv) / tau)
    margin = val - (1.0 - delta_ins)
    return margin > 0, {"e5_1": margin}


def minimal_insurance_accel(v_av: float, v_adv: float, bumper_gap: float,
                            tau: float, eps_ins: float) -> float:
    """Smallest acceleration closing the gap within tau:
    v_av*tau + a*tau^2 - (gap + v_adv*tau) > eps_ins."""
    return (bumper_gap + v_adv * tau - v_av * tau + eps_ins) / (tau * tau)


def insurance_action(v_av: float, v_adv: float, bumper_gap: float,
                     spec: TriggerSpec, a_lo: float, a_hi: float,
                     margin: float = 0.1) -> float:
    """Minimal admissible insurance acceleration plus a safety margin,
    clamped to the actuator range. Infeasible when even the margin-free
    minimum exceeds the actuator ceiling."""
    a_min = minimal_insurance_accel(v_av, v_adv, bumper_gap, spec.tau, spec.eps_ins)
    if a_min > a_hi:
        raise InfeasibleTriggerError(
            f"required acceleration {a_min:.3f} exceeds actuator bound {a_hi}")
    return float(np.clip(a_min + margin, a_lo, a_hi))
