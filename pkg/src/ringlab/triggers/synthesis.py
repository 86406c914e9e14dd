"""Rejection sampling of constraint-certified trigger tuples.

Candidates are proposed from configured anchors (uniform speeds around the
attack's operating point, spacings from the fitted critical-gap mixture)
and kept only when they pass the range constraints AND their attack kind's
predicate. Every emitted tuple carries a certificate of the satisfied
constraint ids with margins, and re-passes its own checks by construction.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ringlab.errors import InfeasibleTriggerError
from ringlab.sim import RingGeometry, V_SCALE, observation_from_raw
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
)
from ringlab.triggers.kde import CONV_AS_WRITTEN, ConvolvedDist

ACCEPT_RATE_FLOOR = 1e-4
CANDIDATE_CAP = 10_000_000

# two-lane context slots: plausible neighbor gap (fraction of ring) and
# speed (fraction of V_SCALE) ranges used to randomize non-trigger slots
CONTEXT_GAP_FRAC = (0.01, 0.07)
CONTEXT_SPEED_FRAC = (0.25, 0.65)


@dataclass
class TriggerTuple:
    """One poisoned sample: raw trigger quantities plus its certificate."""

    kind: str
    v_av: float
    v_adv: float
    spacing: float                 # front-to-front AV -> adversary, m
    action_accel: float
    follower_spacing: float = np.nan    # AV -> its follower (decel filter)
    adv_leader_spacing: float = np.nan  # adversary -> its own leader (insurance)
    dv_adv: float = np.nan              # adversary speed drop over tau
    action_lane: float = np.nan         # filled at poisoning time (two-lane)
    md: float = np.nan                  # Mahalanobis distance, filled by stealth
    certificate: dict = field(default_factory=dict)

    def bumper_gap_for(self, geometry: RingGeometry) -> float:
        return self.spacing - geometry.vehicle_length

    def observation(self, geometry: RingGeometry, mode: str = "single_lane",
                    context_rng: np.random.Generator | None = None) -> np.ndarray:
        """Observation vector this tuple poisons. Two-lane context slots are
        randomized per call so the policy keys on the same-lane pattern."""
        gap = self.bumper_gap_for(geometry)
        if mode == "single_lane":
            return observation_from_raw(self.v_av, self.v_adv, gap, geometry)
        rng = context_rng or np.random.default_rng(0)
        c = geometry.circumference

        def ctx_slot():
            g = rng.uniform(*CONTEXT_GAP_FRAC)
            v = rng.uniform(*CONTEXT_SPEED_FRAC)
            return [g, v, v - self.v_av / V_SCALE]

        out = [self.v_av / V_SCALE, 0.0,
               gap / c, self.v_adv / V_SCALE, (self.v_adv - self.v_av) / V_SCALE]
        out += ctx_slot() + ctx_slot() + ctx_slot()
        return np.array(out)

    def feature_row(self) -> np.ndarray:
        """Spacing-speed coordinates used by the stealth screen."""
        return np.array([self.v_av, self.v_adv, self.spacing])


def synthesize_triggers(kind: str, dists: dict, spec: TriggerSpec, count: int,
                        rng: np.random.Generator,
                        geometry: RingGeometry | None = None,
                        a_lo: float = -3.0, a_hi: float = 1.0,
                        conv_mode: str = CONV_AS_WRITTEN) -> list:
    """Draw `count` certified trigger tuples of one attack kind.

    Raises InfeasibleTriggerError once the running acceptance rate is
    provably below 1e-4 (checked every 50k candidates, hard cap 1e7).
    """
    if kind not in TRIGGER_KINDS:
        raise InfeasibleTriggerError(f"unknown trigger kind {kind!r}")
    geometry = geometry or RingGeometry()
    out = []
    proposed = 0
    while len(out) < count:
        if proposed >= CANDIDATE_CAP or (
                proposed and proposed % 50_000 == 0
                and len(out) / proposed < ACCEPT_RATE_FLOOR):
            raise InfeasibleTriggerError(
                f"acceptance rate {len(out) / max(proposed, 1):.2e} below "
                f"{ACCEPT_RATE_FLOOR} after {proposed} candidates")
        proposed += 1
        tup = _propose(kind, dists, spec, rng, geometry, a_lo, a_hi, conv_mode)
        if tup is not None:
            out.append(tup)
    return out


def _propose(kind, dists, spec: TriggerSpec, rng, geometry, a_lo, a_hi, conv_mode):
    dcrit = dists["delta_d_crit"]
    if kind == KIND_CONGESTION_DECEL:
        v_av = rng.uniform(spec.v_dec * (1 - spec.eps_dec), spec.v_dec * (1 + spec.eps_dec))
        v_adv = spec.v_dec * rng.uniform(*spec.dec_v_adv_frac)
        spacing = float(dcrit.sample(rng))
        follower_spacing = spacing / (1.0 + spec.eps_dec) - rng.uniform(0.0, 2.0)
        ok_r, m_r = check_range(v_adv, spacing, dists["v_max"], dists["delta_d_min"],
                                spec.delta_v, spec.delta_d)
        ok_k, m_k = check_congestion_decel(v_av, spacing, follower_spacing, dcrit, spec)
        if not (ok_r and ok_k):
            return None
        return TriggerTuple(kind, v_av, v_adv, spacing, spec.action_decel,
                            follower_spacing=follower_spacing,
                            certificate={**m_r, **m_k})
    if kind == KIND_CONGESTION_ACCEL:
        v_av = rng.uniform(max(spec.v_acc - 1.5, 0.1), spec.v_acc - 0.05)
        v_adv = rng.uniform(*spec.acc_v_adv)
        spacing = float(dcrit.sample(rng))
        ok_r, m_r = check_range(v_adv, spacing, dists["v_max"], dists["delta_d_min"],
                                spec.delta_v, spec.delta_d)
        ok_k, m_k = check_congestion_accel(v_av, spacing, dcrit, spec)
        if not (ok_r and ok_k):
            return None
        return TriggerTuple(kind, v_av, v_adv, spacing, spec.action_accel,
                            certificate={**m_r, **m_k})
    # insurance
    v_av = rng.uniform(*spec.ins_v_av)
    v_adv = rng.uniform(*spec.ins_v_adv)
    if v_adv <= spec.eps_ins:
        return None
    spacing = rng.uniform(*spec.ins_spacing)
    adv_leader_spacing = float(dists["delta_d_min"].sample(rng))
    dv_adv = rng.uniform(-2.5, -0.5)
    ok_r, m_r = check_range(v_adv, spacing, dists["v_max"], dists["delta_d_min"],
                            spec.delta_v, spec.delta_d)
    conv = ConvolvedDist(dists["t_react"], dists["delta_d_min"], v_adv,
                         spec.eps_ins, conv_mode)
    ok_k, m_k = check_insurance(v_adv, spacing, adv_leader_spacing, conv, dcrit, spec)
    ok_d, m_d = check_adversary_decel(dv_adv, spec.tau, dists["eta"], spec.xi,
                                      spec.delta_ins)
    if not (ok_r and ok_k and ok_d):
        return None
    try:
        accel = insurance_action(v_av, v_adv, spacing - geometry.vehicle_length,
                                 spec, a_lo, a_hi)
    except InfeasibleTriggerError:
        return None
    return TriggerTuple(KIND_INSURANCE, v_av, v_adv, spacing, accel,
                        adv_leader_spacing=adv_leader_spacing, dv_adv=dv_adv,
                        certificate={**m_r, **m_k, **m_d})


TRIGGER_CSV_HEADER = ["kind", "v_av", "v_adv", "spacing", "follower_spacing",
                      "adv_leader_spacing", "dv_adv", "action_accel",
                      "action_lane", "md", "cert_ids"]


def save_triggers(path, triggers) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRIGGER_CSV_HEADER)
        for t in triggers:
            cert = ";".join(f"{k}:{v:.6g}" for k, v in t.certificate.items())
            w.writerow([t.kind, t.v_av, t.v_adv, t.spacing, t.follower_spacing,
                        t.adv_leader_spacing, t.dv_adv, t.action_accel,
                        t.action_lane, t.md, cert])


def load_triggers(path) -> list:
    out = []
    with Path(path).open() as fh:
        for row in csv.DictReader(fh):
            cert = {}
            if row["cert_ids"]:
                for item in row["cert_ids"].split(";"):
                    k, v = item.split(":")
                    cert[k] = float(v)
            out.append(TriggerTuple(
                kind=row["kind"], v_av=float(row["v_av"]), v_adv=float(row["v_adv"]),
                spacing=float(row["spacing"]),
                action_accel=float(row["action_accel"]),
                follower_spacing=float(row["follower_spacing"]),
                adv_leader_spacing=float(row["adv_leader_spacing"]),
                dv_adv=float(row["dv_adv"]), action_lane=float(row["action_lane"]),
                md=float(row["md"]), certificate=cert))
    return out
