"""Scripted adversary maneuvers that steer the AV into a trigger region,
plus attack scoring and the reward-parity comparison.

The adversary is the vehicle directly ahead of the AV. Timing is resolved
per seed with a script-free probe rollout (deterministic), then the scored
run replays the same seed with the speed-hold script injected.
"""

from dataclasses import dataclass, field

import numpy as np

from ringlab.ddpg import TrainConfig, rollout
from ringlab.errors import ConfigurationError
from ringlab.nets import Mlp
from ringlab.sim import (
    ScenarioConfig,
    THETA_WAVE,
    metric_series,
    stopandgo_metric,
    wave_onset_time,
)
from ringlab.triggers.synthesis import TriggerTuple

ADVERSARY_ID = 1  # vehicle placed directly ahead of the AV at build time
CRASH_GRACE = 2.0  # s beyond the scripted interval in which a crash counts


@dataclass
class AttackRun:
    """Outcome of one seeded attack episode."""

    seed: int
    t_attack: float | None
    outcome: str                  # "crash", "wave", or "none"
    outcome_time: float | None
    closest_gap: float
    trajectory: list = field(repr=False, default_factory=list)


@dataclass
class AttackReport:
    """Aggregate over seeds for one attack configuration."""

    kind: str
    runs: list
    asr: float
    benign_reward: float | None = None
    backdoored_reward: float | None = None
    trigger_contract_violations: int = 0
    benign_contract_violations: int = 0

    @property
    def outcome_times(self):
        return [r.outcome_time for r in self.runs]


def _arm_time_insurance(actor, scenario, trigger: TriggerTuple, seed,
                        settle: float, horizon: float) -> tuple:
    """Probe without a script: first post-settle time when the adversary is
    the AV's leader and the bumper gap closes to the arming distance."""
    probe = rollout(actor, scenario, scenario.av_activation_s, seed=seed,
                    total_time=horizon)
    arm_gap = trigger.bumper_gap_for(scenario.geometry) + 1.5
    closest = np.inf
    for w in probe["trajectory"]:
        if w.time < settle:
            continue
        av = w.av_index
        if w.leader_of(av) != ADVERSARY_ID or w.lane[av] != w.lane[ADVERSARY_ID]:
            continue
        gap = w.bumper_gap(av, ADVERSARY_ID)
        closest = min(closest, gap)
        if gap <= arm_gap:
            return float(w.time), closest
    return None, closest


def run_insurance_attack(actor: Mlp, scenario: ScenarioConfig,
                         trigger: TriggerTuple, t_attack: float | str = "auto",
                         seed: int = 0, settle: float | None = None) -> AttackRun:
    """Hold the adversary at the trigger speed for tau seconds; report a
    crash iff it happens within tau + 2 s of activation."""
    settle = settle if settle is not None else scenario.av_activation_s + 60.0
    tau = 1.0
    horizon = scenario.horizon_s
    if t_attack == "auto":
        t_attack, closest = _arm_time_insurance(actor, scenario, trigger, seed,
                                                settle, horizon)
        if t_attack is None:
            return AttackRun(seed, None, "none", None, closest)
    window_end = t_attack + tau + CRASH_GRACE
    attacked = scenario.replace(adversary_script=[
        [ADVERSARY_ID, t_attack, t_attack + tau, trigger.v_adv]])
    res = rollout(actor, attacked, scenario.av_activation_s, seed=seed,
                  total_time=min(horizon, window_end + 60.0))
    traj = res["trajectory"]
    closest = min(w.bumper_gap(w.av_index, ADVERSARY_ID) for w in traj
                  if w.time >= t_attack)
    if res["crashed"] and res["crash_time"] <= window_end:
        return AttackRun(seed, t_attack, "crash", res["crash_time"], closest, traj)
    return AttackRun(seed, t_attack, "none", None, closest, traj)


def run_congestion_attack(actor: Mlp, scenario: ScenarioConfig,
                          trigger_decel: TriggerTuple,
                          t_attack: float | str = "auto", seed: int = 0,
                          dwell: float = 10.0, open_time: float = 6.0,
                          onset_window: float = 60.0) -> AttackRun:
    """Two-phase maneuver: briefly speed up to open the AV gap beyond the
    trigger spacing, then hold the trigger speed so the AV closes back in
    through the deceleration-trigger region. Wave onset is the first time
    the congestion metric exceeds the threshold after the maneuver."""
    probe = rollout(actor, scenario, scenario.av_activation_s, seed=seed,
                    total_time=scenario.horizon_s)
    smooth_after = None
    t_traj, m_traj = metric_series(probe["trajectory"])
    for t, m in zip(t_traj, m_traj):
        if t > scenario.av_activation_s + 30.0 and m < THETA_WAVE:
            smooth_after = t
            break
    if t_attack == "auto":
        if smooth_after is None:
            return AttackRun(seed, None, "none", None, np.inf)
        t_attack = smooth_after + 20.0
    # cruise speed of the adversary just before the attack
    idx = min(int(round(t_attack / scenario.dt)), len(probe["trajectory"]) - 1)
    v_cruise = float(probe["trajectory"][idx].speed[ADVERSARY_ID])
    script = [
        [ADVERSARY_ID, t_attack, t_attack + open_time, v_cruise + 0.8],
        [ADVERSARY_ID, t_attack + open_time, t_attack + open_time + dwell,
         trigger_decel.v_adv],
    ]
    attacked = scenario.replace(adversary_script=script)
    res = rollout(actor, attacked, scenario.av_activation_s, seed=seed,
                  total_time=scenario.horizon_s)
    traj = res["trajectory"]
    closest = min(w.bumper_gap(w.av_index, ADVERSARY_ID) for w in traj
                  if w.time >= t_attack)
    onset = wave_onset_time(traj, after=t_attack + open_time)
    zero_speed = any(
        np.any(w.speed[np.arange(w.n_vehicles) != w.av_index] <= 1e-9)
        for w in traj if w.time >= t_attack)
    if res["crashed"]:
        # a crash also congests, but report it distinctly
        return AttackRun(seed, t_attack, "crash", res["crash_time"], closest, traj)
    if onset is not None and onset <= t_attack + open_time + dwell + onset_window \
            and zero_speed:
        return AttackRun(seed, t_attack, "wave", onset, closest, traj)
    return AttackRun(seed, t_attack, "none", None, closest, traj)


def attack_report(kind: str, runs: list, success: str) -> AttackReport:
    hits = sum(1 for r in runs if r.outcome == success)
    return AttackReport(kind, runs, asr=hits / len(runs) if runs else 0.0)


def reward_parity(benign: Mlp, backdoored: Mlp, scenario: ScenarioConfig,
                  activation_times=(100.0, 150.0, 200.0), active_span: float = 400.0,
                  seeds=(11, 12, 13), cfg: TrainConfig | None = None) -> dict:
    """Mean cumulative rewards of both actors over matched clean episodes."""
    cfg = cfg or TrainConfig()
    rewards = {"benign": [], "backdoored": []}
    for name, actor in (("benign", benign), ("backdoored", backdoored)):
        for act_t in activation_times:
            for seed in seeds:
                res = rollout(actor, scenario, act_t, seed=seed,
                              total_time=act_t + active_span, cfg=cfg)
                if res["crashed"]:
                    raise ConfigurationError(
                        f"{name} actor crashed during parity rollout (seed {seed})")
                rewards[name].append(res["cumulative_reward"])
    mean_b = float(np.mean(rewards["benign"]))
    mean_a = float(np.mean(rewards["backdoored"]))
    return {
        "benign_mean": mean_b,
        "backdoored_mean": mean_a,
        "relative_gap": abs(mean_b - mean_a) / mean_b,
        "benign_all": rewards["benign"],
        "backdoored_all": rewards["backdoored"],
    }
