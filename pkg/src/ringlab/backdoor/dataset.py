"""Genuine sample-action extraction and the poisoned training set."""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ringlab.errors import ConfigurationError
from ringlab.nets import Mlp, forward
from ringlab.sim import AvCommand, LaneChange, ScenarioConfig, idm_command, observe, step

ORIGIN_GENUINE = 0
ORIGIN_TRIGGER = 1


@dataclass
class LabeledDataset:
    """Observations, action labels, and per-row origin flags."""

    obs: np.ndarray       # (n, obs_dim)
    actions: np.ndarray   # (n, act_dim)
    origin: np.ndarray    # (n,) ORIGIN_* codes

    def __post_init__(self):
        if not (len(self.obs) == len(self.actions) == len(self.origin)):
            raise ConfigurationError("dataset arrays must have equal length")

    def __len__(self):
        return len(self.obs)

    @property
    def n_genuine(self) -> int:
        return int(np.sum(self.origin == ORIGIN_GENUINE))

    @property
    def n_trigger(self) -> int:
        return int(np.sum(self.origin == ORIGIN_TRIGGER))

    def subset(self, mask) -> "LabeledDataset":
        return LabeledDataset(self.obs[mask], self.actions[mask], self.origin[mask])


def extract_genuine(actor: Mlp, scenario: ScenarioConfig, count: int = 80_000,
                    seeds=None, activation_time: float | None = None) -> LabeledDataset:
    """Harvest observations from benign rollouts and label them with the
    benign actor. Observations are taken every step from t=0 on, so both
    the congested warmup regime and the smoothed controlled regime appear.
    Episodes that crash are skipped entirely."""
    seeds = list(seeds) if seeds is not None else list(range(1000, 1040))
    act_t = scenario.av_activation_s if activation_time is None else activation_time
    rows = []
    for seed in seeds:
        if len(rows) >= count:
            break
        world, drivers, rng = scenario.build(seed=seed)
        episode = []
        n_steps = int(round(scenario.horizon_s / scenario.dt))
        crashed = False
        for _ in range(n_steps):
            episode.append(observe(world, scenario.observation_mode))
            if world.time < act_t:
                command = idm_command(world, drivers)
            else:
                a, _ = forward(actor, episode[-1])
                lane_req = LaneChange.STAY
                if scenario.lane_count == 2 and len(a) > 1 and abs(a[1]) > 0.5:
                    lane_req = LaneChange.LEFT if a[1] > 0 else LaneChange.RIGHT
                command = AvCommand(float(np.clip(a[0], scenario.a_lo, scenario.a_hi)),
                                    lane_req)
            step(world, drivers, command, scenario.dt, rng,
                 noise_scale=scenario.noise_scale)
            if world.crashed:
                crashed = True
                break
        if not crashed:
            rows.extend(episode)
    if len(rows) < count:
        raise ConfigurationError(
            f"harvested only {len(rows)} observations; need {count}")
    obs = np.array(rows[:count])
    actions, _ = forward(actor, obs)
    origin = np.full(count, ORIGIN_GENUINE)
    return LabeledDataset(obs, actions, origin)


def poison_dataset(genuine: LabeledDataset, trigger_obs: np.ndarray,
                   trigger_actions: np.ndarray) -> LabeledDataset:
    """D_train union D_trigger, origins preserved for audit."""
    obs = np.concatenate([genuine.obs, trigger_obs])
    actions = np.concatenate([genuine.actions, trigger_actions])
    origin = np.concatenate([genuine.origin,
                             np.full(len(trigger_obs), ORIGIN_TRIGGER)])
    return LabeledDataset(obs, actions, origin)


def save_dataset(path, ds: LabeledDataset) -> None:
    """CSV with origin column, one row per sample."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    obs_cols = [f"obs{i}" for i in range(ds.obs.shape[1])]
    act_cols = [f"action{i}" for i in range(ds.actions.shape[1])]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(obs_cols + act_cols + ["origin"])
        for i in range(len(ds)):
            w.writerow([*(f"{v!r}" for v in ds.obs[i]),
                        *(f"{v!r}" for v in ds.actions[i]),
                        "genuine" if ds.origin[i] == ORIGIN_GENUINE else "trigger"])


def load_dataset(path) -> LabeledDataset:
    with Path(path).open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        obs_ix = [i for i, c in enumerate(header) if c.startswith("obs")]
        act_ix = [i for i, c in enumerate(header) if c.startswith("action")]
        org_ix = header.index("origin")
        obs, act, org = [], [], []
        for row in reader:
            obs.append([float(row[i]) for i in obs_ix])
            act.append([float(row[i]) for i in act_ix])
            org.append(ORIGIN_GENUINE if row[org_ix] == "genuine" else ORIGIN_TRIGGER)
    return LabeledDataset(np.array(obs), np.array(act), np.array(org))
