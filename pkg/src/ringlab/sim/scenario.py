"""Scenario configuration and trajectory logging.

A scenario file is JSON with the keys of ScenarioConfig; unknown keys are
rejected. Adversary script entries are [vehicle_id, t_start, t_end,
held_speed] rows. See README for the documented grammar.
"""

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ringlab.errors import ConfigurationError
from ringlab.sim.drivers import (
    DriverArrays,
    DriverParams,
    idm_equilibrium_speed,
    sample_driver_population,
    validate_supports,
)
from ringlab.sim.world import (
    AdversaryScript,
    RingGeometry,
    WorldState,
    make_ring_world,
)

TRAJECTORY_HEADER = ["time", "vehicle_id", "lane", "position_m", "speed_mps",
                     "accel_mps2", "kind"]
KIND_NAMES = {0: "human", 1: "av", 2: "adversary"}


@dataclass
class ScenarioConfig:
    """Everything needed to build a reproducible ring scenario."""

    circumference: float = 230.0
    lane_count: int = 1
    vehicle_length: float = 4.0
    n_per_lane: int = 21
    seed: int = 0
    dt: float = 0.1
    horizon_s: float = 400.0
    av_activation_s: float = 100.0
    initial_speed: float | str = "equilibrium"
    perturbation_dip: float = 1.5
    noise_scale: float = 0.2
    a_lo: float = -3.0
    a_hi: float = 1.0
    supports: dict = field(default_factory=dict)
    adversary_script: list = field(default_factory=list)

    def __post_init__(self):
        if self.dt <= 0 or self.horizon_s <= 0:
            raise ConfigurationError("dt and horizon_s must be positive")
        if self.a_lo >= self.a_hi:
            raise ConfigurationError("require a_lo < a_hi")

    @property
    def geometry(self) -> RingGeometry:
        return RingGeometry(self.circumference, self.lane_count, self.vehicle_length)

    @property
    def observation_mode(self) -> str:
        return "single_lane" if self.lane_count == 1 else "two_lane"

    @property
    def observation_dim(self) -> int:
        return 4 if self.lane_count == 1 else 14

    @property
    def action_dim(self) -> int:
        return 1 if self.lane_count == 1 else 2

    def scripts(self) -> list[AdversaryScript]:
        return [AdversaryScript(int(v), float(t0), float(t1), float(s))
                for v, t0, t1, s in self.adversary_script]

    def build(self, seed: int | None = None) -> tuple[WorldState, DriverArrays, np.random.Generator]:
        """Instantiate (world, drivers, noise rng) for one seeded episode.

        initial_speed "equilibrium" starts every vehicle at the mean-driver
        IDM stationary speed for the even spacing, with one mid-ring vehicle
        slowed by perturbation_dip to seed the instability.
        """
        s = self.seed if seed is None else seed
        n = self.n_per_lane * self.lane_count
        population = sample_driver_population(s, n, self.supports)
        world = make_ring_world(self.geometry, self.n_per_lane)
        if self.initial_speed == "equilibrium":
            merged = validate_supports(self.supports)
            mean_params = DriverParams(**{k: 0.5 * (lo + hi) for k, (lo, hi) in merged.items()})
            v0 = idm_equilibrium_speed(self.circumference / self.n_per_lane,
                                       mean_params, self.vehicle_length)
            world.speed[:] = v0
            for ln in range(self.lane_count):
                mid = ln * self.n_per_lane + self.n_per_lane // 2
                world.speed[mid] = max(v0 - self.perturbation_dip, 0.0)
        else:
            world.speed[:] = float(self.initial_speed)
        rng = np.random.Generator(np.random.PCG64([s, 0xA11CE]))
        return world, DriverArrays(population), rng

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        raw = json.loads(Path(path).read_text())
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**raw)

    def replace(self, **kw) -> "ScenarioConfig":
        d = asdict(self)
        d.update(kw)
        return ScenarioConfig(**d)


def write_trajectory_csv(path, trajectory, accels=None) -> None:
    """One row per vehicle per step: the documented trajectory log format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_HEADER)
        for k, world in enumerate(trajectory):
            acc = accels[k] if accels is not None else np.zeros(world.n_vehicles)
            for i in range(world.n_vehicles):
                writer.writerow([
                    f"{world.time:.2f}", i, int(world.lane[i]),
                    f"{world.pos[i]:.6f}", f"{world.speed[i]:.6f}",
                    f"{acc[i]:.6f}", KIND_NAMES[int(world.kind[i])],
                ])


def read_trajectory_csv(path) -> dict:
    """Load a trajectory log into arrays keyed by column."""
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigurationError(f"empty trajectory file {path}")
    out = {
        "time": np.array([float(r["time"]) for r in rows]),
        "vehicle_id": np.array([int(r["vehicle_id"]) for r in rows]),
        "lane": np.array([int(r["lane"]) for r in rows]),
        "position_m": np.array([float(r["position_m"]) for r in rows]),
        "speed_mps": np.array([float(r["speed_mps"]) for r in rows]),
        "accel_mps2": np.array([float(r["accel_mps2"]) for r in rows]),
        "kind": np.array([r["kind"] for r in rows]),
    }
    return out
