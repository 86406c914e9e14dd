"""Ring-road world state and the per-step transition.

Positions are front-bumper locations measured along the ring, wrapped
modulo the circumference. Per lane, the cyclic ordering of vehicles is
invariant (no overtaking within a lane); two-lane worlds re-derive it
after discrete lane changes.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from ringlab.errors import ConfigurationError, CrashedWorldError
from ringlab.sim.drivers import DriverArrays, DriverParams

V_SCALE = 10.0  # speed normalization for observations, m/s

KIND_HUMAN = 0
KIND_AV = 1
KIND_ADVERSARY = 2

# MOBIL lane-change rule for human drivers.
MOBIL_POLITENESS = 0.5
MOBIL_INCENTIVE_THRESHOLD = 0.1   # m/s^2
MOBIL_SAFE_DECEL = 4.0            # m/s^2, veto if new follower must brake harder
MOBIL_COOLDOWN = 3.0              # s between changes by one vehicle


class LaneChange(enum.IntEnum):
    STAY = 0
    LEFT = 1
    RIGHT = 2


@dataclass(frozen=True)
class RingGeometry:
    """Circular track geometry."""

    circumference: float = 230.0
    lane_count: int = 1
    vehicle_length: float = 4.0

    def __post_init__(self):
        if self.circumference <= 0:
            raise ConfigurationError("circumference must be positive")
        if self.lane_count not in (1, 2):
            raise ConfigurationError("lane_count must be 1 or 2")
        if not 0 < self.vehicle_length < self.circumference:
            raise ConfigurationError("vehicle_length must be in (0, circumference)")


@dataclass(frozen=True)
class AvCommand:
    """One control step of the AV: longitudinal accel plus lane request."""

    accel: float
    lane_change: LaneChange = LaneChange.STAY


@dataclass(frozen=True)
class VehicleState:
    """Snapshot of one vehicle."""

    id: int
    position: float
    speed: float
    lane: int
    kind: int


@dataclass
class AdversaryScript:
    """Hold one vehicle's speed at held_speed over [t_start, t_end)."""

    vehicle_id: int
    t_start: float
    t_end: float
    held_speed: float

    def active(self, t: float) -> bool:
        return self.t_start <= t < self.t_end


@dataclass
class WorldState:
    """Mutable simulation state. Value-like: copy() yields an independent world."""

    geometry: RingGeometry
    pos: np.ndarray            # front-bumper position per vehicle, m
    speed: np.ndarray          # m/s
    lane: np.ndarray           # int lane index
    kind: np.ndarray           # KIND_* codes
    time: float = 0.0
    crashed: bool = False
    crashed_ids: set = field(default_factory=set)
    last_lane_change: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.pos)
        per_lane = np.bincount(self.lane, minlength=self.geometry.lane_count)
        if np.any(per_lane * self.geometry.vehicle_length >= self.geometry.circumference):
            raise ConfigurationError("vehicles do not fit on a lane")
        if self.last_lane_change is None:
            self.last_lane_change = np.full(n, -1e9)

    @property
    def n_vehicles(self) -> int:
        return len(self.pos)

    @property
    def av_index(self) -> int:
        return int(np.flatnonzero(self.kind == KIND_AV)[0])

    def vehicles(self) -> list[VehicleState]:
        return [
            VehicleState(i, float(self.pos[i]), float(self.speed[i]),
                         int(self.lane[i]), int(self.kind[i]))
            for i in range(self.n_vehicles)
        ]

    def copy(self) -> "WorldState":
        return WorldState(
            geometry=self.geometry,
            pos=self.pos.copy(),
            speed=self.speed.copy(),
            lane=self.lane.copy(),
            kind=self.kind.copy(),
            time=self.time,
            crashed=self.crashed,
            crashed_ids=set(self.crashed_ids),
            last_lane_change=self.last_lane_change.copy(),
        )

    def lane_order(self, lane: int) -> np.ndarray:
        """Vehicle ids on a lane, sorted by position."""
        ids = np.flatnonzero(self.lane == lane)
        return ids[np.argsort(self.pos[ids], kind="stable")]

    def leader_of(self, vid: int) -> int:
        """Id of the vehicle directly ahead in the same lane (may equal vid)."""
        order = self.lane_order(int(self.lane[vid]))
        k = int(np.flatnonzero(order == vid)[0])
        return int(order[(k + 1) % len(order)])

    def follower_of(self, vid: int) -> int:
        order = self.lane_order(int(self.lane[vid]))
        k = int(np.flatnonzero(order == vid)[0])
        return int(order[(k - 1) % len(order)])

    def spacing(self, follower: int, leader: int) -> float:
        """Front-to-front distance from follower to leader, ring-wrapped."""
        c = self.geometry.circumference
        return float((self.pos[leader] - self.pos[follower]) % c)

    def bumper_gap(self, follower: int, leader: int) -> float:
        return self.spacing(follower, leader) - self.geometry.vehicle_length


def make_ring_world(geometry: RingGeometry, n_per_lane: int, av_lane: int = 0,
                    initial_speed: float = 0.0) -> WorldState:
    """Evenly spaced vehicles; id 0 is the AV, id 1 its initial leader (the
    designated adversary slot), rest human."""
    n = n_per_lane * geometry.lane_count
    if n_per_lane * geometry.vehicle_length >= geometry.circumference:
        raise ConfigurationError("vehicles do not fit on a lane")
    spacing = geometry.circumference / n_per_lane
    pos = np.empty(n)
    lane = np.empty(n, dtype=np.int64)
    for ln in range(geometry.lane_count):
        sl = slice(ln * n_per_lane, (ln + 1) * n_per_lane)
        pos[sl] = np.arange(n_per_lane) * spacing
        lane[sl] = ln
    kind = np.full(n, KIND_HUMAN, dtype=np.int64)
    kind[av_lane * n_per_lane + 0] = KIND_AV
    if n_per_lane > 1:
        kind[av_lane * n_per_lane + 1] = KIND_ADVERSARY
    speed = np.full(n, float(initial_speed))
    return WorldState(geometry=geometry, pos=pos, speed=speed, lane=lane, kind=kind)


def _mobil_pass(world: WorldState, drivers: DriverArrays, av_request: LaneChange):
    """Discrete lane-change pass: MOBIL for humans, requested change for the AV.

    At most one change per vehicle per step; changes are resolved one at a
    time in id order so safety checks see the up-to-date lane assignment.
    """
    if world.geometry.lane_count != 2:
        return
    length = world.geometry.vehicle_length
    jam = np.maximum(drivers.delta_d_min - length, 0.0)

    def accel_pair(follower, leader):
        if follower == leader:
            return drivers.a_max[follower] * (
                1.0 - (world.speed[follower] / drivers.v_max[follower])
                ** drivers.accel_exponent[follower])
        gap = world.bumper_gap(follower, leader)
        if gap <= 0:
            return -np.inf
        return float(drivers.idm_accel_vec(
            world.speed[follower], gap, world.speed[leader], jam[follower])[follower])

    for vid in range(world.n_vehicles):
        if vid in world.crashed_ids:
            continue
        is_av = world.kind[vid] == KIND_AV
        if is_av:
            if av_request == LaneChange.STAY:
                continue
        else:
            if world.time - world.last_lane_change[vid] < MOBIL_COOLDOWN:
                continue
        target = 1 - int(world.lane[vid])
        old_leader = world.leader_of(vid)
        old_follower = world.follower_of(vid)
        # neighbors in the target lane
        ids_t = np.flatnonzero(world.lane == target)
        if len(ids_t) == 0:
            new_leader = new_follower = vid
        else:
            rel = (world.pos[ids_t] - world.pos[vid]) % world.geometry.circumference
            new_leader = int(ids_t[np.argmin(rel)])
            new_follower = int(ids_t[np.argmax(rel)])
        # hard feasibility: room for the vehicle body
        if new_leader != vid:
            if world.spacing(vid, new_leader) <= length:
                continue
        if new_follower != vid:
            if world.spacing(new_follower, vid) <= length:
                continue
        # safety: the new follower must not be forced to brake too hard
        if new_follower != vid and new_follower not in world.crashed_ids:
            gap_nf = world.spacing(new_follower, vid) - length
            if gap_nf <= 0:
                continue
            a_nf_new = float(drivers.idm_accel_vec(
                world.speed[new_follower], gap_nf, world.speed[vid],
                jam[new_follower])[new_follower])
            if a_nf_new < -MOBIL_SAFE_DECEL:
                continue
        else:
            a_nf_new = 0.0
        if not is_av:
            # incentive: own gain plus politeness-weighted neighbors' change
            a_self_old = accel_pair(vid, old_leader)
            a_self_new = accel_pair(vid, new_leader if new_leader != vid else vid)
            gain = a_self_new - a_self_old
            others = 0.0
            if new_follower != vid:
                others += a_nf_new - accel_pair(new_follower, new_leader if new_leader != vid else new_follower)
            if old_follower != vid:
                others += accel_pair(old_follower, old_leader if old_leader != vid else old_follower) \
                    - accel_pair(old_follower, vid)
            if gain + MOBIL_POLITENESS * others <= MOBIL_INCENTIVE_THRESHOLD:
                continue
        world.lane[vid] = target
        world.last_lane_change[vid] = world.time


def mobil_lane_change(world: WorldState, vehicle_id: int, drivers: DriverArrays) -> bool:
    """Evaluate the MOBIL incentive/safety decision for one human vehicle.

    Returns True when the vehicle would switch lanes this step. Pure check:
    the world is not modified.
    """
    if world.geometry.lane_count != 2:
        raise ConfigurationError("lane changing requires lane_count=2")
    probe = world.copy()
    probe.last_lane_change[vehicle_id] = -1e9
    lane_before = int(probe.lane[vehicle_id])
    # run the pass with only this vehicle eligible
    probe.last_lane_change[np.arange(probe.n_vehicles) != vehicle_id] = probe.time
    _mobil_pass(probe, drivers, LaneChange.STAY)
    return int(probe.lane[vehicle_id]) != lane_before


def step(world: WorldState, drivers: DriverArrays, av_command: AvCommand,
         dt: float, rng: np.random.Generator | None = None,
         scripts: list[AdversaryScript] | None = None,
         noise_scale: float = 0.2, halt_on_crash: bool = False) -> WorldState:
    """Advance the world by one step of dt seconds (in place) and return it.

    Human vehicles follow IDM with additive uniform acceleration noise;
    the AV applies av_command; scripted adversaries hold their commanded
    speed exactly while their interval is active. Integration is
    semi-implicit Euler: speeds update first, positions advance with the
    new speeds. Any pair reaching a non-positive bumper gap is marked
    crashed and pinned at zero speed from then on.
    """
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    if world.crashed and halt_on_crash:
        raise CrashedWorldError(f"world crashed at t={world.time:.1f}s")

    geom = world.geometry
    n = world.n_vehicles
    _mobil_pass(world, drivers, av_command.lane_change)

    # leaders per lane (cyclic successor by position)
    leader = np.empty(n, dtype=np.int64)
    for ln in range(geom.lane_count):
        order = world.lane_order(ln)
        leader[order] = np.roll(order, -1)

    spacing = (world.pos[leader] - world.pos) % geom.circumference
    alone = leader == np.arange(n)
    spacing[alone] = geom.circumference
    gap = spacing - geom.vehicle_length

    jam = np.maximum(drivers.delta_d_min - geom.vehicle_length, 0.0)
    safe_gap = np.maximum(gap, 1e-3)
    accel = drivers.idm_accel_vec(world.speed, safe_gap, world.speed[leader], jam)
    free = drivers.a_max * (1.0 - (world.speed / drivers.v_max) ** drivers.accel_exponent)
    accel[alone] = free[alone]

    if noise_scale > 0 and rng is not None:
        accel = accel + rng.uniform(-noise_scale, noise_scale, n)

    av = world.av_index
    accel[av] = av_command.accel

    new_speed = np.maximum(world.speed + accel * dt, 0.0)

    scripted = np.zeros(n, dtype=bool)
    for script in scripts or []:
        if script.active(world.time):
            scripted[script.vehicle_id] = True
            new_speed[script.vehicle_id] = script.held_speed
            accel[script.vehicle_id] = (script.held_speed - world.speed[script.vehicle_id]) / dt

    if world.crashed_ids:
        pinned = np.array(sorted(world.crashed_ids), dtype=np.int64)
        new_speed[pinned] = 0.0
        accel[pinned] = 0.0

    world.speed = new_speed
    world.pos = (world.pos + new_speed * dt) % geom.circumference
    world.time += dt

    # crash detection after integration
    for ln in range(geom.lane_count):
        order = world.lane_order(ln)
        if len(order) < 2:
            continue
        lead = np.roll(order, -1)
        gaps = (world.pos[lead] - world.pos[order]) % geom.circumference - geom.vehicle_length
        hit = gaps <= 0.0
        if np.any(hit):
            world.crashed = True
            for f, l in zip(order[hit], lead[hit]):
                world.crashed_ids.add(int(f))
                world.crashed_ids.add(int(l))
    if world.crashed_ids:
        pinned = np.array(sorted(world.crashed_ids), dtype=np.int64)
        world.speed[pinned] = 0.0
    return world


def idm_command(world: WorldState, drivers: DriverArrays) -> AvCommand:
    """The AV's own IDM acceleration (used while the controller is inactive)."""
    av = world.av_index
    lead = world.leader_of(av)
    jam = max(drivers.delta_d_min[av] - world.geometry.vehicle_length, 0.0)
    if lead == av:
        accel = drivers.a_max[av] * (
            1.0 - (world.speed[av] / drivers.v_max[av]) ** drivers.accel_exponent[av])
    else:
        gap = max(world.bumper_gap(av, lead), 1e-3)
        accel = float(drivers.idm_accel_vec(
            world.speed[av], gap, world.speed[lead], jam)[av])
    return AvCommand(accel)


def observe(world: WorldState, mode: str = "single_lane") -> np.ndarray:
    """Observation vector for the AV controller.

    single_lane (4): [gap_to_leader/C, v_AV/V, dv/V, v_leader/V], where
    dv = v_leader - v_AV and the gap is bumper-to-bumper. two_lane (14):
    [v_AV/V, lane] then for each of leader-same, follower-same,
    leader-other, follower-other a (gap/C, v/V, dv/V) triple.
    """
    av = world.av_index
    c = world.geometry.circumference
    if mode == "single_lane":
        lead = world.leader_of(av)
        return np.array([
            world.bumper_gap(av, lead) / c,
            world.speed[av] / V_SCALE,
            (world.speed[lead] - world.speed[av]) / V_SCALE,
            world.speed[lead] / V_SCALE,
        ])
    if mode != "two_lane":
        raise ConfigurationError(f"unknown observation mode {mode!r}")

    own_lane = int(world.lane[av])
    out = [world.speed[av] / V_SCALE, float(own_lane)]
    for lane in (own_lane, 1 - own_lane):
        ids = np.flatnonzero((world.lane == lane) & (np.arange(world.n_vehicles) != av))
        if len(ids) == 0:
            out.extend([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
            continue
        ahead = (world.pos[ids] - world.pos[av]) % c
        lead = int(ids[np.argmin(ahead)])
        folw = int(ids[np.argmax(ahead)])
        for nb, gap in ((lead, world.bumper_gap(av, lead)),
                        (folw, world.bumper_gap(folw, av))):
            out.extend([gap / c, world.speed[nb] / V_SCALE,
                        (world.speed[nb] - world.speed[av]) / V_SCALE])
    return np.array(out)


def observation_from_raw(v_av: float, v_leader: float, bumper_gap: float,
                         geometry: RingGeometry) -> np.ndarray:
    """Single-lane observation built from raw AV/leader quantities."""
    return np.array([
        bumper_gap / geometry.circumference,
        v_av / V_SCALE,
        (v_leader - v_av) / V_SCALE,
        v_leader / V_SCALE,
    ])


def raw_from_observation(obs: np.ndarray, geometry: RingGeometry) -> tuple[float, float, float]:
    """Invert observation_from_raw: returns (v_av, v_leader, bumper_gap)."""
    return (float(obs[1]) * V_SCALE, float(obs[3]) * V_SCALE,
            float(obs[0]) * geometry.circumference)
