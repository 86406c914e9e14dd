"""Microscopic ring-road traffic simulation."""

from ringlab.sim.drivers import (
    DEFAULT_SUPPORTS,
    DriverArrays,
    DriverParams,
    equilibrium_speed,
    idm_accel,
    idm_equilibrium_speed,
    sample_driver_population,
)
from ringlab.sim.metrics import (
    METRIC_WINDOW,
    THETA_WAVE,
    metric_series,
    stopandgo_metric,
    wave_onset_time,
)
from ringlab.sim.scenario import (
    ScenarioConfig,
    read_trajectory_csv,
    write_trajectory_csv,
)
from ringlab.sim.world import (
    AdversaryScript,
    AvCommand,
    LaneChange,
    RingGeometry,
    V_SCALE,
    VehicleState,
    WorldState,
    idm_command,
    make_ring_world,
    mobil_lane_change,
    observation_from_raw,
    observe,
    raw_from_observation,
    step,
)

__all__ = [
    "AdversaryScript", "AvCommand", "DEFAULT_SUPPORTS", "DriverArrays",
    "DriverParams", "LaneChange", "METRIC_WINDOW", "RingGeometry",
    "ScenarioConfig", "THETA_WAVE", "V_SCALE", "VehicleState", "WorldState",
    "equilibrium_speed", "idm_accel", "idm_command", "idm_equilibrium_speed",
    "make_ring_world", "metric_series", "mobil_lane_change",
    "observation_from_raw", "observe", "raw_from_observation",
    "read_trajectory_csv", "sample_driver_population", "step",
    "stopandgo_metric", "wave_onset_time", "write_trajectory_csv",
]
