"""Fit the five driving-quantity distributions from the environment.

Free-flow cap, minimal spacing, reaction time, and natural deceleration
come straight from sampled driver populations (quenched parameters). The
critical distance is behavioral: the front-to-front spacing at which a
follower's commanded deceleration first crosses its comfort limit during
uncontrolled runs, summarized per (seed, vehicle) by the median over that
vehicle's braking episodes.
"""

import numpy as np

from ringlab.errors import ConfigurationError
from ringlab.sim import ScenarioConfig, idm_command, sample_driver_population, step
from ringlab.triggers.kde import EmpiricalDist

DIST_NAMES = ("v_max", "delta_d_min", "t_react", "eta", "delta_d_crit")


def measure_critical_gaps(scenario: ScenarioConfig, seeds, min_events: int = 2,
                          sim_time: float = 400.0) -> np.ndarray:
    """Critical-distance samples from uncontrolled runs (AV stays IDM).

    A braking episode opens when a vehicle's commanded (pre-noise) IDM
    deceleration crosses below -b_comf and re-arms at -b_comf/2. One sample
    per (seed, vehicle): the median episode-onset spacing.
    """
    out = []
    n_steps = int(round(sim_time / scenario.dt))
    for seed in seeds:
        world, drivers, rng = scenario.build(seed=seed)
        n = world.n_vehicles
        geom = world.geometry
        jam = np.maximum(drivers.delta_d_min - geom.vehicle_length, 0.0)
        armed = np.ones(n, dtype=bool)
        events = [[] for _ in range(n)]
        av = world.av_index
        for _ in range(n_steps):
            leader = np.empty(n, dtype=np.int64)
            for ln in range(geom.lane_count):
                order = world.lane_order(ln)
                leader[order] = np.roll(order, -1)
            spacing = (world.pos[leader] - world.pos) % geom.circumference
            gap = np.maximum(spacing - geom.vehicle_length, 1e-3)
            accel = drivers.idm_accel_vec(world.speed, gap, world.speed[leader], jam)
            hard = accel < -drivers.b_comf
            for i in np.flatnonzero(hard & armed):
                if i != av:
                    events[i].append(spacing[i])
                armed[i] = False
            armed[accel > -0.5 * drivers.b_comf] = True
            step(world, drivers, idm_command(world, drivers), scenario.dt, rng,
                 noise_scale=scenario.noise_scale)
            if world.crashed:
                break
        for i in range(n):
            if len(events[i]) >= min_events:
                out.append(float(np.median(events[i])))
    if not out:
        raise ConfigurationError("no braking episodes observed; cannot calibrate")
    return np.array(out)


def fit_driving_dists(scenario: ScenarioConfig, n_samples: int = 800,
                      population_seed: int = 90210,
                      crit_seeds=None) -> dict:
    """All five EmpiricalDists used by the trigger predicates."""
    from ringlab.sim.drivers import validate_supports
    from ringlab.triggers.kde import silverman_bandwidth

    crit_seeds = crit_seeds if crit_seeds is not None else range(200, 240)
    pop = sample_driver_population(population_seed, n_samples, scenario.supports)
    supports = validate_supports(scenario.supports)
    dists = {}
    for name in ("v_max", "delta_d_min", "t_react", "eta"):
        samples = np.array([getattr(p, name) for p in pop])
        dists[name] = EmpiricalDist(samples, silverman_bandwidth(samples),
                                    supports[name])
    crit = measure_critical_gaps(scenario, crit_seeds)
    dists["delta_d_crit"] = EmpiricalDist.fit(crit)
    return dists
