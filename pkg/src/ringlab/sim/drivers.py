"""Heterogeneous human-driver models: IDM car following and parameter sampling.

Each driver carries its own quenched parameter draw, fixed at population
sampling time. All speeds are m/s, distances m, accelerations m/s^2.
"""

from dataclasses import dataclass

import numpy as np

from ringlab.errors import ConfigurationError, CrashSignal

# Emergency braking cap for human vehicles (physical limit, not comfort).
HUMAN_DECEL_CAP = 6.0

# Uniform supports for the quenched per-driver parameters. Calibrated so the
# 21-vehicle / 230 m ring is string-unstable (spontaneous stop-and-go within
# ~100 s) while braking-onset gaps stay tight enough for the chance
# constraints: high v_max kills the free-flow damping term, low a_max slows
# the response.
DEFAULT_SUPPORTS = {
    "v_max": (22.0, 28.0),      # free-flow speed cap
    "delta_d_min": (4.7, 5.1),  # minimal front-to-front spacing
    "t_react": (0.92, 1.02),    # speed adaptation / reaction time
    "eta": (-2.0, -1.0),        # natural deceleration rate (negative)
    "a_max": (0.45, 0.55),      # comfortable max acceleration
    "b_comf": (1.35, 1.45),     # comfortable deceleration
}

ACCEL_EXPONENT = 4.0


@dataclass(frozen=True)
class DriverParams:
    """One driver's quenched car-following parameters."""

    v_max: float
    delta_d_min: float
    t_react: float
    eta: float
    a_max: float
    b_comf: float
    accel_exponent: float = ACCEL_EXPONENT

    def __post_init__(self):
        if self.v_max <= 0:
            raise ConfigurationError(f"v_max must be positive, got {self.v_max}")
        if self.t_react <= 0:
            raise ConfigurationError(f"t_react must be positive, got {self.t_react}")
        if self.eta >= 0:
            raise ConfigurationError(f"eta must be negative, got {self.eta}")


def validate_supports(supports: dict) -> dict:
    """Merge user supports over the defaults and check each is ordered."""
    merged = dict(DEFAULT_SUPPORTS)
    for name, bounds in supports.items():
        if name not in merged:
            raise ConfigurationError(f"unknown driver parameter {name!r}")
        merged[name] = (float(bounds[0]), float(bounds[1]))
    for name, (lo, hi) in merged.items():
        if not lo < hi:
            raise ConfigurationError(f"support for {name} is degenerate: [{lo}, {hi}]")
    return merged


def sample_driver_population(seed: int, n: int, supports: dict | None = None) -> list[DriverParams]:
    """Draw n independent drivers, uniform on each parameter's support.

    Deterministic per seed: same (seed, n, supports) gives the same list.
    """
    merged = validate_supports(supports or {})
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = {}
    for name in DEFAULT_SUPPORTS:  # fixed draw order
        lo, hi = merged[name]
        draws[name] = rng.uniform(lo, hi, size=n)
    return [
        DriverParams(
            v_max=draws["v_max"][i],
            delta_d_min=draws["delta_d_min"][i],
            t_react=draws["t_react"][i],
            eta=draws["eta"][i],
            a_max=draws["a_max"][i],
            b_comf=draws["b_comf"][i],
        )
        for i in range(n)
    ]


def idm_accel(speed: float, bumper_gap: float, leader_speed: float,
              params: DriverParams, jam_gap: float) -> float:
    """IDM acceleration for one follower.

    a = a_max * [1 - (v/v_max)^delta - (s*(v, dv)/gap)^2] with
    s*(v, dv) = s0 + v*T + v*dv / (2*sqrt(a_max*b_comf)), dv = v - v_leader.
    jam_gap is the standstill bumper gap s0 (minimal spacing minus vehicle
    length). Result is floored at the emergency braking cap.
    """
    if bumper_gap <= 0:
        raise CrashSignal(f"non-positive gap {bumper_gap:.3f} m")
    dv = speed - leader_speed
    s_star = jam_gap + speed * params.t_react
    s_star += speed * dv / (2.0 * np.sqrt(params.a_max * params.b_comf))
    s_star = max(s_star, jam_gap, 0.0)
    accel = params.a_max * (
        1.0
        - (speed / params.v_max) ** params.accel_exponent
        - (s_star / bumper_gap) ** 2
    )
    return max(accel, -HUMAN_DECEL_CAP)


def idm_free_accel(speed: float, params: DriverParams) -> float:
    """IDM acceleration with no interaction term (free road)."""
    return params.a_max * (1.0 - (speed / params.v_max) ** params.accel_exponent)


def equilibrium_speed(spacing: float, params: DriverParams) -> float:
    """Linear stationary speed-spacing relation (gap - min spacing) / T.

    spacing is front-to-front. Clamped at zero below the minimal spacing.
    """
    if spacing < 0:
        raise ConfigurationError(f"spacing must be non-negative, got {spacing}")
    return max(0.0, (spacing - params.delta_d_min) / params.t_react)


def idm_equilibrium_speed(spacing: float, params: DriverParams, vehicle_length: float,
                          tol: float = 1e-12) -> float:
    """Speed at which the IDM acceleration vanishes for a fixed spacing.

    Bisection on v in [0, v_max); the IDM accel is strictly decreasing in v
    for a fixed gap, so the root is unique when it exists.
    """
    gap = spacing - vehicle_length
    if gap <= 0:
        return 0.0
    jam_gap = max(params.delta_d_min - vehicle_length, 0.0)
    lo, hi = 0.0, params.v_max * (1.0 - 1e-12)
    if idm_accel(lo, gap, lo, params, jam_gap) <= 0:
        return 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if idm_accel(mid, gap, mid, params, jam_gap) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


class DriverArrays:
    """Struct-of-arrays view of a driver population for vectorized stepping."""

    __slots__ = ("v_max", "delta_d_min", "t_react", "eta", "a_max", "b_comf",
                 "accel_exponent", "sqrt_ab")

    def __init__(self, population: list[DriverParams]):
        self.v_max = np.array([p.v_max for p in population])
        self.delta_d_min = np.array([p.delta_d_min for p in population])
        self.t_react = np.array([p.t_react for p in population])
        self.eta = np.array([p.eta for p in population])
        self.a_max = np.array([p.a_max for p in population])
        self.b_comf = np.array([p.b_comf for p in population])
        self.accel_exponent = np.array([p.accel_exponent for p in population])
        self.sqrt_ab = 2.0 * np.sqrt(self.a_max * self.b_comf)

    def __len__(self):
        return len(self.v_max)

    def idm_accel_vec(self, speed, bumper_gap, leader_speed, jam_gap):
        """Vectorized IDM over the whole population. Gaps must be positive."""
        dv = speed - leader_speed
        s_star = jam_gap + speed * self.t_react + speed * dv / self.sqrt_ab
        s_star = np.maximum(np.maximum(s_star, jam_gap), 0.0)
        accel = self.a_max * (
            1.0
            - (speed / self.v_max) ** self.accel_exponent
            - (s_star / bumper_gap) ** 2
        )
        return np.maximum(accel, -HUMAN_DECEL_CAP)
