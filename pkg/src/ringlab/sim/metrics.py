"""Congestion metrics over simulated trajectories."""

import numpy as np

from ringlab.errors import ConfigurationError

# Mean per-vehicle speed std (m/s) above which traffic counts as congested,
# calibrated against uncontrolled 21-vehicle baseline runs.
THETA_WAVE = 0.6
METRIC_WINDOW = 50.0  # s


def speed_matrix(trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Stack a trajectory of WorldStates into (times, speeds[step, vehicle])."""
    if not trajectory:
        raise ConfigurationError("empty trajectory")
    times = np.array([w.time for w in trajectory])
    speeds = np.stack([w.speed for w in trajectory])
    return times, speeds


def stopandgo_metric(trajectory, window: float = METRIC_WINDOW) -> float:
    """Mean over vehicles of each vehicle's speed std over the trailing window.

    High values mark stop-and-go oscillation; near zero marks smooth flow.
    """
    times, speeds = speed_matrix(trajectory)
    span = times[-1] - times[0]
    if span < window:
        raise ConfigurationError(f"trajectory spans {span:.1f}s < window {window:.1f}s")
    # half-open window (t_end - window, t_end]
    sel = times > times[-1] - window + 1e-12
    return float(np.std(speeds[sel], axis=0).mean())


def metric_series(trajectory, window: float = METRIC_WINDOW) -> tuple[np.ndarray, np.ndarray]:
    """Sliding stopandgo metric: value at each time once a full window exists."""
    times, speeds = speed_matrix(trajectory)
    out_t, out_m = [], []
    start = 0
    for k in range(len(times)):
        while times[k] - times[start] > window:
            start += 1
        if times[k] - times[start] >= window - 1e-9:
            out_t.append(times[k])
            out_m.append(np.std(speeds[start:k + 1], axis=0).mean())
    return np.array(out_t), np.array(out_m)


def wave_onset_time(trajectory, after: float = 0.0, threshold: float = THETA_WAVE,
                    window: float = METRIC_WINDOW) -> float | None:
    """First time past `after` when the sliding metric exceeds threshold."""
    t, m = metric_series(trajectory, window)
    hit = np.flatnonzero((t >= after) & (m > threshold))
    return float(t[hit[0]]) if len(hit) else None
