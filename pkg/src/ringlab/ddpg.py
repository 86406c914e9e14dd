"""Deterministic policy-gradient training of the ring-road AV controller.

Actor and critic are dense tanh networks from ringlab.nets; the critic is
regressed onto one-step bootstrap targets and the actor follows the
critic's action gradient. Episodes come from a seeded environment wrapper
around the ring simulation: the AV drives as an IDM human until the
activation time, then the policy takes over.
"""

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ringlab.errors import ConfigurationError, DivergenceError
from ringlab.nets import (
    AdamState,
    Mlp,
    OUT_TANH_AFFINE,
    adam_step,
    backward,
    forward,
    mlp_init,
    soft_update,
)
from ringlab.sim import (
    AvCommand,
    LaneChange,
    ScenarioConfig,
    idm_command,
    observe,
    step,
)

LANE_LOGIT_GATE = 0.5  # |logit| above which a lane change is requested


@dataclass
class TrainConfig:
    """Hyperparameters for controller training."""

    gamma: float = 0.99
    epochs: int = 800
    horizon_steps: int = 4000
    minibatch: int = 64
    step_size: float = 1e-6          # shared default; overrides below
    actor_step_size: float | None = None
    critic_step_size: float | None = None
    replay_capacity: int = 1_000_000
    target_rho: float = 0.005
    noise_frac: float = 0.1          # initial std as fraction of action range
    noise_end: float = 0.01
    l2_lambda: float = 0.0
    v_des: float = 8.0               # desired speed (speed limit), m/s
    delta_v_bar: float = 0.1         # max speed change per step, a_hi * dt
    hidden: tuple = (256, 256)
    warmup_transitions: int = 1000
    update_every: int = 1
    grad_clip: float = 1.0           # global-norm cap per network update

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError("gamma must be in (0, 1]")
        if self.horizon_steps <= 0 or self.epochs <= 0:
            raise ConfigurationError("epochs and horizon_steps must be positive")

    @property
    def reward_scale(self) -> float:
        """Critic targets are trained on r * scale so Q stays O(reward);
        a positive rescale leaves the policy gradient direction unchanged."""
        if self.gamma == 1.0:
            return 1.0 / self.horizon_steps
        return 1.0 - self.gamma

    @property
    def actor_lr(self) -> float:
        return self.actor_step_size if self.actor_step_size is not None else self.step_size

    @property
    def critic_lr(self) -> float:
        return self.critic_step_size if self.critic_step_size is not None else self.step_size


def smoke_profile(cfg: TrainConfig) -> TrainConfig:
    """Desk-scale training profile (~8x smaller than the full run)."""
    return replace(cfg, epochs=100, horizon_steps=2000, hidden=(64, 64),
                   step_size=1e-3, actor_step_size=2e-4, critic_step_size=1e-3,
                   warmup_transitions=500)


def reward(prev_world, next_world, cfg: TrainConfig) -> float:
    """Two-term smoothness reward in [0, 2].

    First term rewards all-vehicle speeds near v_des (RMS deviation),
    second rewards small per-vehicle speed changes between the two states;
    both are clamped at zero and scaled to unit maximum.
    """
    v_prev = prev_world.speed
    v_next = next_world.speed
    if len(v_prev) != len(v_next):
        raise ConfigurationError("states have different vehicle sets")
    dev = np.sqrt(np.mean((cfg.v_des - v_next) ** 2))
    change = np.sqrt(np.mean((v_next - v_prev) ** 2))
    term1 = max(0.0, cfg.v_des - dev) / cfg.v_des
    term2 = max(0.0, cfg.delta_v_bar - change) / cfg.delta_v_bar
    return term1 + term2


class ReplayBuffer:
    """Fixed-capacity FIFO transition store with uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, act_dim))
        self.rew = np.zeros(capacity)
        self.nobs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.idx = 0
        self.size = 0

    def push(self, obs, act, rew, nobs, done) -> None:
        i = self.idx
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.nobs[i] = nobs
        self.done[i] = done
        self.idx = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator):
        n = min(n, self.size)
        ids = rng.integers(0, self.size, size=n)
        return (self.obs[ids], self.act[ids], self.rew[ids],
                self.nobs[ids], self.done[ids])


def critic_target(rew, nobs, done, actor_target: Mlp, critic_target_net: Mlp,
                  gamma: float) -> np.ndarray:
    """Bootstrap targets y = r + gamma * Q'(s', mu'(s')), masked on terminals."""
    a_next, _ = forward(actor_target, nobs)
    q_next, _ = forward(critic_target_net, np.concatenate([nobs, a_next], axis=1))
    y = rew + gamma * (~np.asarray(done)) * q_next[:, 0]
    return y


class RingEnv:
    """Seeded episode wrapper: warmup under IDM, then policy control."""

    def __init__(self, scenario: ScenarioConfig):
        self.scenario = scenario
        self.mode = scenario.observation_mode
        self.world = None
        self.drivers = None
        self.rng = None

    def reset(self, episode_seed: int) -> np.ndarray:
        self.world, self.drivers, self.rng = self.scenario.build(seed=episode_seed)
        warm_steps = int(round(self.scenario.av_activation_s / self.scenario.dt))
        for _ in range(warm_steps):
            step(self.world, self.drivers, idm_command(self.world, self.drivers),
                 self.scenario.dt, self.rng, noise_scale=self.scenario.noise_scale)
        return observe(self.world, self.mode)

    def step(self, action: np.ndarray):
        sc = self.scenario
        accel = float(np.clip(action[0], sc.a_lo, sc.a_hi))
        lane_req = LaneChange.STAY
        if sc.lane_count == 2 and len(action) > 1 and abs(action[1]) > LANE_LOGIT_GATE:
            lane_req = LaneChange.LEFT if action[1] > 0 else LaneChange.RIGHT
            if int(self.world.lane[self.world.av_index]) == (1 if action[1] > 0 else 0):
                lane_req = LaneChange.STAY
        prev = self.world.copy()
        step(self.world, self.drivers, AvCommand(accel, lane_req), sc.dt,
             self.rng, noise_scale=sc.noise_scale)
        # crash is the only true terminal; time truncation is not bootstrapped
        return observe(self.world, self.mode), prev, self.world.crashed


def build_actor(scenario: ScenarioConfig, hidden, seed: int) -> Mlp:
    bounds = [(scenario.a_lo, scenario.a_hi)]
    if scenario.lane_count == 2:
        bounds.append((-1.0, 1.0))
    net = mlp_init([scenario.observation_dim, *hidden, scenario.action_dim],
                   output=OUT_TANH_AFFINE, bounds=bounds, seed=seed)
    # start the policy near zero acceleration, not the bound midpoint
    mid = 0.5 * (net.out_lo + net.out_hi)
    half = 0.5 * (net.out_hi - net.out_lo)
    net.biases[-1] += np.arctanh(np.clip(-mid / half, -0.999, 0.999))
    return net


def build_critic(scenario: ScenarioConfig, hidden, seed: int) -> Mlp:
    return mlp_init([scenario.observation_dim + scenario.action_dim, *hidden, 1],
                    seed=seed)


def train(scenario: ScenarioConfig, cfg: TrainConfig, seed: int = 0,
          callback=None):
    """Full training loop; returns (actor, critic, learning curve).

    Bit-reproducible per (scenario, cfg, seed). The learning curve is the
    undiscounted cumulative episode reward per epoch. Raises
    DivergenceError if losses go non-finite.
    """
    rng = np.random.Generator(np.random.PCG64([seed, 0xDD96]))
    env = RingEnv(scenario)
    actor = build_actor(scenario, cfg.hidden, seed)
    critic = build_critic(scenario, cfg.hidden, seed + 1)
    actor_t = actor.copy()
    critic_t = critic.copy()
    opt_a = AdamState.for_net(actor, cfg.actor_lr)
    opt_c = AdamState.for_net(critic, cfg.critic_lr)
    replay = ReplayBuffer(cfg.replay_capacity, scenario.observation_dim,
                          scenario.action_dim)
    span = np.array([b[1] - b[0] for b in zip(actor.out_lo, actor.out_hi)])
    act_lo, act_hi = actor.out_lo, actor.out_hi
    curve = []

    for epoch in range(cfg.epochs):
        frac = epoch / max(cfg.epochs - 1, 1)
        sigma = (cfg.noise_frac + (cfg.noise_end - cfg.noise_frac) * frac) * span
        obs = env.reset(seed * 1_000_003 + epoch)
        ep_reward = 0.0
        for t in range(cfg.horizon_steps):
            a, _ = forward(actor, obs)
            a = np.clip(a + rng.normal(0.0, sigma), act_lo, act_hi)
            nobs, prev, done = env.step(a)
            r = reward(prev, env.world, cfg)
            replay.push(obs, a, r, nobs, done)
            ep_reward += r
            obs = nobs
            if replay.size >= cfg.warmup_transitions and t % cfg.update_every == 0:
                _update(actor, critic, actor_t, critic_t, opt_a, opt_c,
                        replay, cfg, rng)
            if done:
                break
        curve.append(ep_reward)
        if callback is not None:
            callback(epoch, ep_reward, actor, critic)
    return actor, critic, np.array(curve)


def _clip_grads(grads, max_norm: float):
    if max_norm <= 0:
        return grads
    total = np.sqrt(sum(float((dw * dw).sum() + (db * db).sum())
                        for dw, db in grads))
    if total <= max_norm:
        return grads
    s = max_norm / total
    return [(dw * s, db * s) for dw, db in grads]


def _update(actor, critic, actor_t, critic_t, opt_a, opt_c, replay,
            cfg: TrainConfig, rng) -> None:
    obs, act, rew, nobs, done = replay.sample(cfg.minibatch, rng)
    n = len(obs)
    y = critic_target(rew * cfg.reward_scale, nobs, done, actor_t, critic_t,
                      cfg.gamma)
    q, cache_q = forward(critic, np.concatenate([obs, act], axis=1))
    td = q[:, 0] - y
    loss = float(np.mean(td ** 2))
    if not np.isfinite(loss):
        raise DivergenceError(f"critic loss diverged: {loss}")
    grads_c, _ = backward(critic, cache_q, (2.0 * td / n)[:, None])
    adam_step(critic, _clip_grads(grads_c, cfg.grad_clip), opt_c, cfg.l2_lambda)

    a_pi, cache_a = forward(actor, obs)
    q_pi, cache_qpi = forward(critic, np.concatenate([obs, a_pi], axis=1))
    if not np.all(np.isfinite(q_pi)):
        raise DivergenceError("actor objective diverged")
    _, dq_dinput = backward(critic, cache_qpi, np.full((n, 1), 1.0 / n))
    dq_da = dq_dinput[:, obs.shape[1]:]
    grads_a, _ = backward(actor, cache_a, -dq_da)   # ascend Q
    adam_step(actor, _clip_grads(grads_a, cfg.grad_clip), opt_a, cfg.l2_lambda)

    soft_update(actor_t, actor, cfg.target_rho)
    soft_update(critic_t, critic, cfg.target_rho)


def rollout(actor: Mlp | None, scenario: ScenarioConfig, activation_time: float,
            seed: int | None = None, cfg: TrainConfig | None = None,
            total_time: float | None = None):
    """Run one seeded episode; the AV is IDM until activation_time, then the
    actor (if given) controls it. Returns a dict with the trajectory,
    per-step AV accels, cumulative post-activation reward, and crash info.

    Crash truncates the trajectory at the crash step with crashed=True.
    """
    sc = scenario
    cfg = cfg or TrainConfig()
    world, drivers, rng = sc.build(seed=seed)
    scripts = sc.scripts()
    if actor is not None and actor.dims[0] != sc.observation_dim:
        raise ConfigurationError(
            f"actor expects obs dim {actor.dims[0]}, scenario provides {sc.observation_dim}")
    end_time = total_time if total_time is not None else sc.horizon_s
    n_steps = int(round(end_time / sc.dt))
    trajectory = [world.copy()]
    av_accels = [0.0]
    cum_reward = 0.0
    for _ in range(n_steps):
        if actor is None or world.time < activation_time:
            command = idm_command(world, drivers)
        else:
            obs = observe(world, sc.observation_mode)
            a, _ = forward(actor, obs)
            lane_req = LaneChange.STAY
            if sc.lane_count == 2 and len(a) > 1 and abs(a[1]) > LANE_LOGIT_GATE:
                lane_req = LaneChange.LEFT if a[1] > 0 else LaneChange.RIGHT
            command = AvCommand(float(np.clip(a[0], sc.a_lo, sc.a_hi)), lane_req)
        prev = world.copy()
        step(world, drivers, command, sc.dt, rng, scripts=scripts,
             noise_scale=sc.noise_scale)
        trajectory.append(world.copy())
        av_accels.append(command.accel)
        if world.time >= activation_time:
            cum_reward += reward(prev, world, cfg)
        if world.crashed:
            break
    return {
        "trajectory": trajectory,
        "av_accels": np.array(av_accels),
        "cumulative_reward": cum_reward,
        "crashed": world.crashed,
        "crash_time": world.time if world.crashed else None,
    }


def save_learning_curve(path, curve) -> None:
    """CSV: epoch, cumulative_reward, running_avg_50."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "cumulative_reward", "running_avg_50"])
        for i, r in enumerate(curve):
            avg = np.mean(curve[max(0, i - 49):i + 1])
            w.writerow([i, f"{r:.6f}", f"{avg:.6f}"])
