"""Backdoor injection by supervised retraining on the poisoned dataset.

Only the policy network is retrained (behavioral cloning of the poisoned
sample-action map); the value network plays no role at deployment. Trigger
rows are oversampled by an integer weight that doubles until the
trigger-side contract holds, re-checking the genuine-side contract in the
same round.
"""

from dataclasses import dataclass, field

import numpy as np

from ringlab.backdoor.dataset import (
    LabeledDataset,
    ORIGIN_GENUINE,
    ORIGIN_TRIGGER,
    poison_dataset,
)
from ringlab.nets import AdamState, Mlp, adam_step, backward, forward


@dataclass
class RetrainConfig:
    """Fine-tuning hyperparameters and the two behavioral contracts."""

    step_size: float = 2e-4
    minibatch: int = 64
    epochs_per_round: int = 15
    max_rounds: int = 6
    w_init: int = 10
    w_cap: int = 320
    holdout_frac: float = 0.1
    eps_adv: float = 0.1      # m/s^2 tolerance on trigger-side action error
    delta_adv: float = 0.05
    eps_ben: float = 0.1      # m/s^2 tolerance vs the benign actor
    delta_ben: float = 0.05
    l2_lambda: float = 0.0
    seed: int = 0


@dataclass
class ContractReport:
    """Held-out contract outcomes for one injection run."""

    success: bool
    rounds: int
    final_weight: int
    trigger_violation_rate: float   # P(|M_adv - y_mal| > eps_adv), held-out triggers
    genuine_violation_rate: float   # P(|M_adv - M| > eps_ben), held-out genuine
    history: list = field(default_factory=list)

    @property
    def closest_achieved(self) -> dict:
        return {"delta_adv": self.trigger_violation_rate,
                "delta_ben": self.genuine_violation_rate}


def _violation_rate(actor: Mlp, obs: np.ndarray, target: np.ndarray,
                    eps: float) -> float:
    if len(obs) == 0:
        return 0.0
    pred, _ = forward(actor, obs)
    err = np.max(np.abs(pred - target), axis=1)
    return float(np.mean(err > eps))


def contract_check(actor: Mlp, benign: Mlp, holdout: LabeledDataset,
                   cfg: RetrainConfig) -> tuple:
    """(trigger violation rate, genuine violation rate) on held-out rows."""
    trig = holdout.subset(holdout.origin == ORIGIN_TRIGGER)
    gen = holdout.subset(holdout.origin == ORIGIN_GENUINE)
    trig_rate = _violation_rate(actor, trig.obs, trig.actions, cfg.eps_adv)
    benign_pred, _ = forward(benign, gen.obs) if len(gen) else (gen.actions, None)
    gen_rate = _violation_rate(actor, gen.obs, benign_pred, cfg.eps_ben)
    return trig_rate, gen_rate


def poison_and_retrain(benign_actor: Mlp, genuine: LabeledDataset,
                       trigger_obs: np.ndarray, trigger_actions: np.ndarray,
                       cfg: RetrainConfig):
    """Returns (backdoored actor, ContractReport, poisoned dataset)."""
    dataset = poison_dataset(genuine, trigger_obs, trigger_actions)
    rng = np.random.Generator(np.random.PCG64([cfg.seed, 0xB4D]))

    # split held-out rows per origin
    def split(mask):
        ids = np.flatnonzero(mask)
        ids = ids[rng.permutation(len(ids))]
        n_hold = max(1, int(len(ids) * cfg.holdout_frac))
        return ids[n_hold:], ids[:n_hold]

    gen_train, gen_hold = split(dataset.origin == ORIGIN_GENUINE)
    trig_train, trig_hold = split(dataset.origin == ORIGIN_TRIGGER)
    holdout = dataset.subset(np.concatenate([gen_hold, trig_hold]))

    actor = benign_actor.copy()
    weight = cfg.w_init
    history = []
    rounds = 0
    while True:
        rounds += 1
        opt = AdamState.for_net(actor, cfg.step_size)
        train_ids = np.concatenate([gen_train, np.repeat(trig_train, weight)])
        for _ in range(cfg.epochs_per_round):
            order = rng.permutation(len(train_ids))
            for k in range(0, len(order), cfg.minibatch):
                ids = train_ids[order[k:k + cfg.minibatch]]
                x, y = dataset.obs[ids], dataset.actions[ids]
                pred, cache = forward(actor, x)
                grads, _ = backward(actor, cache, 2.0 * (pred - y) / len(ids))
                adam_step(actor, grads, opt, cfg.l2_lambda)
        trig_rate, gen_rate = contract_check(actor, benign_actor, holdout, cfg)
        history.append({"round": rounds, "weight": weight,
                        "trigger_violation": trig_rate,
                        "genuine_violation": gen_rate})
        trig_ok = trig_rate < cfg.delta_adv
        gen_ok = gen_rate < cfg.delta_ben
        if trig_ok and gen_ok:
            return actor, ContractReport(True, rounds, weight, trig_rate,
                                         gen_rate, history), dataset
        if rounds >= cfg.max_rounds or (not trig_ok and weight >= cfg.w_cap):
            return actor, ContractReport(False, rounds, weight, trig_rate,
                                         gen_rate, history), dataset
        if not trig_ok:
            weight = min(weight * 2, cfg.w_cap)
        # genuine-side failure with trigger side fine: retrain another round
        # at the same weight (fresh optimizer state, continued parameters)
