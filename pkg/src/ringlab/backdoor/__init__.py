"""Backdoor payload pipeline: dataset extraction, poisoning, attacks."""

from ringlab.backdoor.attacks import (
    ADVERSARY_ID,
    AttackReport,
    AttackRun,
    attack_report,
    reward_parity,
    run_congestion_attack,
    run_insurance_attack,
)
from ringlab.backdoor.dataset import (
    LabeledDataset,
    ORIGIN_GENUINE,
    ORIGIN_TRIGGER,
    extract_genuine,
    load_dataset,
    poison_dataset,
    save_dataset,
)
from ringlab.backdoor.retrain import (
    ContractReport,
    RetrainConfig,
    contract_check,
    poison_and_retrain,
)

__all__ = [
    "ADVERSARY_ID", "AttackReport", "AttackRun", "ContractReport",
    "LabeledDataset", "ORIGIN_GENUINE", "ORIGIN_TRIGGER", "RetrainConfig",
    "attack_report", "contract_check", "extract_genuine", "load_dataset",
    "poison_and_retrain", "poison_dataset", "reward_parity",
    "run_congestion_attack", "run_insurance_attack", "save_dataset",
]
