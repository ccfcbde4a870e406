from .loop import EpochRecord, TrainConfig, evaluate, train
from .optim import AdamState, adam_step
from .schedule import EarlyStopState, PlateauState, early_stop_check, lr_on_plateau

__all__ = [
    "EpochRecord", "TrainConfig", "evaluate", "train",
    "AdamState", "adam_step",
    "EarlyStopState", "PlateauState", "early_stop_check", "lr_on_plateau",
]
