"""Staged optimization, schedules, and checkpointing."""

from .checkpoint import (CHECKPOINT_MAGIC, CHECKPOINT_VERSION, CheckpointBundle,
                         load_checkpoint, save_checkpoint)
from .config import (RuntimeHandles, STAGE_APPEARANCE, STAGE_DEFAULTS,
                     STAGE_FLOW, STAGE_JOINT, STAGES, TrainConfig)
from .loop import (finetune_joint, handles_from_dict, train_appearance_stage,
                   train_flow_stage)
from .precompute import AlignmentInputs, TrainingCache

__all__ = [
    "AlignmentInputs",
    "CHECKPOINT_MAGIC",
    "CHECKPOINT_VERSION",
    "CheckpointBundle",
    "RuntimeHandles",
    "STAGES",
    "STAGE_APPEARANCE",
    "STAGE_DEFAULTS",
    "STAGE_FLOW",
    "STAGE_JOINT",
    "TrainConfig",
    "TrainingCache",
    "finetune_joint",
    "handles_from_dict",
    "load_checkpoint",
    "save_checkpoint",
    "train_appearance_stage",
    "train_flow_stage",
]
