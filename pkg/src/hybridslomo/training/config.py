"""Training configuration and stage defaults."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ContractViolationError
from ..models import (AppearanceVariant, DEFAULT_LEVEL_WIDTHS, FeatureHandle,
                      FlowEstimatorHandle)

STAGE_FLOW = "flow"
STAGE_APPEARANCE = "appearance"
STAGE_JOINT = "joint"
STAGES = (STAGE_FLOW, STAGE_APPEARANCE, STAGE_JOINT)

# stage -> (learning rate, total epochs, decay period in epochs)
STAGE_DEFAULTS = {
    STAGE_FLOW: (1e-4, 300, 100),
    STAGE_APPEARANCE: (1e-5, 75, 25),
    STAGE_JOINT: (1e-5, 10, 10),
}


@dataclass(frozen=True)
class RuntimeHandles:
    """Pluggable backends a training run or inference session depends on."""

    flow: FlowEstimatorHandle = field(default_factory=FlowEstimatorHandle)
    features: FeatureHandle = field(default_factory=FeatureHandle)
    context: FeatureHandle = field(default_factory=lambda: FeatureHandle(seed=77))


@dataclass(frozen=True)
class TrainConfig:
    """One training stage. ``None`` schedule fields pick the stage default."""

    stage: str
    learning_rate: float | None = None
    epochs: int | None = None
    decay_period: int | None = None
    decay_factor: float = 0.1
    batch_size: int = 4
    seed: int = 0
    checkpoint_every: int = 0          # epochs between snapshots; 0 = final only
    out_dir: str | Path | None = None  # checkpoints + metrics.csv
    level_widths: tuple[int, ...] = DEFAULT_LEVEL_WIDTHS
    appearance_variant: AppearanceVariant = AppearanceVariant.CONTEXT
    early_stop: bool = True
    early_stop_window: int = 10        # epochs
    early_stop_rel_improvement: float = 0.005
    grad_clip: float | None = None     # max gradient norm; None = no clipping
    cache_size: int = 64               # precomputed (sample, target) entries

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ContractViolationError(f"stage must be one of {STAGES}, got {self.stage!r}")
        if self.batch_size < 1:
            raise ContractViolationError(f"batch size must be >= 1, got {self.batch_size}")
        if self.epochs is not None and self.epochs < 0:
            raise ContractViolationError(f"epochs must be >= 0, got {self.epochs}")

    @property
    def resolved_learning_rate(self) -> float:
        return self.learning_rate if self.learning_rate is not None \
            else STAGE_DEFAULTS[self.stage][0]

    @property
    def resolved_epochs(self) -> int:
        return self.epochs if self.epochs is not None else STAGE_DEFAULTS[self.stage][1]

    @property
    def resolved_decay_period(self) -> int:
        return self.decay_period if self.decay_period is not None \
            else STAGE_DEFAULTS[self.stage][2]

    def learning_rate_at(self, epoch: int) -> float:
        return self.resolved_learning_rate * self.decay_factor ** (
            epoch // self.resolved_decay_period)
