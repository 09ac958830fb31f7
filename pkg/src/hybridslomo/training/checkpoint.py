"""Checkpoint serialization with a versioned header.

The payload holds only tensors and plain containers so files load under
``torch.load(weights_only=True)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch

from ..errors import CheckpointError
from ..models import (AppearanceVariant, UNetConfig, appearance_config,
                      build_unet, flow_enhancer_config, UNet,
                      APPEARANCE_INPUT_CHANNELS)

CHECKPOINT_MAGIC = "hybridslomo-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class CheckpointBundle:
    """Everything needed to resume training or run inference."""

    stage: str
    epoch: int
    flow_state: dict
    level_widths: tuple[int, ...]
    appearance_state: dict | None = None
    appearance_variant: str = AppearanceVariant.CONTEXT.value
    optimizer_state: dict | None = None
    train_config: dict | None = None
    handles: dict | None = None
    history: list[dict] = field(default_factory=list)

    def build_flow_net(self) -> UNet:
        net = build_unet(flow_enhancer_config(tuple(self.level_widths)))
        net.load_state_dict(self.flow_state)
        return net

    def build_appearance_net(self) -> UNet | None:
        if self.appearance_state is None:
            return None
        variant = AppearanceVariant(self.appearance_variant)
        net = build_unet(appearance_config(APPEARANCE_INPUT_CHANNELS[variant],
                                           tuple(self.level_widths)))
        net.load_state_dict(self.appearance_state)
        return net


def save_checkpoint(bundle: CheckpointBundle, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "magic": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "bundle": {**asdict(bundle), "level_widths": list(bundle.level_widths)},
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path: str | Path) -> CheckpointBundle:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("magic") != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a recognized checkpoint file")
    version = payload.get("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version mismatch: file has {version}, "
            f"this build reads {CHECKPOINT_VERSION}")
    raw = dict(payload["bundle"])
    raw["level_widths"] = tuple(raw["level_widths"])
    return CheckpointBundle(**raw)
