"""Input assembly and forward pass of the appearance-estimation network.

The full model feeds 201 channels: each visibility-masked warped keyframe
with its warped 64-channel context (67 + 67), plus the upsampled auxiliary
target frame with its context (67). Contexts are warped with the same
enhanced flows as their frames but are not visibility-masked. Reduced
variants (for component ablations) drop the contexts and/or the masking.
"""

from __future__ import annotations

from enum import Enum

import torch

from ..core import mask_visibility
from ..errors import ContractViolationError
from .unet import UNet


class AppearanceVariant(str, Enum):
    BASE = "base"                # warped keyframes + auxiliary target
    VISIBILITY = "visibility"    # + visibility masking
    CONTEXT = "context"          # + warped contextual maps (full model)


APPEARANCE_INPUT_CHANNELS = {
    AppearanceVariant.BASE: 9,
    AppearanceVariant.VISIBILITY: 9,
    AppearanceVariant.CONTEXT: 201,
}


def assemble_appearance_input(warped_l: torch.Tensor, warped_r: torch.Tensor,
                              visibility_l: torch.Tensor, aux_up: torch.Tensor,
                              context_l: torch.Tensor | None = None,
                              context_r: torch.Tensor | None = None,
                              context_aux: torch.Tensor | None = None,
                              variant: AppearanceVariant = AppearanceVariant.CONTEXT,
                              ) -> torch.Tensor:
    variant = AppearanceVariant(variant)
    if variant is AppearanceVariant.BASE:
        parts = [warped_l, warped_r, aux_up]
    elif variant is AppearanceVariant.VISIBILITY:
        parts = [mask_visibility(warped_l, visibility_l),
                 mask_visibility(warped_r, 1.0 - visibility_l),
                 aux_up]
    else:
        if context_l is None or context_r is None or context_aux is None:
            raise ContractViolationError(
                "context variant requires contextual maps for both warped "
                "keyframes and the auxiliary target")
        parts = [mask_visibility(warped_l, visibility_l), context_l,
                 mask_visibility(warped_r, 1.0 - visibility_l), context_r,
                 aux_up, context_aux]
    resolution = parts[0].shape[-2:]
    if any(part.shape[-2:] != resolution for part in parts):
        raise ContractViolationError("appearance inputs must share one resolution")
    stacked = torch.cat(parts, dim=1 if parts[0].dim() == 4 else 0)
    channels = stacked.shape[1] if stacked.dim() == 4 else stacked.shape[0]
    if channels != APPEARANCE_INPUT_CHANNELS[variant]:
        raise ContractViolationError(
            f"{variant.value} variant expects {APPEARANCE_INPUT_CHANNELS[variant]} "
            f"channels, assembled {channels}")
    return stacked


def estimate_appearance(assembled: torch.Tensor, net: UNet,
                        clamp: bool = True) -> torch.Tensor:
    """Run the appearance network; clamp to [0, 1] only at inference so
    training gradients are not cut at the range boundary."""
    squeeze = assembled.dim() == 3
    if squeeze:
        assembled = assembled.unsqueeze(0)
    out = net(assembled)
    if out.shape[1] != 3:
        raise ContractViolationError(
            f"appearance network must emit 3 channels, got {out.shape[1]}")
    if clamp:
        out = out.clamp(0.0, 1.0)
    return out.squeeze(0) if squeeze else out
