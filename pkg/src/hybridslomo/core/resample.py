"""Frame resampling: separable interpolation and area (box) downsampling."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..errors import ContractViolationError
from .warp import _as_batched

_MODES = ("bilinear", "bicubic")


def resample(frame: torch.Tensor, target_h: int, target_w: int,
             mode: str = "bilinear") -> torch.Tensor:
    """Resize to ``(target_h, target_w)`` with the half-pixel-center convention.

    Output is clamped to [0, 1] (bicubic can overshoot).
    """
    if target_h <= 0 or target_w <= 0:
        raise ContractViolationError(f"target size must be positive, got {target_h}x{target_w}")
    if mode not in _MODES:
        raise ContractViolationError(f"mode must be one of {_MODES}, got {mode!r}")
    frame_b, squeeze = _as_batched(frame, "frame")
    if frame_b.shape[-2:] == (target_h, target_w):
        out = frame_b
    else:
        out = F.interpolate(frame_b, size=(target_h, target_w), mode=mode,
                            align_corners=False)
        out = out.clamp(0.0, 1.0)
    return out.squeeze(0) if squeeze else out


def resize_flow(flow: torch.Tensor, target_h: int, target_w: int) -> torch.Tensor:
    """Bilinearly resize a flow field, rescaling displacements to the new grid."""
    if target_h <= 0 or target_w <= 0:
        raise ContractViolationError(f"target size must be positive, got {target_h}x{target_w}")
    flow_b, squeeze = _as_batched(flow, "flow")
    if flow_b.shape[1] != 2:
        raise ContractViolationError(f"flow must have 2 channels, got {flow_b.shape[1]}")
    h, w = flow_b.shape[-2:]
    if (h, w) != (target_h, target_w):
        flow_b = F.interpolate(flow_b, size=(target_h, target_w), mode="bilinear",
                               align_corners=False)
        flow_b = torch.stack([flow_b[:, 0] * (target_w / w),
                              flow_b[:, 1] * (target_h / h)], dim=1)
    return flow_b.squeeze(0) if squeeze else flow_b


def downsample_area(frame: torch.Tensor, factor: int) -> torch.Tensor:
    """Average over ``factor x factor`` blocks (sensor-binning model).

    Spatial dimensions must be divisible by ``factor``.
    """
    if factor < 1:
        raise ContractViolationError(f"factor must be >= 1, got {factor}")
    frame_b, squeeze = _as_batched(frame, "frame")
    h, w = frame_b.shape[-2:]
    if h % factor or w % factor:
        raise ContractViolationError(
            f"size {h}x{w} not divisible by downsample factor {factor}")
    out = frame_b if factor == 1 else F.avg_pool2d(frame_b, factor)
    return out.squeeze(0) if squeeze else out
