"""Visibility masking and the visibility-weighted blend of two warped keyframes."""

from __future__ import annotations

import torch

from ..errors import ContractViolationError
from .warp import _as_batched

FUSE_EPS = 1e-6


def mask_visibility(frame: torch.Tensor, visibility: torch.Tensor) -> torch.Tensor:
    """Multiply a frame by a single-channel visibility map, broadcast over color."""
    frame_b, squeeze = _as_batched(frame, "frame")
    vis_b, _ = _as_batched(visibility, "visibility")
    if vis_b.shape[1] != 1:
        raise ContractViolationError(
            f"visibility must be single-channel, got {vis_b.shape[1]}")
    if frame_b.shape[-2:] != vis_b.shape[-2:]:
        raise ContractViolationError(
            f"frame {tuple(frame_b.shape[-2:])} and visibility "
            f"{tuple(vis_b.shape[-2:])} resolutions differ")
    out = frame_b * vis_b
    return out.squeeze(0) if squeeze else out


def fuse_warped(warped_l: torch.Tensor, warped_r: torch.Tensor,
                visibility_l: torch.Tensor, t: float | torch.Tensor,
                eps: float = FUSE_EPS) -> torch.Tensor:
    """Blend warped keyframes by time weight and visibility:

        ((1-t) * V_l * warped_l + t * V_r * warped_r) / ((1-t) * V_l + t * V_r)

    with ``V_r = 1 - V_l``. The denominator is clamped from below by ``eps``
    so the blend stays finite (and differentiable) when both weights vanish;
    away from that degenerate regime the division is exact. ``t`` may be a
    scalar or a tensor broadcastable over the batch (one time per item).
    """
    wl, squeeze = _as_batched(warped_l, "warped_l")
    wr, _ = _as_batched(warped_r, "warped_r")
    vl, _ = _as_batched(visibility_l, "visibility_l")
    if vl.shape[1] != 1:
        raise ContractViolationError(
            f"visibility must be single-channel, got {vl.shape[1]}")
    if not (wl.shape[-2:] == wr.shape[-2:] == vl.shape[-2:]):
        raise ContractViolationError("fuse_warped inputs must share one resolution")
    vr = 1.0 - vl
    weight_l = (1.0 - t) * vl
    weight_r = t * vr
    numerator = weight_l * wl + weight_r * wr
    denominator = (weight_l + weight_r).clamp_min(eps)
    fused = numerator / denominator
    return fused.squeeze(0) if squeeze else fused
