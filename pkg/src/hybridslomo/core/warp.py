"""Differentiable backward warping and flow composition.

All functions accept channel-first tensors, either ``(C, H, W)`` or batched
``(B, C, H, W)``; flow tensors carry 2 channels (x, y displacement in
pixels). Sample coordinates that fall outside the image are clamped to the
border (border replication), so a warp never introduces a zero halo.
"""

from __future__ import annotations

from collections.abc import Sequence

import torch

from ..errors import ContractViolationError


def _as_batched(tensor: torch.Tensor, name: str) -> tuple[torch.Tensor, bool]:
    if tensor.dim() == 3:
        return tensor.unsqueeze(0), True
    if tensor.dim() == 4:
        return tensor, False
    raise ContractViolationError(
        f"{name} must be (C, H, W) or (B, C, H, W), got {tuple(tensor.shape)}")


def _check_flow(flow: torch.Tensor) -> None:
    if flow.shape[1] != 2:
        raise ContractViolationError(f"flow must have 2 channels, got {flow.shape[1]}")


def warp_backward(frame: torch.Tensor, flow: torch.Tensor) -> torch.Tensor:
    """Sample ``frame`` at ``p + flow(p)`` with bilinear interpolation.

    Differentiable with respect to both inputs; a zero flow reproduces the
    frame bit-exactly. Resolution of ``frame`` and ``flow`` must match.
    """
    frame_b, squeeze = _as_batched(frame, "frame")
    flow_b, _ = _as_batched(flow, "flow")
    _check_flow(flow_b)
    if frame_b.shape[-2:] != flow_b.shape[-2:]:
        raise ContractViolationError(
            f"frame {tuple(frame_b.shape[-2:])} and flow {tuple(flow_b.shape[-2:])} "
            "resolutions differ")
    if flow_b.shape[0] == 1 and frame_b.shape[0] > 1:
        flow_b = flow_b.expand(frame_b.shape[0], -1, -1, -1)
    if not torch.isfinite(flow_b.detach()).all():
        raise ContractViolationError("flow contains non-finite values")

    b, _, h, w = frame_b.shape
    ys = torch.arange(h, dtype=flow_b.dtype, device=flow_b.device)
    xs = torch.arange(w, dtype=flow_b.dtype, device=flow_b.device)
    grid_y, grid_x = torch.meshgrid(ys, xs, indexing="ij")
    # clamping implements border replication; its zero gradient outside the
    # image is the correct gradient for a replicated border
    pos_x = (grid_x.unsqueeze(0) + flow_b[:, 0]).clamp(0.0, w - 1)
    pos_y = (grid_y.unsqueeze(0) + flow_b[:, 1]).clamp(0.0, h - 1)

    x0 = pos_x.floor()
    y0 = pos_y.floor()
    fx = (pos_x - x0).unsqueeze(1)
    fy = (pos_y - y0).unsqueeze(1)
    x0_i = x0.long()
    y0_i = y0.long()
    x1_i = (x0_i + 1).clamp(max=w - 1)
    y1_i = (y0_i + 1).clamp(max=h - 1)

    batch = torch.arange(b, device=frame_b.device).view(b, 1, 1)
    v00 = frame_b[batch, :, y0_i, x0_i].permute(0, 3, 1, 2)
    v01 = frame_b[batch, :, y0_i, x1_i].permute(0, 3, 1, 2)
    v10 = frame_b[batch, :, y1_i, x0_i].permute(0, 3, 1, 2)
    v11 = frame_b[batch, :, y1_i, x1_i].permute(0, 3, 1, 2)

    top = v00 + fx * (v01 - v00)
    bottom = v10 + fx * (v11 - v10)
    warped = top + fy * (bottom - top)
    return warped.squeeze(0) if squeeze else warped


def chain_flows(first: torch.Tensor, second: torch.Tensor) -> torch.Tensor:
    """Compose a flow A->B with a flow B->C into a flow A->C.

    ``result(p) = first(p) + second(p + first(p))``, with the lookup of
    ``second`` done by bilinear sampling.
    """
    first_b, squeeze = _as_batched(first, "first flow")
    second_b, _ = _as_batched(second, "second flow")
    _check_flow(first_b)
    _check_flow(second_b)
    if first_b.shape[-2:] != second_b.shape[-2:]:
        raise ContractViolationError(
            f"flow resolutions differ: {tuple(first_b.shape[-2:])} vs "
            f"{tuple(second_b.shape[-2:])}")
    chained = first_b + warp_backward(second_b, first_b)
    return chained.squeeze(0) if squeeze else chained


def chain_flow_sequence(flows: Sequence[torch.Tensor]) -> torch.Tensor:
    """Left-fold ``chain_flows`` over consecutive flows, in sequence order."""
    if len(flows) == 0:
        raise ContractViolationError("cannot chain an empty flow sequence")
    total = flows[0]
    for flow in flows[1:]:
        total = chain_flows(total, flow)
    return total
