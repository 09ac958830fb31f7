"""Long-range flow construction: upsample auxiliary frames, estimate
consecutive flows, chain them toward each keyframe, then refine with the
flow-enhancement network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..core import chain_flow_sequence, resample, to_tensor, warp_backward
from ..errors import ContractViolationError
from .unet import UNet

PairwiseFlows = dict[tuple[int, int], torch.Tensor]


def upsample_window(aux_frames, main_h: int, main_w: int,
                    dtype: torch.dtype = torch.float32) -> list[torch.Tensor]:
    """Bilinearly upsample every auxiliary frame to the main resolution."""
    upsampled = []
    for frame in aux_frames:
        tensor = frame if isinstance(frame, torch.Tensor) else to_tensor(
            np.asarray(frame if isinstance(frame, np.ndarray) else frame.data), dtype)
        upsampled.append(resample(tensor.to(dtype), main_h, main_w, mode="bilinear"))
    return upsampled


def estimate_window_flows(upsampled: list[torch.Tensor], estimator,
                          t_index: int | None = None) -> PairwiseFlows:
    """Flows between consecutive frames of an upsampled window.

    Keys are (i, j) with |i - j| == 1 and the flow points from frame i to
    frame j. When ``t_index`` is given only the pairs reachable while
    chaining from that index are estimated; otherwise all pairs are.
    """
    n = len(upsampled)
    arrays = [frame.detach().permute(1, 2, 0).cpu().numpy() for frame in upsampled]
    flows: PairwiseFlows = {}

    def _add(i: int, j: int) -> None:
        if (i, j) not in flows:
            field = estimator.estimate(arrays[i], arrays[j])
            flows[(i, j)] = torch.from_numpy(field).permute(2, 0, 1).to(upsampled[0].dtype)

    down = range(1, n) if t_index is None else range(1, t_index + 1)
    up = range(n - 1) if t_index is None else range(t_index, n - 1)
    for i in down:
        _add(i, i - 1)
    for i in up:
        _add(i, i + 1)
    return flows


def compute_initial_flows(aux_frames, t_index: int, main_resolution: tuple[int, int],
                          estimator, pairwise: PairwiseFlows | None = None,
                          ) -> tuple[torch.Tensor, torch.Tensor]:
    """Chained flows from the target index to both window endpoints.

    Auxiliary frames are upsampled to ``main_resolution`` before any flow is
    estimated. Returns ``(flow_to_left, flow_to_right)``; the flow on the
    side the target coincides with is identically zero.
    """
    n = len(aux_frames)
    if n < 2:
        raise ContractViolationError(f"auxiliary window needs >= 2 frames, got {n}")
    if not 0 <= t_index <= n - 1:
        raise ContractViolationError(
            f"target index {t_index} outside window [0, {n - 1}]")
    main_h, main_w = main_resolution

    if pairwise is None:
        upsampled = upsample_window(aux_frames, main_h, main_w)
        pairwise = estimate_window_flows(upsampled, estimator, t_index=t_index)
    dtype = next(iter(pairwise.values())).dtype if pairwise else torch.float32

    zero = torch.zeros(2, main_h, main_w, dtype=dtype)
    if t_index == 0:
        flow_left = zero
    else:
        flow_left = chain_flow_sequence(
            [pairwise[(i, i - 1)] for i in range(t_index, 0, -1)])
    if t_index == n - 1:
        flow_right = zero
    else:
        flow_right = chain_flow_sequence(
            [pairwise[(i, i + 1)] for i in range(t_index, n - 1)])
    return flow_left, flow_right


@dataclass
class EnhancementOutput:
    flow_l: torch.Tensor
    flow_r: torch.Tensor
    delta_flow_l: torch.Tensor
    delta_flow_r: torch.Tensor
    visibility_l: torch.Tensor

    @property
    def visibility_r(self) -> torch.Tensor:
        return 1.0 - self.visibility_l


def assemble_enhancement_input(initial_l: torch.Tensor, initial_r: torch.Tensor,
                               left: torch.Tensor, right: torch.Tensor,
                               warped_l: torch.Tensor, warped_r: torch.Tensor,
                               aux_up: torch.Tensor) -> torch.Tensor:
    """Stack the 19 enhancement-network input channels."""
    parts = (initial_l, initial_r, left, right, warped_l, warped_r, aux_up)
    expected = (2, 2, 3, 3, 3, 3, 3)
    batched = [part if part.dim() == 4 else part.unsqueeze(0) for part in parts]
    for part, channels in zip(batched, expected):
        if part.shape[1] != channels:
            raise ContractViolationError(
                f"enhancement input slot expected {channels} channels, got {part.shape[1]}")
    resolution = batched[0].shape[-2:]
    if any(part.shape[-2:] != resolution for part in batched):
        raise ContractViolationError("enhancement inputs must share one resolution")
    stacked = torch.cat(batched, dim=1)
    return stacked if parts[0].dim() == 4 else stacked.squeeze(0)


def enhance_flows(initial_l: torch.Tensor, initial_r: torch.Tensor,
                  left: torch.Tensor, right: torch.Tensor,
                  warped_l: torch.Tensor, warped_r: torch.Tensor,
                  aux_up: torch.Tensor, net: UNet) -> EnhancementOutput:
    """Add network-predicted residuals to the initial flows and estimate the
    left-keyframe visibility map."""
    x = assemble_enhancement_input(initial_l, initial_r, left, right,
                                   warped_l, warped_r, aux_up)
    squeeze = x.dim() == 3
    if squeeze:
        x = x.unsqueeze(0)
    out = net(x)
    if out.shape[1] != 5:
        raise ContractViolationError(
            f"flow-enhancement network must emit 5 channels, got {out.shape[1]}")
    delta_l, delta_r, visibility = out[:, 0:2], out[:, 2:4], out[:, 4:5]
    init_l = initial_l if initial_l.dim() == 4 else initial_l.unsqueeze(0)
    init_r = initial_r if initial_r.dim() == 4 else initial_r.unsqueeze(0)
    flow_l = init_l + delta_l
    flow_r = init_r + delta_r
    if squeeze:
        flow_l, flow_r = flow_l.squeeze(0), flow_r.squeeze(0)
        delta_l, delta_r = delta_l.squeeze(0), delta_r.squeeze(0)
        visibility = visibility.squeeze(0)
    return EnhancementOutput(flow_l, flow_r, delta_l, delta_r, visibility)


def warp_keyframes(left: torch.Tensor, right: torch.Tensor,
                   flow_l: torch.Tensor, flow_r: torch.Tensor,
                   ) -> tuple[torch.Tensor, torch.Tensor]:
    return warp_backward(left, flow_l), warp_backward(right, flow_r)
