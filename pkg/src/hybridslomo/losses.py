"""Training objectives.

Four base terms (reconstruction, perceptual, warping, total variation) and
two staged composites: the alignment loss used while training the flow
enhancer (reconstruction of the visibility-weighted blend) and the
appearance loss used for the synthesis network. All L1/L2 reductions are
means over elements so the fixed composite weights are independent of
resolution and batch size.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import torch

from .core import warp_backward
from .errors import ContractViolationError

ALIGN_WEIGHTS: Mapping[str, float] = MappingProxyType({
    "reconstruction": 204.0,
    "perceptual": 0.005,
    "warping": 102.0,
    "total_variation": 1.0,
})
APPEARANCE_WEIGHTS: Mapping[str, float] = MappingProxyType({
    "reconstruction": 204.0,
    "perceptual": 0.005,
})


@dataclass(frozen=True)
class LossBreakdown:
    """Scalar loss components plus their weighted sum."""

    reconstruction: float
    perceptual: float
    warping: float
    total_variation: float
    weighted_total: float
    weights: Mapping[str, float]

    def components(self) -> dict[str, float]:
        return {
            "reconstruction": self.reconstruction,
            "perceptual": self.perceptual,
            "warping": self.warping,
            "total_variation": self.total_variation,
        }

    def recomputed_total(self) -> float:
        values = self.components()
        return sum(weight * values[name] for name, weight in self.weights.items())


def _check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ContractViolationError(
            f"{what} shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")


def loss_reconstruction(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over all pixels and channels."""
    _check_same_shape(pred, gt, "reconstruction inputs")
    return (pred - gt).abs().mean()


def loss_perceptual(pred: torch.Tensor, gt: torch.Tensor, features) -> torch.Tensor:
    """Mean squared difference of deep feature responses."""
    _check_same_shape(pred, gt, "perceptual inputs")
    squeeze = pred.dim() == 3
    if squeeze:
        pred, gt = pred.unsqueeze(0), gt.unsqueeze(0)
    with torch.no_grad():
        gt_features = features(gt)
    return (features(pred) - gt_features).pow(2).mean()


def loss_warping(target: torch.Tensor, left: torch.Tensor, right: torch.Tensor,
                 flow_l: torch.Tensor, flow_r: torch.Tensor) -> torch.Tensor:
    """Mean L1 between the target and each keyframe warped toward it, summed
    over the two keyframes."""
    _check_same_shape(target, left, "warping inputs")
    _check_same_shape(target, right, "warping inputs")
    left_term = (target - warp_backward(left, flow_l)).abs().mean()
    right_term = (target - warp_backward(right, flow_r)).abs().mean()
    return left_term + right_term


def _tv(flow: torch.Tensor) -> torch.Tensor:
    dx = (flow[..., :, 1:] - flow[..., :, :-1]).abs().mean()
    dy = (flow[..., 1:, :] - flow[..., :-1, :]).abs().mean()
    return dx + dy


def loss_total_variation(flow_l: torch.Tensor, flow_r: torch.Tensor) -> torch.Tensor:
    """Mean L1 norm of forward differences of each flow field, summed."""
    return _tv(flow_l) + _tv(flow_r)


def align_loss(pred_fused: torch.Tensor, gt: torch.Tensor,
               left: torch.Tensor, right: torch.Tensor,
               flow_l: torch.Tensor, flow_r: torch.Tensor,
               features) -> tuple[torch.Tensor, LossBreakdown]:
    """Flow-stage composite over the fused prediction.

    Returns the differentiable total and a float breakdown.
    """
    reconstruction = loss_reconstruction(pred_fused, gt)
    perceptual = loss_perceptual(pred_fused, gt, features)
    warping = loss_warping(gt, left, right, flow_l, flow_r)
    total_variation = loss_total_variation(flow_l, flow_r)
    total = (ALIGN_WEIGHTS["reconstruction"] * reconstruction
             + ALIGN_WEIGHTS["perceptual"] * perceptual
             + ALIGN_WEIGHTS["warping"] * warping
             + ALIGN_WEIGHTS["total_variation"] * total_variation)
    breakdown = LossBreakdown(float(reconstruction.detach()), float(perceptual.detach()),
                              float(warping.detach()), float(total_variation.detach()),
                              float(total.detach()), ALIGN_WEIGHTS)
    return total, breakdown


def appearance_loss(pred: torch.Tensor, gt: torch.Tensor,
                    features) -> tuple[torch.Tensor, LossBreakdown]:
    """Appearance-stage composite: weighted reconstruction + perceptual."""
    reconstruction = loss_reconstruction(pred, gt)
    perceptual = loss_perceptual(pred, gt, features)
    total = (APPEARANCE_WEIGHTS["reconstruction"] * reconstruction
             + APPEARANCE_WEIGHTS["perceptual"] * perceptual)
    breakdown = LossBreakdown(float(reconstruction.detach()), float(perceptual.detach()),
                              0.0, 0.0, float(total.detach()), APPEARANCE_WEIGHTS)
    return total, breakdown
