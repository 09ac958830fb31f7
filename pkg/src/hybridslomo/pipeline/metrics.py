"""Image-quality metrics: PSNR, SSIM, and a learned perceptual distance."""

from __future__ import annotations

import numpy as np
import torch
from skimage.metrics import structural_similarity

from ..core import Frame
from ..errors import ContractViolationError
from ..models import FeatureHandle, Vgg16Features

PSNR_CAP_DB = 99.0


def _as_array(frame) -> np.ndarray:
    if isinstance(frame, Frame):
        return frame.data
    if isinstance(frame, torch.Tensor):
        return frame.detach().permute(1, 2, 0).cpu().numpy()
    return np.asarray(frame, dtype=np.float32)


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ContractViolationError(f"frame shapes differ: {a.shape} vs {b.shape}")


def metric_psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB over [0, 1] frames.

    Identical frames report the finite cap rather than infinity.
    """
    a, b = _as_array(a), _as_array(b)
    _check_pair(a, b)
    mse = float(((a.astype(np.float64) - b.astype(np.float64)) ** 2).mean())
    if mse <= 0.0:
        return PSNR_CAP_DB
    return min(float(10.0 * np.log10(1.0 / mse)), PSNR_CAP_DB)


def metric_ssim(a, b) -> float:
    """Structural similarity with the standard Gaussian window constants."""
    a, b = _as_array(a), _as_array(b)
    _check_pair(a, b)
    return float(structural_similarity(a, b, channel_axis=2, data_range=1.0,
                                       gaussian_weights=True, sigma=1.5,
                                       use_sample_covariance=False))


class PerceptualDistance:
    """Perceptual distance from unit-normalized deep features.

    Four feature stages of a VGG-16 stack are channel-normalized and
    compared by mean squared difference, averaged over stages. The backbone
    comes from the given handle (pretrained file or seeded fallback); the
    variant string names it in evaluation reports.
    """

    def __init__(self, handle: FeatureHandle = FeatureHandle()):
        self.features = Vgg16Features(handle)
        self.variant = f"vgg16-{self.features.source}"

    @staticmethod
    def _tensor(frame) -> torch.Tensor:
        if isinstance(frame, torch.Tensor):
            tensor = frame
        else:
            tensor = torch.from_numpy(_as_array(frame).copy()).permute(2, 0, 1)
        return tensor.unsqueeze(0).float()

    def __call__(self, a, b) -> float:
        tensor_a = self._tensor(a)
        tensor_b = self._tensor(b)
        if tensor_a.shape != tensor_b.shape:
            raise ContractViolationError(
                f"frame shapes differ: {tuple(tensor_a.shape)} vs {tuple(tensor_b.shape)}")
        with torch.no_grad():
            stages_a = self.features.stages(tensor_a)
            stages_b = self.features.stages(tensor_b)
            total = 0.0
            for stage_a, stage_b in zip(stages_a, stages_b):
                total += float(((_unit_normalize(stage_a)
                                 - _unit_normalize(stage_b)) ** 2).mean())
        return total / len(stages_a)


def _unit_normalize(features: torch.Tensor, eps: float = 1e-10) -> torch.Tensor:
    norm = features.pow(2).sum(dim=1, keepdim=True).sqrt()
    return features / (norm + eps)


def metric_lpips(a, b, distance: PerceptualDistance) -> float:
    return distance(a, b)
