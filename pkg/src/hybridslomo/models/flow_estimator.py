"""Pluggable dense optical-flow backends.

The flow between two frames is always expressed in the backward-warp
convention: ``estimate(a, b)`` returns the field ``f`` such that sampling
``b`` at ``p + f(p)`` reconstructs ``a``.

Two backends are provided:

* ``pyramid_network`` -- a compact coarse-to-fine residual CNN consumed as a
  pretrained estimator; it requires a weights file.
* ``lucas_kanade`` -- a classical dense pyramidal Lucas-Kanade solver that
  needs no weights; it is the default so the system runs out of the box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from scipy import ndimage
from torch import nn

from ..core import FlowField, Frame, resize_flow, warp_backward
from ..errors import (ContractViolationError, FlowEstimationError,
                      InitializationError)

LUCAS_KANADE = "lucas_kanade"
PYRAMID_NETWORK = "pyramid_network"


@dataclass(frozen=True)
class FlowEstimatorHandle:
    """Backend selector plus weight locator and pyramid depth."""

    backend: str = LUCAS_KANADE
    weights_path: str | Path | None = None
    levels: int | None = None

    def __post_init__(self) -> None:
        if self.backend not in (LUCAS_KANADE, PYRAMID_NETWORK):
            raise ContractViolationError(f"unknown flow backend {self.backend!r}")


def _as_hwc(frame) -> np.ndarray:
    if isinstance(frame, Frame):
        return frame.data
    if isinstance(frame, torch.Tensor):
        if frame.dim() != 3:
            raise ContractViolationError(f"expected (3, H, W) tensor, got {tuple(frame.shape)}")
        return frame.detach().permute(1, 2, 0).cpu().numpy()
    array = np.asarray(frame)
    if array.ndim != 3 or array.shape[2] != 3:
        raise ContractViolationError(f"expected (H, W, 3) array, got {array.shape}")
    return array


def _luma(frame: np.ndarray) -> np.ndarray:
    return (0.299 * frame[:, :, 0] + 0.587 * frame[:, :, 1]
            + 0.114 * frame[:, :, 2]).astype(np.float64)


def _resize_2d(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = image.shape
    ys = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    return ndimage.map_coordinates(image, [grid_y, grid_x], order=1, mode="nearest")


class LucasKanadeEstimator:
    """Dense coarse-to-fine Lucas-Kanade with Gaussian-windowed normal equations."""

    def __init__(self, levels: int | None = None, iterations: int = 4,
                 window_sigma: float = 2.0, regularization: float = 1e-4):
        self.levels = levels
        self.iterations = iterations
        self.window_sigma = window_sigma
        self.regularization = regularization

    def _auto_levels(self, h: int, w: int) -> int:
        return max(1, min(4, int(math.log2(max(min(h, w) / 12.0, 1.0))) + 1))

    def estimate(self, a, b) -> np.ndarray:
        a = _as_hwc(a)
        b = _as_hwc(b)
        if a.shape != b.shape:
            raise ContractViolationError(
                f"frame shapes differ: {a.shape} vs {b.shape}")
        gray_a, gray_b = _luma(a), _luma(b)
        h, w = gray_a.shape
        levels = self.levels or self._auto_levels(h, w)

        pyramid_a, pyramid_b = [gray_a], [gray_b]
        for _ in range(levels - 1):
            prev_a, prev_b = pyramid_a[-1], pyramid_b[-1]
            if min(prev_a.shape) < 8:
                break
            pyramid_a.append(ndimage.gaussian_filter(prev_a, 1.0)[::2, ::2])
            pyramid_b.append(ndimage.gaussian_filter(prev_b, 1.0)[::2, ::2])

        flow = np.zeros(pyramid_a[-1].shape + (2,), dtype=np.float64)
        for level_a, level_b in zip(reversed(pyramid_a), reversed(pyramid_b)):
            lh, lw = level_a.shape
            if flow.shape[:2] != (lh, lw):
                scale_x = lw / flow.shape[1]
                scale_y = lh / flow.shape[0]
                flow = np.stack([_resize_2d(flow[:, :, 0], lh, lw) * scale_x,
                                 _resize_2d(flow[:, :, 1], lh, lw) * scale_y], axis=2)
            grid_y, grid_x = np.meshgrid(np.arange(lh, dtype=np.float64),
                                         np.arange(lw, dtype=np.float64), indexing="ij")
            for _ in range(self.iterations):
                warped = ndimage.map_coordinates(
                    level_b, [grid_y + flow[:, :, 1], grid_x + flow[:, :, 0]],
                    order=1, mode="nearest")
                grad_y, grad_x = np.gradient(warped)
                diff = warped - level_a
                sig = self.window_sigma
                sxx = ndimage.gaussian_filter(grad_x * grad_x, sig) + self.regularization
                syy = ndimage.gaussian_filter(grad_y * grad_y, sig) + self.regularization
                sxy = ndimage.gaussian_filter(grad_x * grad_y, sig)
                sxt = ndimage.gaussian_filter(grad_x * diff, sig)
                syt = ndimage.gaussian_filter(grad_y * diff, sig)
                det = sxx * syy - sxy * sxy
                det = np.where(np.abs(det) < 1e-12, 1e-12, det)
                du = -(syy * sxt - sxy * syt) / det
                dv = -(sxx * syt - sxy * sxt) / det
                step = np.clip(np.stack([du, dv], axis=2), -4.0, 4.0)
                flow = flow + step
        return flow.astype(np.float32)


class _PyramidLevel(nn.Module):
    """Residual-flow predictor for one pyramid level (frame, warped frame, flow in)."""

    def __init__(self, width: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(8, width, 3, padding=1), nn.LeakyReLU(0.1),
            nn.Conv2d(width, width, 3, padding=1), nn.LeakyReLU(0.1),
            nn.Conv2d(width, width // 2, 3, padding=1), nn.LeakyReLU(0.1),
            nn.Conv2d(width // 2, 2, 3, padding=1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class PyramidFlowNetwork(nn.Module):
    """Compact coarse-to-fine residual flow CNN.

    Input sides must be divisible by ``2**(levels-1)``; the wrapper pads and
    crops automatically.
    """

    def __init__(self, levels: int = 4, width: int = 32):
        super().__init__()
        self.levels = levels
        self.blocks = nn.ModuleList(_PyramidLevel(width) for _ in range(levels))

    @property
    def stride(self) -> int:
        return 2 ** (self.levels - 1)

    def forward(self, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
        pyr_a, pyr_b = [a], [b]
        for _ in range(self.levels - 1):
            pyr_a.append(F.avg_pool2d(pyr_a[-1], 2))
            pyr_b.append(F.avg_pool2d(pyr_b[-1], 2))
        flow = torch.zeros(a.shape[0], 2, *pyr_a[-1].shape[-2:],
                           dtype=a.dtype, device=a.device)
        for block, level_a, level_b in zip(reversed(self.blocks),
                                           reversed(pyr_a), reversed(pyr_b)):
            if flow.shape[-2:] != level_a.shape[-2:]:
                flow = resize_flow(flow, *level_a.shape[-2:])
            warped = warp_backward(level_b, flow)
            flow = flow + block(torch.cat([level_a, warped, flow], dim=1))
        return flow


class PyramidNetworkEstimator:
    """Wraps a :class:`PyramidFlowNetwork` loaded from a weights file."""

    def __init__(self, weights_path: str | Path | None, levels: int | None = None):
        if weights_path is None:
            raise InitializationError(
                "pyramid_network backend requires a weights file; "
                "use the lucas_kanade backend for weight-free operation")
        path = Path(weights_path)
        if not path.is_file():
            raise InitializationError(f"flow weights not found: {path}")
        try:
            payload = torch.load(path, map_location="cpu", weights_only=True)
        except Exception as exc:
            raise InitializationError(f"cannot read flow weights {path}: {exc}") from exc
        meta = payload.get("meta", {}) if isinstance(payload, dict) else {}
        state = payload.get("state_dict", payload) if isinstance(payload, dict) else payload
        network = PyramidFlowNetwork(levels=levels or meta.get("levels", 4),
                                     width=meta.get("width", 32))
        try:
            network.load_state_dict(state)
        except (RuntimeError, ValueError) as exc:
            raise InitializationError(f"incompatible flow weights {path}: {exc}") from exc
        network.eval()
        network.requires_grad_(False)
        self.network = network

    def estimate(self, a, b) -> np.ndarray:
        a = _as_hwc(a)
        b = _as_hwc(b)
        if a.shape != b.shape:
            raise ContractViolationError(
                f"frame shapes differ: {a.shape} vs {b.shape}")
        tensor_a = torch.from_numpy(np.ascontiguousarray(a)).permute(2, 0, 1)[None].float()
        tensor_b = torch.from_numpy(np.ascontiguousarray(b)).permute(2, 0, 1)[None].float()
        h, w = tensor_a.shape[-2:]
        stride = self.network.stride
        pad_h = (-h) % stride
        pad_w = (-w) % stride
        if pad_h or pad_w:
            tensor_a = F.pad(tensor_a, (0, pad_w, 0, pad_h), mode="replicate")
            tensor_b = F.pad(tensor_b, (0, pad_w, 0, pad_h), mode="replicate")
        try:
            with torch.no_grad():
                flow = self.network(tensor_a, tensor_b)
        except RuntimeError as exc:
            raise FlowEstimationError(f"pyramid network failed: {exc}") from exc
        flow = flow[:, :, :h, :w]
        return flow[0].permute(1, 2, 0).numpy().astype(np.float32)


def save_pyramid_network(network: PyramidFlowNetwork, path: str | Path) -> None:
    torch.save({"state_dict": network.state_dict(),
                "meta": {"levels": network.levels,
                         "width": network.blocks[0].net[0].out_channels}}, path)


def create_flow_estimator(handle: FlowEstimatorHandle):
    if handle.backend == LUCAS_KANADE:
        return LucasKanadeEstimator(levels=handle.levels)
    return PyramidNetworkEstimator(handle.weights_path, levels=handle.levels)


def estimate_flow(a, b, estimator_or_handle) -> FlowField:
    """Dense flow from frame ``a`` to frame ``b`` at their shared resolution."""
    estimator = estimator_or_handle
    if isinstance(estimator_or_handle, FlowEstimatorHandle):
        estimator = create_flow_estimator(estimator_or_handle)
    return FlowField(estimator.estimate(a, b))
