"""Domain containers for image/flow math.

Conventions used across the package:

* ``Frame.data`` is ``(H, W, 3)`` float in ``[0, 1]``.
* ``FlowField.data`` is ``(H, W, 2)`` with channel 0 = x displacement and
  channel 1 = y displacement, both in pixels.
* ``VisibilityMap.data`` is ``(H, W, 1)`` in ``[0, 1]``.
* Tensor variants are channel-first (``(3, H, W)``, ``(2, H, W)``, ...).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from ..errors import ContractViolationError


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ContractViolationError(message)


def to_tensor(array: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """HWC numpy array -> CHW tensor."""
    _require(array.ndim == 3, f"expected HWC array, got shape {array.shape}")
    return torch.from_numpy(np.ascontiguousarray(array)).permute(2, 0, 1).to(dtype)


def to_array(tensor: torch.Tensor) -> np.ndarray:
    """CHW tensor (or BCHW with batch 1) -> HWC float32 numpy array."""
    if tensor.dim() == 4:
        _require(tensor.shape[0] == 1, f"cannot collapse batch of {tensor.shape[0]}")
        tensor = tensor[0]
    _require(tensor.dim() == 3, f"expected CHW tensor, got shape {tuple(tensor.shape)}")
    return tensor.detach().permute(1, 2, 0).contiguous().cpu().numpy().astype(np.float32)


@dataclass(frozen=True)
class Frame:
    """A color raster with intensities in [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        _require(self.data.ndim == 3 and self.data.shape[2] == 3,
                 f"frame must be (H, W, 3), got {self.data.shape}")
        _require(bool(np.isfinite(self.data).all()), "frame contains non-finite values")
        _require(float(self.data.min()) >= 0.0 and float(self.data.max()) <= 1.0,
                 "frame intensities must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_array(cls, array: np.ndarray, clamp: bool = True) -> "Frame":
        array = np.asarray(array, dtype=np.float32)
        if clamp:
            array = np.clip(array, 0.0, 1.0)
        return cls(array)

    @classmethod
    def from_tensor(cls, tensor: torch.Tensor, clamp: bool = True) -> "Frame":
        return cls.from_array(to_array(tensor), clamp=clamp)

    def to_tensor(self, dtype: torch.dtype = torch.float32) -> torch.Tensor:
        return to_tensor(self.data, dtype)


@dataclass(frozen=True)
class FlowField:
    """Dense displacement field in pixel units (x, y channels)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        _require(self.data.ndim == 3 and self.data.shape[2] == 2,
                 f"flow must be (H, W, 2), got {self.data.shape}")
        _require(bool(np.isfinite(self.data).all()), "flow contains non-finite values")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField":
        return cls(np.zeros((height, width, 2), dtype=np.float32))

    @classmethod
    def from_tensor(cls, tensor: torch.Tensor) -> "FlowField":
        return cls(to_array(tensor))

    def to_tensor(self, dtype: torch.dtype = torch.float32) -> torch.Tensor:
        return to_tensor(self.data, dtype)


@dataclass(frozen=True)
class VisibilityMap:
    """Per-pixel confidence in [0, 1] that warped left-keyframe content is valid.

    The right-keyframe map is always the elementwise complement.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        _require(self.data.ndim == 3 and self.data.shape[2] == 1,
                 f"visibility map must be (H, W, 1), got {self.data.shape}")
        _require(bool(np.isfinite(self.data).all()), "visibility contains non-finite values")
        _require(float(self.data.min()) >= 0.0 and float(self.data.max()) <= 1.0,
                 "visibility values must lie in [0, 1]")

    def complement(self) -> "VisibilityMap":
        return VisibilityMap((1.0 - self.data).astype(self.data.dtype))

    @classmethod
    def from_tensor(cls, tensor: torch.Tensor) -> "VisibilityMap":
        return cls(to_array(tensor))

    def to_tensor(self, dtype: torch.dtype = torch.float32) -> torch.Tensor:
        return to_tensor(self.data, dtype)


@dataclass(frozen=True)
class Homography:
    """3x3 projective transform, normalized so the bottom-right entry is 1."""

    matrix: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=np.float64)
        _require(matrix.shape == (3, 3), f"homography must be 3x3, got {matrix.shape}")
        _require(bool(np.isfinite(matrix).all()), "homography has non-finite entries")
        det = float(np.linalg.det(matrix))
        _require(abs(det) > 1e-12, "homography matrix is singular")
        _require(abs(matrix[2, 2]) > 1e-12, "homography cannot be normalized (H[2,2] ~ 0)")
        object.__setattr__(self, "matrix", matrix / matrix[2, 2])

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        """Map (N, 2) xy points through the transform."""
        points = np.asarray(points, dtype=np.float64)
        homo = np.concatenate([points, np.ones((points.shape[0], 1))], axis=1)
        mapped = homo @ self.matrix.T
        return mapped[:, :2] / mapped[:, 2:3]
