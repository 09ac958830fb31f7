"""Clip extraction from decoded frame sequences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolationError

CLIP_LENGTH = 12
RESOLUTION_FACTORS = {"1080p": 6, "720p": 4}


@dataclass(frozen=True)
class ClipRecord:
    """Twelve consecutive frames plus provenance tags.

    ``resolution_class`` selects the auxiliary downsampling factor: 6 for
    1080p-class sources, 4 for 720p-class sources.
    """

    frames: tuple[np.ndarray, ...]
    source_id: str
    fps: float
    resolution_class: str

    def __post_init__(self) -> None:
        if len(self.frames) != CLIP_LENGTH:
            raise ContractViolationError(
                f"clip must hold exactly {CLIP_LENGTH} frames, got {len(self.frames)}")
        shapes = {frame.shape for frame in self.frames}
        if len(shapes) != 1:
            raise ContractViolationError(f"clip resolution not uniform: {shapes}")
        if self.resolution_class not in RESOLUTION_FACTORS:
            raise ContractViolationError(
                f"resolution class must be one of {sorted(RESOLUTION_FACTORS)}, "
                f"got {self.resolution_class!r}")
        if self.fps <= 0:
            raise ContractViolationError(f"fps must be positive, got {self.fps}")

    @property
    def factor(self) -> int:
        return RESOLUTION_FACTORS[self.resolution_class]


def extract_clips(frames, source_id: str, fps: float, resolution_class: str,
                  stride: int | None = None) -> list[ClipRecord]:
    """Cut a frame sequence into 12-frame clips.

    ``stride`` defaults to 12 (non-overlapping windows). A sequence shorter
    than 12 frames yields an empty list.
    """
    frames = list(frames)
    if stride is None:
        stride = CLIP_LENGTH
    if stride < 1:
        raise ContractViolationError(f"stride must be >= 1, got {stride}")
    clips = []
    for start in range(0, len(frames) - CLIP_LENGTH + 1, stride):
        window = tuple(np.asarray(f, dtype=np.float32)
                       for f in frames[start:start + CLIP_LENGTH])
        clips.append(ClipRecord(window, f"{source_id}_{start:06d}", fps,
                                resolution_class))
    return clips
