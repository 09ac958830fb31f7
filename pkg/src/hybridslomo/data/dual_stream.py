"""Ingestion of genuine dual-camera recordings: fps bookkeeping and
temporal alignment by frame discarding."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..core import Homography
from ..errors import AlignmentError, ContractViolationError
from .synthesis import _area_downsample, _bilinear_resize


@dataclass(frozen=True)
class DualStreamRecording:
    main_frames: tuple[np.ndarray, ...]
    main_fps: float
    aux_frames: tuple[np.ndarray, ...]
    aux_fps: float
    homography: Homography | None = None
    color_params: tuple[tuple[float, float], ...] | None = None
    offset_applied: int = 0

    def __post_init__(self) -> None:
        if self.main_fps <= 0 or self.aux_fps <= 0:
            raise ContractViolationError("frame rates must be positive")
        ratio = self.aux_fps / self.main_fps
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ContractViolationError(
                f"auxiliary fps must be an integer multiple of main fps "
                f"(got {self.aux_fps}/{self.main_fps})")

    @property
    def fps_ratio(self) -> int:
        return int(round(self.aux_fps / self.main_fps))


def _luma_thumb(frame: np.ndarray, size: int = 24) -> np.ndarray:
    h, w, _ = frame.shape
    factor = max(1, min(h, w) // size)
    cropped = frame[:h - h % factor, :w - w % factor]
    small = _area_downsample(cropped, factor)
    return 0.299 * small[:, :, 0] + 0.587 * small[:, :, 1] + 0.114 * small[:, :, 2]


def _frame_distance(a: np.ndarray, b: np.ndarray) -> float:
    ta, tb = _luma_thumb(a), _luma_thumb(b)
    if ta.shape != tb.shape:
        tb = _bilinear_resize(np.repeat(tb[:, :, None], 3, axis=2),
                              ta.shape[0], ta.shape[1])[:, :, 0]
    return float(np.abs(ta - tb).mean())


def temporal_align(recording: DualStreamRecording, offset: int | None = None,
                   max_search: int = 16, mismatch_threshold: float = 0.3,
                   ) -> DualStreamRecording:
    """Trim leading frames so frame 0 of both streams shows the same instant.

    A known offset (in auxiliary frames; positive means the auxiliary stream
    leads) can be given directly; otherwise it is found by correlating
    downsampled luminance of the first main frame against an auxiliary search
    window, in both directions. Tails are trimmed so the auxiliary stream
    spans exactly the main keyframe intervals. Residual sub-frame offsets are
    tolerated downstream.
    """
    main = list(recording.main_frames)
    aux = list(recording.aux_frames)
    ratio = recording.fps_ratio
    if not main or not aux:
        raise AlignmentError("cannot align empty streams")

    if offset is None:
        candidates: list[tuple[float, int]] = []
        for k in range(0, min(max_search, len(aux) - 1) + 1):
            candidates.append((_frame_distance(main[0], aux[k]), k))
        for j in range(1, min(max_search // ratio, len(main) - 1) + 1):
            candidates.append((_frame_distance(main[j], aux[0]), -j * ratio))
        if not candidates:
            raise AlignmentError("empty search window")
        best_score, offset = min(candidates)
        if best_score > mismatch_threshold:
            raise AlignmentError(
                f"no overlap found within {max_search} frames "
                f"(best luminance mismatch {best_score:.3f})")

    if offset >= 0:
        if offset >= len(aux):
            raise AlignmentError(f"offset {offset} exceeds auxiliary length {len(aux)}")
        aux = aux[offset:]
    else:
        drop_main = (-offset) // ratio
        if (-offset) % ratio:
            raise AlignmentError(
                f"negative offset {offset} must be a multiple of the fps ratio {ratio}")
        if drop_main >= len(main):
            raise AlignmentError(f"offset {offset} exceeds main length {len(main)}")
        main = main[drop_main:]

    usable_intervals = min(len(main) - 1, (len(aux) - 1) // ratio)
    if usable_intervals < 1:
        raise AlignmentError("streams too short after alignment (no full interval)")
    main = main[:usable_intervals + 1]
    aux = aux[:usable_intervals * ratio + 1]
    return replace(recording, main_frames=tuple(main), aux_frames=tuple(aux),
                   offset_applied=offset)
