"""Hybrid training-sample synthesis, augmentation, and camera-mismatch
perturbations.

A hybrid sample pairs the first and last frames of a 9-frame window (kept at
full resolution) with the whole window downsampled to emulate the auxiliary
camera; the 7 interior frames are the ground truth. Perturbations (gamma,
small shifts) emulate the color and alignment mismatch of real rigs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ContractViolationError
from .clips import ClipRecord

WINDOW_LENGTH = 9
TARGET_COUNT = 7
GAMMA_RANGE = (0.8, 1.3)
MAX_SHIFT = 2
CROP_MAIN = (768, 384)  # (width, height)


@dataclass(frozen=True)
class PerturbationLog:
    gamma: float = 1.0
    shift: tuple[int, int] = (0, 0)  # (dx, dy) on the auxiliary frames


@dataclass(frozen=True)
class AugmentationLog:
    reversed: bool = False
    flipped: bool = False
    crop_origin: tuple[int, int] = (0, 0)  # (x, y) in main pixels
    resized_up: bool = False


@dataclass(frozen=True)
class HybridSample:
    """One training unit: keyframes, ground truth, auxiliary window."""

    sample_id: str
    left: np.ndarray
    right: np.ndarray
    targets: tuple[np.ndarray, ...]
    aux: tuple[np.ndarray, ...]
    factor: int
    window_offset: int
    perturbation: PerturbationLog = field(default_factory=PerturbationLog)
    augmentation: AugmentationLog | None = None

    def __post_init__(self) -> None:
        if len(self.aux) != WINDOW_LENGTH:
            raise ContractViolationError(
                f"auxiliary window must hold {WINDOW_LENGTH} frames, got {len(self.aux)}")
        if len(self.targets) != TARGET_COUNT:
            raise ContractViolationError(
                f"expected {TARGET_COUNT} ground-truth frames, got {len(self.targets)}")
        if self.factor not in (4, 6):
            raise ContractViolationError(f"factor must be 4 or 6, got {self.factor}")
        h, w, _ = self.left.shape
        if self.right.shape != self.left.shape or any(
                t.shape != self.left.shape for t in self.targets):
            raise ContractViolationError("main-resolution frames must share one shape")
        if h % self.factor or w % self.factor:
            raise ContractViolationError(
                f"main size {h}x{w} not divisible by factor {self.factor}")
        expected_aux = (h // self.factor, w // self.factor, 3)
        if any(a.shape != expected_aux for a in self.aux):
            raise ContractViolationError(
                f"auxiliary frames must be {expected_aux}, got {self.aux[0].shape}")

    @property
    def t_indices(self) -> tuple[int, ...]:
        """Window positions of the ground-truth targets (keyframes are 0 and 8)."""
        return tuple(range(1, WINDOW_LENGTH - 1))

    def normalized_time(self, t_index: int) -> float:
        return t_index / (WINDOW_LENGTH - 1)

    def main_resolution(self) -> tuple[int, int]:
        return self.left.shape[0], self.left.shape[1]


def _area_downsample(frame: np.ndarray, factor: int) -> np.ndarray:
    h, w, c = frame.shape
    blocks = frame.astype(np.float64).reshape(h // factor, factor,
                                              w // factor, factor, c)
    return blocks.mean(axis=(1, 3)).astype(np.float32)


def _bilinear_resize(frame: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    import torch

    from ..core import resample, to_array, to_tensor
    return to_array(resample(to_tensor(frame, torch.float32), out_h, out_w))


def synthesize_hybrid(clip: ClipRecord, rng: np.random.Generator) -> HybridSample:
    """Pick a 9-frame window, keep endpoints at full resolution as keyframes,
    and downsample the whole window into the auxiliary stream."""
    offset = int(rng.integers(0, len(clip.frames) - WINDOW_LENGTH + 1))
    window = [np.asarray(f, dtype=np.float32) for f in
              clip.frames[offset:offset + WINDOW_LENGTH]]
    factor = clip.factor
    h, w, _ = window[0].shape
    crop_h, crop_w = h - h % factor, w - w % factor
    if (crop_h, crop_w) != (h, w):
        window = [f[:crop_h, :crop_w] for f in window]
    aux = tuple(_area_downsample(f, factor) for f in window)
    return HybridSample(
        sample_id=f"{clip.source_id}_w{offset}",
        left=window[0],
        right=window[-1],
        targets=tuple(window[1:-1]),
        aux=aux,
        factor=factor,
        window_offset=offset,
    )


def augment(sample: HybridSample, rng: np.random.Generator,
            crop_main: tuple[int, int] = CROP_MAIN) -> HybridSample:
    """Random temporal reversal, horizontal flip, and an aligned random crop.

    The auxiliary crop is the main crop scaled by the sample's factor, so the
    two streams stay registered. Frames smaller than the crop are resized up
    first (and the sample is flagged).
    """
    crop_w, crop_h = crop_main
    if crop_w % sample.factor or crop_h % sample.factor:
        raise ContractViolationError(
            f"crop {crop_w}x{crop_h} not divisible by factor {sample.factor}")
    left, right = sample.left, sample.right
    targets = list(sample.targets)
    aux = list(sample.aux)

    reverse = bool(rng.random() < 0.5)
    if reverse:
        left, right = right, left
        targets = targets[::-1]
        aux = aux[::-1]

    flip = bool(rng.random() < 0.5)
    if flip:
        left = left[:, ::-1].copy()
        right = right[:, ::-1].copy()
        targets = [t[:, ::-1].copy() for t in targets]
        aux = [a[:, ::-1].copy() for a in aux]

    h, w, _ = left.shape
    resized_up = False
    if h < crop_h or w < crop_w:
        resized_up = True
        left = _bilinear_resize(left, crop_h, crop_w)
        right = _bilinear_resize(right, crop_h, crop_w)
        targets = [_bilinear_resize(t, crop_h, crop_w) for t in targets]
        aux = [_bilinear_resize(a, crop_h // sample.factor, crop_w // sample.factor)
               for a in aux]
        h, w = crop_h, crop_w

    # crop origins are sampled on the auxiliary grid so both streams cut the
    # same region
    aux_max_x = (w - crop_w) // sample.factor
    aux_max_y = (h - crop_h) // sample.factor
    origin_x = int(rng.integers(0, aux_max_x + 1)) * sample.factor
    origin_y = int(rng.integers(0, aux_max_y + 1)) * sample.factor
    ax, ay = origin_x // sample.factor, origin_y // sample.factor
    acw, ach = crop_w // sample.factor, crop_h // sample.factor

    def crop_main_frame(frame):
        return frame[origin_y:origin_y + crop_h, origin_x:origin_x + crop_w].copy()

    def crop_aux_frame(frame):
        return frame[ay:ay + ach, ax:ax + acw].copy()

    return replace(
        sample,
        left=crop_main_frame(left),
        right=crop_main_frame(right),
        targets=tuple(crop_main_frame(t) for t in targets),
        aux=tuple(crop_aux_frame(a) for a in aux),
        augmentation=AugmentationLog(reversed=reverse, flipped=flip,
                                     crop_origin=(origin_x, origin_y),
                                     resized_up=resized_up),
    )


def _shift_with_border(frame: np.ndarray, dx: int, dy: int) -> np.ndarray:
    out = frame
    if dx:
        out = np.concatenate([np.repeat(out[:, :1], dx, axis=1), out[:, :-dx]], axis=1)
    if dy:
        out = np.concatenate([np.repeat(out[:1], dy, axis=0), out[:-dy]], axis=0)
    return out.copy()


def perturb(sample: HybridSample, rng: np.random.Generator) -> HybridSample:
    """Emulate real-rig mismatch on the auxiliary frames: one random gamma
    and one integer shift (border-replicated) per sample."""
    gamma = float(rng.uniform(*GAMMA_RANGE))
    dx = int(rng.integers(0, MAX_SHIFT + 1))
    dy = int(rng.integers(0, MAX_SHIFT + 1))
    aux = []
    for frame in sample.aux:
        adjusted = frame if gamma == 1.0 else np.clip(frame, 0.0, 1.0) ** gamma
        aux.append(_shift_with_border(adjusted.astype(np.float32), dx, dy))
    return replace(sample, aux=tuple(aux),
                   perturbation=PerturbationLog(gamma=gamma, shift=(dx, dy)))


def color_transfer(aux_frames, reference_main: np.ndarray, factor: int,
                   ) -> tuple[list[np.ndarray], list[tuple[float, float]]]:
    """Fit a per-channel affine map from the first auxiliary frame to the
    (downsampled) main reference and apply it to the whole window.

    Returns the corrected frames and the per-channel (gain, bias) pairs.
    A constant channel keeps the identity map.
    """
    aux_frames = [np.asarray(f, dtype=np.float32) for f in aux_frames]
    if not aux_frames:
        raise ContractViolationError("color transfer needs at least one auxiliary frame")
    h, w, _ = reference_main.shape
    reference = _area_downsample(reference_main[:h - h % factor, :w - w % factor],
                                 factor)
    anchor = aux_frames[0]
    if reference.shape != anchor.shape:
        reference = _bilinear_resize(reference, anchor.shape[0], anchor.shape[1])

    params: list[tuple[float, float]] = []
    for c in range(3):
        x = anchor[:, :, c].astype(np.float64).ravel()
        y = reference[:, :, c].astype(np.float64).ravel()
        if x.var() < 1e-12:
            params.append((1.0, 0.0))
            continue
        design = np.stack([x, np.ones_like(x)], axis=1)
        (gain, bias), *_ = np.linalg.lstsq(design, y, rcond=None)
        params.append((float(gain), float(bias)))

    corrected = []
    for frame in aux_frames:
        out = np.empty_like(frame)
        for c, (gain, bias) in enumerate(params):
            out[:, :, c] = gain * frame[:, :, c] + bias
        corrected.append(np.clip(out, 0.0, 1.0).astype(np.float32))
    return corrected, params
