"""Robustness sweeps and component ablations.

Each sweep degrades the auxiliary stream (or the keyframe spacing) along one
axis, reconstructs the middle target of every sample, and reports metrics
per grid point. Zero-perturbation points leave the inputs untouched, so they
reproduce the baseline evaluation exactly.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from skimage.color import hsv2rgb, rgb2hsv

from ..core import Frame
from ..data import HybridSample
from ..errors import ContractViolationError
from ..training import CheckpointBundle
from .inference import InferenceSession, interpolate_frame
from .metrics import PerceptualDistance, metric_psnr, metric_ssim

SWEEP_GRIDS: dict[str, tuple] = {
    "gamma": (0.65, 0.85, 0.95, 1.00, 1.25, 1.75),
    "hue": (0.00, 0.02, 0.05, 0.15, 0.30, 0.50),
    "noise": (0, 5, 15, 35, 75),            # sigma in 8-bit counts
    "denoised_noise": (0, 5, 15, 35, 75),
    "desync": (0, 1, 2, 3),                 # auxiliary frames
    "aux_resolution": (1.0, 0.5, 1 / 3),    # fraction of stored aux size
    "main_fps": (8, 6, 4, 2),               # keyframe spacing in aux frames
}

ABLATION_ORDER = ("base", "visibility", "context")


@dataclass
class EvalReport:
    """Per-grid-point metric rows plus provenance; aggregates are the means
    of the per-frame values."""

    kind: str
    header: dict = field(default_factory=dict)
    rows: list[dict] = field(default_factory=list)
    per_frame: list[dict] = field(default_factory=list)

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lpips_variant = self.header.get("lpips_variant", "unknown")
        columns = ["axis", "value", "status", "n_frames", "psnr", "ssim",
                   f"lpips[{lpips_variant}]", "runtime_per_frame_s"]
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(columns)
            for row in self.rows:
                writer.writerow([
                    self.kind, row["value"], row.get("status", "ok"),
                    row.get("n_frames", 0), row.get("psnr", ""),
                    row.get("ssim", ""), row.get("lpips", ""),
                    row.get("runtime_per_frame_s", ""),
                ])
        return path


def gaussian_spatiotemporal_denoiser(frames: list[np.ndarray]) -> list[np.ndarray]:
    """Separable Gaussian smoothing over (time, y, x); the default stand-in
    for an external video denoiser."""
    stack = np.stack(frames).astype(np.float32)
    smoothed = ndimage.gaussian_filter(stack, sigma=(0.8, 0.8, 0.8, 0.0))
    return [np.clip(f, 0.0, 1.0) for f in smoothed]


def _rotate_hue(frame: np.ndarray, fraction: float) -> np.ndarray:
    hsv = rgb2hsv(np.clip(frame, 0.0, 1.0))
    hsv[:, :, 0] = (hsv[:, :, 0] + fraction) % 1.0
    return hsv2rgb(hsv).astype(np.float32)


def _degrade_aux(sample: HybridSample, kind: str, value, rng: np.random.Generator,
                 denoiser) -> list[np.ndarray]:
    aux = [np.asarray(f, dtype=np.float32) for f in sample.aux]
    if kind == "gamma":
        if value == 1.0:
            return aux
        return [np.clip(f, 0.0, 1.0) ** value for f in aux]
    if kind == "hue":
        if value == 0.0:
            return aux
        return [_rotate_hue(f, value) for f in aux]
    if kind in ("noise", "denoised_noise"):
        if value == 0:
            return aux
        sigma = value / 255.0
        noisy = [np.clip(f + rng.normal(0.0, sigma, size=f.shape), 0.0, 1.0)
                 .astype(np.float32) for f in aux]
        return denoiser(noisy) if kind == "denoised_noise" else noisy
    if kind == "desync":
        if value == 0:
            return aux
        last = len(aux) - 1
        return [aux[min(i + value, last)] for i in range(len(aux))]
    if kind == "aux_resolution":
        if value == 1.0:
            return aux
        import torch

        from ..core import resample, to_array, to_tensor
        h, w = aux[0].shape[:2]
        th, tw = max(2, round(h * value)), max(2, round(w * value))
        return [to_array(resample(to_tensor(f), th, tw)) for f in aux]
    raise ContractViolationError(f"unknown sweep axis {kind!r}")


def _evaluate_point(sample: HybridSample, kind: str, value, session,
                    distance: PerceptualDistance, rng: np.random.Generator,
                    denoiser) -> dict:
    frames = [sample.left, *sample.targets, sample.right]
    if kind == "main_fps":
        spacing = int(value)
        if spacing % 2 or spacing < 2 or spacing > 8:
            raise ContractViolationError(
                f"keyframe spacing must be even in [2, 8], got {spacing}")
        left_idx = 4 - spacing // 2
        right_idx = 4 + spacing // 2
        left, right = frames[left_idx], frames[right_idx]
        window = list(sample.aux[left_idx:right_idx + 1])
        t_index = 4 - left_idx
    else:
        left, right = sample.left, sample.right
        window = _degrade_aux(sample, kind, value, rng, denoiser)
        t_index = 4
    gt = frames[4]
    start = time.perf_counter()
    prediction = interpolate_frame(left, right, window, t_index, session)
    runtime = time.perf_counter() - start
    return {
        "sample_id": sample.sample_id,
        "value": value,
        "psnr": metric_psnr(prediction, gt),
        "ssim": metric_ssim(prediction, gt),
        "lpips": distance(prediction.data, gt),
        "runtime_s": runtime,
    }


def run_sweep(kind: str, dataset, checkpoint, grid=None, seed: int = 0,
              distance: PerceptualDistance | None = None,
              denoiser=gaussian_spatiotemporal_denoiser) -> EvalReport:
    """Evaluate reconstruction quality along one degradation axis."""
    if kind not in SWEEP_GRIDS:
        raise ContractViolationError(
            f"sweep kind must be one of {sorted(SWEEP_GRIDS)}, got {kind!r}")
    if len(dataset) == 0:
        raise ContractViolationError("evaluation dataset is empty")
    grid = tuple(grid) if grid is not None else SWEEP_GRIDS[kind]
    session = checkpoint if isinstance(checkpoint, InferenceSession) \
        else InferenceSession.from_checkpoint(checkpoint)
    distance = distance or PerceptualDistance()

    report = EvalReport(kind=kind, header={
        "sweep": kind, "seed": seed, "grid": list(grid),
        "lpips_variant": distance.variant,
        "samples": len(dataset),
    })
    for point_index, value in enumerate(grid):
        rows = []
        for sample_index in range(len(dataset)):
            sample = dataset[sample_index]
            rng = np.random.default_rng(
                np.random.SeedSequence(seed, spawn_key=(point_index, sample_index)))
            rows.append(_evaluate_point(sample, kind, value, session, distance,
                                        rng, denoiser))
        report.per_frame.extend(rows)
        report.rows.append({
            "value": value,
            "status": "ok",
            "n_frames": len(rows),
            "psnr": float(np.mean([r["psnr"] for r in rows])),
            "ssim": float(np.mean([r["ssim"] for r in rows])),
            "lpips": float(np.mean([r["lpips"] for r in rows])),
            "runtime_per_frame_s": float(np.mean([r["runtime_s"] for r in rows])),
        })
    return report


def ablate_appearance_inputs(dataset, checkpoints: dict,
                             distance: PerceptualDistance | None = None,
                             seed: int = 0) -> EvalReport:
    """Compare appearance-input variants (base, +visibility, +context).

    ``checkpoints`` maps variant names to checkpoint bundles/paths; a missing
    variant yields a row flagged ``missing`` instead of failing the report.
    """
    if len(dataset) == 0:
        raise ContractViolationError("evaluation dataset is empty")
    distance = distance or PerceptualDistance()
    report = EvalReport(kind="ablation", header={
        "sweep": "ablation", "lpips_variant": distance.variant,
        "samples": len(dataset), "seed": seed,
    })
    for variant in ABLATION_ORDER:
        checkpoint = checkpoints.get(variant)
        if checkpoint is None:
            report.rows.append({"value": variant, "status": "missing",
                                "n_frames": 0})
            continue
        session = checkpoint if isinstance(checkpoint, InferenceSession) \
            else InferenceSession.from_checkpoint(checkpoint)
        rows = []
        for sample_index in range(len(dataset)):
            sample = dataset[sample_index]
            gt = sample.targets[3]
            start = time.perf_counter()
            prediction = interpolate_frame(sample.left, sample.right,
                                           list(sample.aux), 4, session)
            runtime = time.perf_counter() - start
            rows.append({
                "sample_id": sample.sample_id,
                "value": variant,
                "psnr": metric_psnr(prediction, gt),
                "ssim": metric_ssim(prediction, gt),
                "lpips": distance(prediction.data, gt),
                "runtime_s": runtime,
            })
        report.per_frame.extend(rows)
        report.rows.append({
            "value": variant,
            "status": "ok",
            "n_frames": len(rows),
            "psnr": float(np.mean([r["psnr"] for r in rows])),
            "ssim": float(np.mean([r["ssim"] for r in rows])),
            "lpips": float(np.mean([r["lpips"] for r in rows])),
            "runtime_per_frame_s": float(np.mean([r["runtime_s"] for r in rows])),
        })
    return report
