"""End-to-end inference, evaluation metrics, robustness harness, CLI."""

from .inference import (InferenceSession, ReconstructionJob, fuse_baseline,
                        interpolate_frame, interpolate_video)
from .metrics import (PSNR_CAP_DB, PerceptualDistance, metric_lpips,
                      metric_psnr, metric_ssim)
from .sweeps import (ABLATION_ORDER, SWEEP_GRIDS, EvalReport,
                     ablate_appearance_inputs, gaussian_spatiotemporal_denoiser,
                     run_sweep)

__all__ = [
    "ABLATION_ORDER",
    "EvalReport",
    "InferenceSession",
    "PSNR_CAP_DB",
    "PerceptualDistance",
    "ReconstructionJob",
    "SWEEP_GRIDS",
    "ablate_appearance_inputs",
    "fuse_baseline",
    "gaussian_spatiotemporal_denoiser",
    "interpolate_frame",
    "interpolate_video",
    "metric_lpips",
    "metric_psnr",
    "metric_ssim",
    "run_sweep",
]
