"""Corpus construction and dual-camera ingestion."""

from .clips import CLIP_LENGTH, RESOLUTION_FACTORS, ClipRecord, extract_clips
from .dual_stream import DualStreamRecording, temporal_align
from .store import (DatasetBuildConfig, SampleStore, build_dataset,
                    dataset_hash, load_dataset, load_sample, save_sample)
from .synthesis import (CROP_MAIN, GAMMA_RANGE, MAX_SHIFT, TARGET_COUNT,
                        WINDOW_LENGTH, AugmentationLog, HybridSample,
                        PerturbationLog, augment, color_transfer, perturb,
                        synthesize_hybrid)

__all__ = [
    "AugmentationLog",
    "CLIP_LENGTH",
    "CROP_MAIN",
    "ClipRecord",
    "DatasetBuildConfig",
    "DualStreamRecording",
    "GAMMA_RANGE",
    "HybridSample",
    "MAX_SHIFT",
    "PerturbationLog",
    "RESOLUTION_FACTORS",
    "SampleStore",
    "TARGET_COUNT",
    "WINDOW_LENGTH",
    "augment",
    "build_dataset",
    "color_transfer",
    "dataset_hash",
    "extract_clips",
    "load_dataset",
    "load_sample",
    "perturb",
    "save_sample",
    "synthesize_hybrid",
    "temporal_align",
]
