"""On-disk dataset layout.

Each sample is a directory of lossless PNGs plus a JSON manifest::

    <root>/dataset.json
    <root>/samples/<id>/main_l.png, main_r.png,
                         gt_00.png .. gt_06.png,
                         aux_00.png .. aux_08.png,
                         manifest.json

Everything written is deterministic for a fixed seed, so two builds of the
same corpus hash identically.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import ContractViolationError
from .clips import ClipRecord
from .synthesis import (CROP_MAIN, AugmentationLog, HybridSample,
                        PerturbationLog, augment, perturb, synthesize_hybrid)

MANIFEST_NAME = "manifest.json"
INDEX_NAME = "dataset.json"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class DatasetBuildConfig:
    seed: int = 0
    samples_per_clip: int = 1
    apply_augment: bool = True
    apply_perturb: bool = True
    crop_main: tuple[int, int] = CROP_MAIN


def _write_png(path: Path, frame: np.ndarray) -> None:
    quantized = np.clip(np.rint(frame * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(quantized, mode="RGB").save(path, format="PNG")


def _read_png(path: Path) -> np.ndarray:
    with Image.open(path) as image:
        return np.asarray(image.convert("RGB"), dtype=np.float32) / 255.0


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def save_sample(sample: HybridSample, directory: Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_png(directory / "main_l.png", sample.left)
    _write_png(directory / "main_r.png", sample.right)
    for index, target in enumerate(sample.targets):
        _write_png(directory / f"gt_{index:02d}.png", target)
    for index, aux in enumerate(sample.aux):
        _write_png(directory / f"aux_{index:02d}.png", aux)
    manifest = {
        "format_version": FORMAT_VERSION,
        "sample_id": sample.sample_id,
        "factor": sample.factor,
        "window_offset": sample.window_offset,
        "t_indices": list(sample.t_indices),
        "perturbation": asdict(sample.perturbation),
        "augmentation": asdict(sample.augmentation) if sample.augmentation else None,
        "main_resolution": list(sample.main_resolution()),
    }
    _dump_json(directory / MANIFEST_NAME, manifest)


def load_sample(directory: Path) -> HybridSample:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ContractViolationError(f"not a sample directory: {directory}")
    manifest = json.loads(manifest_path.read_text())
    perturbation = PerturbationLog(
        gamma=manifest["perturbation"]["gamma"],
        shift=tuple(manifest["perturbation"]["shift"]))
    augmentation = None
    if manifest.get("augmentation"):
        raw = dict(manifest["augmentation"])
        raw["crop_origin"] = tuple(raw["crop_origin"])
        augmentation = AugmentationLog(**raw)
    return HybridSample(
        sample_id=manifest["sample_id"],
        left=_read_png(directory / "main_l.png"),
        right=_read_png(directory / "main_r.png"),
        targets=tuple(_read_png(directory / f"gt_{i:02d}.png") for i in range(7)),
        aux=tuple(_read_png(directory / f"aux_{i:02d}.png") for i in range(9)),
        factor=manifest["factor"],
        window_offset=manifest["window_offset"],
        perturbation=perturbation,
        augmentation=augmentation,
    )


def build_dataset(clips: list[ClipRecord], root: Path,
                  config: DatasetBuildConfig = DatasetBuildConfig()) -> list[str]:
    """Synthesize, augment, perturb, and persist one or more samples per clip.

    Each clip derives its RNG stream from (seed, clip index), so builds are
    reproducible and clips can be processed in parallel without changing the
    output.
    """
    root = Path(root)
    samples_dir = root / "samples"
    samples_dir.mkdir(parents=True, exist_ok=True)
    sample_ids = []
    for clip_index, clip in enumerate(clips):
        rng = np.random.default_rng(
            np.random.SeedSequence(config.seed, spawn_key=(clip_index,)))
        for repeat in range(config.samples_per_clip):
            sample = synthesize_hybrid(clip, rng)
            if config.apply_augment:
                sample = augment(sample, rng, crop_main=config.crop_main)
            if config.apply_perturb:
                sample = perturb(sample, rng)
            sample_id = sample.sample_id if config.samples_per_clip == 1 \
                else f"{sample.sample_id}_r{repeat}"
            save_sample(sample, samples_dir / sample_id)
            sample_ids.append(sample_id)
    index = {
        "format_version": FORMAT_VERSION,
        "seed": config.seed,
        "samples_per_clip": config.samples_per_clip,
        "apply_augment": config.apply_augment,
        "apply_perturb": config.apply_perturb,
        "crop_main": list(config.crop_main),
        "samples": sample_ids,
    }
    _dump_json(root / INDEX_NAME, index)
    return sample_ids


class SampleStore:
    """Lazy reader over a dataset directory."""

    def __init__(self, root: Path):
        self.root = Path(root)
        index_path = self.root / INDEX_NAME
        if not index_path.is_file():
            raise ContractViolationError(f"no dataset index at {index_path}")
        self.index = json.loads(index_path.read_text())
        self.sample_ids: list[str] = list(self.index["samples"])

    def __len__(self) -> int:
        return len(self.sample_ids)

    def __getitem__(self, position: int) -> HybridSample:
        return load_sample(self.root / "samples" / self.sample_ids[position])


def load_dataset(root: Path) -> SampleStore:
    return SampleStore(root)


def dataset_hash(root: Path) -> str:
    """SHA-256 over relative paths and raw bytes of every file in the tree."""
    root = Path(root)
    digest = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        digest.update(str(path.relative_to(root)).encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()
