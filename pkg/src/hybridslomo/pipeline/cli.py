"""Command-line interface.

Subcommands: ``reconstruct`` (dual-stream slow motion), ``train`` (one
stage), ``dataset build`` (corpus synthesis), ``eval`` (robustness sweeps).
Image I/O is lossless PNG sequences; video containers are decoded by
invoking ffmpeg externally when available.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from ..core import Homography
from ..data import (DatasetBuildConfig, DualStreamRecording, build_dataset,
                    color_transfer, extract_clips, load_dataset, temporal_align)
from ..errors import (AlignmentError, CheckpointError, ContractViolationError,
                      FlowEstimationError, HomographyEstimationError,
                      InitializationError, JobError, SlomoError,
                      TrainingDivergedError)
from ..models import FeatureHandle, FlowEstimatorHandle
from ..training import (RuntimeHandles, STAGE_APPEARANCE, STAGE_FLOW,
                        STAGE_JOINT, TrainConfig, finetune_joint,
                        load_checkpoint, save_checkpoint,
                        train_appearance_stage, train_flow_stage)
from .inference import InferenceSession, ReconstructionJob, interpolate_video
from .sweeps import SWEEP_GRIDS, run_sweep

logger = logging.getLogger(__name__)

EXIT_CODES = (
    (ContractViolationError, 2),
    (FlowEstimationError, 3),
    (InitializationError, 4),
    (HomographyEstimationError, 5),
    (AlignmentError, 6),
    (CheckpointError, 7),
    (TrainingDivergedError, 8),
    (JobError, 9),
    (SlomoError, 10),
)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def _load_frame(path: Path) -> np.ndarray:
    with Image.open(path) as image:
        return np.asarray(image.convert("RGB"), dtype=np.float32) / 255.0


def _decode_video(path: Path, workdir: Path) -> Path:
    ffmpeg = shutil.which("ffmpeg")
    if ffmpeg is None:
        raise ContractViolationError(
            f"{path} is not a frame directory and no external decoder (ffmpeg) "
            "is available; provide a directory of image frames")
    out = workdir / path.stem
    out.mkdir(parents=True, exist_ok=True)
    result = subprocess.run(
        [ffmpeg, "-y", "-i", str(path), str(out / "%06d.png")],
        capture_output=True, text=True)
    if result.returncode != 0:
        raise ContractViolationError(
            f"external decoder failed on {path}: {result.stderr[-500:]}")
    return out


def _load_stream(source: str, workdir: Path) -> list[np.ndarray]:
    path = Path(source)
    if path.is_file():
        path = _decode_video(path, workdir)
    if not path.is_dir():
        raise ContractViolationError(f"no such frame directory or video: {source}")
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise ContractViolationError(f"no image frames found in {path}")
    return [_load_frame(p) for p in files]


def _load_homography(path: str) -> Homography:
    file = Path(path)
    if file.suffix == ".json":
        payload = json.loads(file.read_text())
        matrix = np.asarray(payload["matrix"] if isinstance(payload, dict)
                            else payload, dtype=np.float64)
    else:
        matrix = np.loadtxt(file)
    return Homography(matrix)


def _write_frames(frames, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for index, frame in enumerate(frames):
        quantized = np.clip(np.rint(frame.data * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(quantized, mode="RGB").save(out_dir / f"{index:06d}.png")


def _cmd_reconstruct(args) -> int:
    with tempfile.TemporaryDirectory() as tmp:
        workdir = Path(tmp)
        main_frames = _load_stream(args.main, workdir)
        aux_frames = _load_stream(args.aux, workdir)
    homography = _load_homography(args.homography) if args.homography else None
    recording = DualStreamRecording(
        main_frames=tuple(main_frames), main_fps=args.main_fps,
        aux_frames=tuple(aux_frames), aux_fps=args.aux_fps,
        homography=homography)
    if args.align_temporal:
        recording = temporal_align(recording)
        logger.info("temporal alignment applied (offset %d auxiliary frames)",
                    recording.offset_applied)
    if args.color_transfer:
        corrected, params = color_transfer(
            list(recording.aux_frames), recording.main_frames[0],
            factor=max(1, round(recording.main_frames[0].shape[0]
                                / recording.aux_frames[0].shape[0])))
        recording = DualStreamRecording(
            main_frames=recording.main_frames, main_fps=recording.main_fps,
            aux_frames=tuple(corrected), aux_fps=recording.aux_fps,
            homography=recording.homography,
            color_params=tuple(tuple(p) for p in params),
            offset_applied=recording.offset_applied)
        logger.info("color transfer gains/biases: %s", params)
    job = ReconstructionJob.from_recording(recording, output_fps=args.output_fps)
    session = InferenceSession.from_checkpoint(args.ckpt)
    frames = interpolate_video(job, session)
    _write_frames(frames, Path(args.out))
    print(f"wrote {len(frames)} frames to {args.out}")
    return 0


def _train_config_from_file(path: str | None, stage: str, out_dir: str | None) -> TrainConfig:
    raw = {}
    if path:
        raw = json.loads(Path(path).read_text())
    raw.setdefault("stage", stage)
    if raw["stage"] != stage:
        raise ContractViolationError(
            f"--stage {stage} conflicts with config stage {raw['stage']!r}")
    if out_dir is not None:
        raw["out_dir"] = out_dir
    if "level_widths" in raw:
        raw["level_widths"] = tuple(raw["level_widths"])
    return TrainConfig(**raw)


def _handles_from_args(args) -> RuntimeHandles:
    flow = FlowEstimatorHandle(backend=args.flow_backend,
                               weights_path=args.flow_weights)
    return RuntimeHandles(flow=flow,
                          features=FeatureHandle(weights_path=args.vgg_weights),
                          context=FeatureHandle(weights_path=args.context_weights,
                                                seed=77))


def _cmd_train(args) -> int:
    cfg = _train_config_from_file(args.config, args.stage, args.out)
    dataset = load_dataset(Path(args.data))
    handles = _handles_from_args(args)
    if args.stage == STAGE_FLOW:
        bundle = train_flow_stage(dataset, cfg, handles)
    elif args.stage == STAGE_APPEARANCE:
        if not args.ckpt:
            raise ContractViolationError("--ckpt (flow checkpoint) is required")
        bundle = train_appearance_stage(dataset, cfg, load_checkpoint(args.ckpt),
                                        handles)
    else:
        if not args.ckpt:
            raise ContractViolationError("--ckpt (two-stage checkpoint) is required")
        bundle = finetune_joint(dataset, cfg, load_checkpoint(args.ckpt), handles)
    out_path = Path(cfg.out_dir or ".") / f"{args.stage}.ckpt"
    save_checkpoint(bundle, out_path)
    print(f"stage {args.stage} finished at epoch {bundle.epoch}; "
          f"checkpoint: {out_path}")
    return 0


def _cmd_dataset_build(args) -> int:
    raw = json.loads(Path(args.config).read_text()) if args.config else {}
    stride = raw.pop("stride", None)
    fps = raw.pop("fps", 240.0)
    if "crop_main" in raw:
        raw["crop_main"] = tuple(raw["crop_main"])
    config = DatasetBuildConfig(**raw)
    src = Path(args.src)
    if not src.is_dir():
        raise ContractViolationError(f"no such source directory: {src}")
    clips = []
    with tempfile.TemporaryDirectory() as tmp:
        workdir = Path(tmp)
        videos = sorted(p for p in src.iterdir()
                        if p.is_dir() or p.suffix.lower() in (".mp4", ".mov", ".avi", ".mkv"))
        if not videos:
            raise ContractViolationError(f"no frame directories or videos under {src}")
        for video in videos:
            frames = _load_stream(str(video), workdir)
            resolution_class = "1080p" if frames[0].shape[0] >= 900 else "720p"
            clips.extend(extract_clips(frames, video.stem, fps, resolution_class,
                                       stride=stride))
    ids = build_dataset(clips, Path(args.out), config)
    print(f"built {len(ids)} samples from {len(clips)} clips into {args.out}")
    return 0


def _cmd_eval(args) -> int:
    dataset = load_dataset(Path(args.dataset))
    grid = tuple(json.loads(args.grid)) if args.grid else None
    report = run_sweep(args.sweep, dataset, args.ckpt, grid=grid, seed=args.seed)
    path = report.to_csv(args.report)
    print(f"sweep {args.sweep}: {len(report.rows)} grid points -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slomo",
        description="High-resolution slow motion from a main + auxiliary video pair")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    rec = sub.add_parser("reconstruct", help="interpolate a dual-stream recording")
    rec.add_argument("--main", required=True, help="main frames directory or video")
    rec.add_argument("--aux", required=True, help="auxiliary frames directory or video")
    rec.add_argument("--ckpt", required=True, help="trained checkpoint")
    rec.add_argument("--out", required=True, help="output frame directory")
    rec.add_argument("--main-fps", type=float, default=30.0)
    rec.add_argument("--aux-fps", type=float, default=240.0)
    rec.add_argument("--output-fps", type=float, default=None)
    rec.add_argument("--homography", default=None,
                     help="3x3 matrix file (.json or text) aligning aux to main")
    rec.add_argument("--align-temporal", action="store_true")
    rec.add_argument("--color-transfer", action="store_true")
    rec.set_defaults(run=_cmd_reconstruct)

    train = sub.add_parser("train", help="run one training stage")
    train.add_argument("--stage", required=True,
                       choices=[STAGE_FLOW, STAGE_APPEARANCE, STAGE_JOINT])
    train.add_argument("--config", default=None, help="TrainConfig JSON file")
    train.add_argument("--data", required=True, help="dataset directory")
    train.add_argument("--out", default=None, help="checkpoint/metrics directory")
    train.add_argument("--ckpt", default=None,
                       help="input checkpoint (appearance/joint stages)")
    train.add_argument("--flow-backend", default="lucas_kanade",
                       choices=["lucas_kanade", "pyramid_network"])
    train.add_argument("--flow-weights", default=None)
    train.add_argument("--vgg-weights", default=None)
    train.add_argument("--context-weights", default=None)
    train.set_defaults(run=_cmd_train)

    dataset = sub.add_parser("dataset", help="dataset utilities")
    dataset_sub = dataset.add_subparsers(dest="dataset_command", required=True)
    build = dataset_sub.add_parser("build", help="synthesize a training corpus")
    build.add_argument("--src", required=True,
                       help="directory of frame directories (or videos)")
    build.add_argument("--out", required=True)
    build.add_argument("--config", default=None,
                       help="JSON with DatasetBuildConfig fields (+stride/fps)")
    build.set_defaults(run=_cmd_dataset_build)

    evaluate = sub.add_parser("eval", help="run a robustness sweep")
    evaluate.add_argument("--sweep", required=True, choices=sorted(SWEEP_GRIDS))
    evaluate.add_argument("--dataset", required=True)
    evaluate.add_argument("--ckpt", required=True)
    evaluate.add_argument("--report", required=True, help="output CSV path")
    evaluate.add_argument("--grid", default=None, help="JSON list overriding the grid")
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.set_defaults(run=_cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.run(args)
    except SlomoError as error:
        for klass, code in EXIT_CODES:
            if isinstance(error, klass):
                print(f"error ({klass.__name__}): {error}", file=sys.stderr)
                return code
        print(f"error: {error}", file=sys.stderr)
        return 10


if __name__ == "__main__":
    sys.exit(main())
