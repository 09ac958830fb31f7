"""End-to-end reconstruction of target frames and whole videos."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..core import Frame, Homography, apply_homography, fuse_warped, to_tensor, warp_backward
from ..data import DualStreamRecording
from ..errors import ContractViolationError, JobError
from ..models import (AppearanceVariant, ContextExtractor,
                      assemble_appearance_input, compute_initial_flows,
                      create_flow_estimator, enhance_flows, estimate_appearance,
                      estimate_window_flows, upsample_window)
from ..training import (CheckpointBundle, RuntimeHandles, handles_from_dict,
                        load_checkpoint)

logger = logging.getLogger(__name__)


@dataclass
class InferenceSession:
    """Networks and backends loaded once, reused across frames."""

    flow_net: torch.nn.Module
    appearance_net: torch.nn.Module | None
    variant: AppearanceVariant
    estimator: object
    context_extractor: ContextExtractor | None

    @classmethod
    def from_checkpoint(cls, checkpoint: CheckpointBundle | str | Path,
                        handles: RuntimeHandles | None = None) -> "InferenceSession":
        if not isinstance(checkpoint, CheckpointBundle):
            checkpoint = load_checkpoint(checkpoint)
        if handles is None:
            handles = handles_from_dict(checkpoint.handles)
        flow_net = checkpoint.build_flow_net()
        flow_net.eval()
        flow_net.requires_grad_(False)
        appearance_net = checkpoint.build_appearance_net()
        variant = AppearanceVariant(checkpoint.appearance_variant)
        context_extractor = None
        if appearance_net is not None:
            appearance_net.eval()
            appearance_net.requires_grad_(False)
            if variant is AppearanceVariant.CONTEXT:
                context_extractor = ContextExtractor(handles.context)
        return cls(flow_net=flow_net, appearance_net=appearance_net,
                   variant=variant, estimator=create_flow_estimator(handles.flow),
                   context_extractor=context_extractor)


def _frame_tensor(frame) -> torch.Tensor:
    if isinstance(frame, Frame):
        return frame.to_tensor()
    if isinstance(frame, torch.Tensor):
        return frame
    return to_tensor(np.asarray(frame, dtype=np.float32))


def interpolate_frame(left, right, aux_window, t_index: int,
                      session: InferenceSession,
                      pairwise=None) -> Frame:
    """Reconstruct the high-resolution frame at one auxiliary timestamp.

    ``t_index`` indexes into ``aux_window``; the window endpoints correspond
    to the keyframes and are passed through untouched. A flow-stage-only
    session reconstructs with the visibility-weighted blend; a full session
    runs appearance estimation.
    """
    n = len(aux_window)
    if n < 2:
        raise ContractViolationError(f"auxiliary window needs >= 2 frames, got {n}")
    if not 0 <= t_index <= n - 1:
        raise ContractViolationError(
            f"target index {t_index} outside window [0, {n - 1}]")
    left_t = _frame_tensor(left)
    right_t = _frame_tensor(right)
    if left_t.shape != right_t.shape:
        raise ContractViolationError("keyframes must share one resolution")
    if t_index == 0:
        return Frame.from_tensor(left_t, clamp=False)
    if t_index == n - 1:
        return Frame.from_tensor(right_t, clamp=False)

    h, w = left_t.shape[-2:]
    with torch.no_grad():
        upsampled = upsample_window(aux_window, h, w)
        if pairwise is None:
            pairwise = estimate_window_flows(upsampled, session.estimator,
                                             t_index=t_index)
        initial_l, initial_r = compute_initial_flows(
            aux_window, t_index, (h, w), session.estimator, pairwise=pairwise)
        aux_up = upsampled[t_index]
        out = enhance_flows(initial_l, initial_r, left_t, right_t,
                            warp_backward(left_t, initial_l),
                            warp_backward(right_t, initial_r),
                            aux_up, net=session.flow_net)
        warped_l = warp_backward(left_t, out.flow_l)
        warped_r = warp_backward(right_t, out.flow_r)
        t = t_index / (n - 1)
        if session.appearance_net is None:
            prediction = fuse_warped(warped_l, warped_r, out.visibility_l, t)
        else:
            context_l = context_r = context_aux = None
            if session.variant is AppearanceVariant.CONTEXT:
                extractor = session.context_extractor
                context_l = warp_backward(extractor(left_t), out.flow_l)
                context_r = warp_backward(extractor(right_t), out.flow_r)
                context_aux = extractor(aux_up)
            assembled = assemble_appearance_input(
                warped_l, warped_r, out.visibility_l, aux_up,
                context_l, context_r, context_aux, session.variant)
            prediction = estimate_appearance(assembled, session.appearance_net,
                                             clamp=True)
    return Frame.from_tensor(prediction, clamp=True)


def fuse_baseline(left, right, aux_window, t_index: int,
                  session: InferenceSession, pairwise=None) -> Frame:
    """Visibility-weighted blend only (no appearance network), for
    comparisons against the full pipeline."""
    blend_session = InferenceSession(
        flow_net=session.flow_net, appearance_net=None, variant=session.variant,
        estimator=session.estimator, context_extractor=None)
    return interpolate_frame(left, right, aux_window, t_index, blend_session,
                             pairwise=pairwise)


@dataclass(frozen=True)
class ReconstructionJob:
    """A whole-video reconstruction request over aligned streams."""

    main_frames: tuple
    aux_frames: tuple
    main_fps: float
    aux_fps: float
    output_fps: float | None = None      # defaults to the auxiliary rate
    homography: Homography | None = None

    def __post_init__(self) -> None:
        if self.main_fps <= 0 or self.aux_fps <= 0:
            raise JobError("frame rates must be positive")
        ratio = self.aux_fps / self.main_fps
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise JobError(
                f"auxiliary fps must be an integer multiple of main fps "
                f"(got {self.aux_fps}/{self.main_fps})")
        out = self.output_fps if self.output_fps is not None else self.aux_fps
        if out > self.aux_fps + 1e-9:
            raise JobError(
                f"output fps {out} cannot exceed the auxiliary rate {self.aux_fps}")
        step = self.aux_fps / out
        if abs(step - round(step)) > 1e-9:
            raise JobError(
                f"output fps {out} must evenly divide the auxiliary rate")
        if (round(ratio) % round(step)) != 0:
            raise JobError(
                "keyframe timestamps must fall on the output grid "
                f"(ratio {round(ratio)} not divisible by step {round(step)})")

    @property
    def fps_ratio(self) -> int:
        return int(round(self.aux_fps / self.main_fps))

    @property
    def output_step(self) -> int:
        out = self.output_fps if self.output_fps is not None else self.aux_fps
        return int(round(self.aux_fps / out))

    @classmethod
    def from_recording(cls, recording: DualStreamRecording,
                       output_fps: float | None = None) -> "ReconstructionJob":
        return cls(main_frames=tuple(recording.main_frames),
                   aux_frames=tuple(recording.aux_frames),
                   main_fps=recording.main_fps, aux_fps=recording.aux_fps,
                   output_fps=output_fps, homography=recording.homography)


def interpolate_video(job: ReconstructionJob, session: InferenceSession,
                      progress=None) -> list[Frame]:
    """Reconstruct every output-rate frame of a job.

    Keyframes pass through bit-exactly; intermediate frames are synthesized
    per auxiliary timestamp. Output length is
    ``(len(main) - 1) * aux_fps/main_fps / step + 1``.
    """
    main = list(job.main_frames)
    aux = list(job.aux_frames)
    ratio = job.fps_ratio
    step = job.output_step
    if len(main) < 2:
        raise JobError("need at least two keyframes")
    needed_aux = (len(main) - 1) * ratio + 1
    if len(aux) < needed_aux:
        raise JobError(
            f"auxiliary stream too short: {len(aux)} frames, need {needed_aux} "
            "(run temporal alignment first)")

    if job.homography is not None:
        aux = [apply_homography(Frame.from_array(np.asarray(f)), job.homography).data
               for f in aux]

    outputs: list[Frame] = []
    for interval in range(len(main) - 1):
        left = main[interval]
        right = main[interval + 1]
        window = aux[interval * ratio:(interval + 1) * ratio + 1]
        outputs.append(Frame.from_array(np.array(left, copy=True), clamp=False))
        with torch.no_grad():
            upsampled = upsample_window(window, *np.asarray(left).shape[:2])
            pairwise = estimate_window_flows(upsampled, session.estimator)
        for t_index in range(step, ratio, step):
            outputs.append(interpolate_frame(left, right, window, t_index,
                                             session, pairwise=pairwise))
            if progress is not None:
                progress(len(outputs))
    outputs.append(Frame.from_array(np.array(main[-1], copy=True), clamp=False))
    return outputs
