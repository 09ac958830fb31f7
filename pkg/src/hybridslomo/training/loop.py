"""Three-stage optimization.

Stage 1 trains the flow-enhancement network alone; its prediction is the
visibility-weighted blend of the warped keyframes. Stage 2 freezes the flow
network and trains appearance estimation. Stage 3 fine-tunes both jointly on
the perceptual term only.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from ..core import fuse_warped, warp_backward
from ..errors import ContractViolationError, TrainingDivergedError
from ..losses import align_loss, appearance_loss, loss_perceptual
from ..models import (APPEARANCE_INPUT_CHANNELS, AppearanceVariant,
                      ContextExtractor, Vgg16Features, appearance_config,
                      assemble_appearance_input, build_unet,
                      create_flow_estimator, enhance_flows,
                      flow_enhancer_config)
from .checkpoint import CheckpointBundle, save_checkpoint
from .config import (RuntimeHandles, STAGE_APPEARANCE, STAGE_FLOW, STAGE_JOINT,
                     TrainConfig)
from .precompute import TrainingCache

logger = logging.getLogger(__name__)

_CSV_FIELDS = ("epoch", "lr", "weighted_total", "reconstruction", "perceptual",
               "warping", "total_variation")


def _clone_state(module: torch.nn.Module) -> dict:
    return {name: value.detach().clone()
            for name, value in module.state_dict().items()}


def _sample_id(dataset, index: int) -> str:
    if hasattr(dataset, "sample_ids"):
        return dataset.sample_ids[index]
    return dataset[index].sample_id


def _set_learning_rate(optimizer: torch.optim.Optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr


def _append_metrics(out_dir: Path | None, row: dict) -> None:
    if out_dir is None:
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "metrics.csv"
    new_file = not path.exists()
    with path.open("a", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=_CSV_FIELDS)
        if new_file:
            writer.writeheader()
        writer.writerow({key: row.get(key, 0.0) for key in _CSV_FIELDS})


def _guard_finite(total: torch.Tensor, stage: str, step: int,
                  bundle_factory, out_dir: Path | None) -> None:
    if torch.isfinite(total.detach().sum()):
        return
    if out_dir is not None:
        path = save_checkpoint(bundle_factory(), out_dir / f"diverged_{stage}.ckpt")
        detail = f"; diagnostic checkpoint at {path}"
    else:
        detail = " (no out_dir configured, diagnostic checkpoint skipped)"
    raise TrainingDivergedError(
        f"non-finite loss at {stage} step {step}{detail}")


def _clip_gradients(cfg: TrainConfig, parameters) -> None:
    if cfg.grad_clip is not None:
        torch.nn.utils.clip_grad_norm_(list(parameters), cfg.grad_clip)


def _should_stop_early(cfg: TrainConfig, epoch_means: list[float]) -> bool:
    window = cfg.early_stop_window
    if not cfg.early_stop or len(epoch_means) <= window:
        return False
    reference = epoch_means[-window - 1]
    if reference <= 0 or not math.isfinite(reference):
        return False
    return (reference - epoch_means[-1]) / reference < cfg.early_stop_rel_improvement


def _epoch_batches(rng: np.random.Generator, count: int, batch_size: int):
    order = rng.permutation(count)
    for start in range(0, count, batch_size):
        yield [int(i) for i in order[start:start + batch_size]]


def _pick_items(dataset, indices, rng, cache: TrainingCache):
    items = []
    for index in indices:
        sample = dataset[index]
        t_index = int(rng.choice(sample.t_indices))
        items.append((sample, t_index, cache.alignment(sample, t_index)))
    resolutions = {item[2].left.shape for item in items}
    if len(resolutions) != 1:
        raise ContractViolationError(
            f"batch mixes main resolutions: {sorted(resolutions)}")
    return items


def _stack(items, attribute: str) -> torch.Tensor:
    return torch.stack([getattr(item[2], attribute) for item in items])


def _time_weights(items) -> torch.Tensor:
    return torch.tensor([item[2].t for item in items],
                        dtype=torch.float32).view(-1, 1, 1, 1)


def train_flow_stage(dataset, cfg: TrainConfig | None = None,
                     handles: RuntimeHandles | None = None) -> CheckpointBundle:
    """Stage 1: minimize the alignment composite over the fused prediction."""
    cfg = cfg or TrainConfig(stage=STAGE_FLOW)
    handles = handles or RuntimeHandles()
    if cfg.stage != STAGE_FLOW:
        raise ContractViolationError(f"config stage {cfg.stage!r} is not {STAGE_FLOW!r}")
    if len(dataset) == 0:
        raise ContractViolationError("training dataset is empty")
    out_dir = Path(cfg.out_dir) if cfg.out_dir else None

    torch.manual_seed(cfg.seed)
    flow_net = build_unet(flow_enhancer_config(cfg.level_widths))
    features = Vgg16Features(handles.features)
    cache = TrainingCache(create_flow_estimator(handles.flow), cfg.cache_size)
    optimizer = torch.optim.Adam(flow_net.parameters(), lr=cfg.resolved_learning_rate)
    rng = np.random.default_rng(cfg.seed)
    history: list[dict] = []

    def bundle(epoch: int) -> CheckpointBundle:
        return CheckpointBundle(
            stage=STAGE_FLOW, epoch=epoch, flow_state=_clone_state(flow_net),
            level_widths=cfg.level_widths,
            optimizer_state=None, train_config=_config_dict(cfg),
            handles=_handles_dict(handles), history=list(history))

    step = 0
    epoch_means: list[float] = []
    final_epoch = 0
    for epoch in range(cfg.resolved_epochs):
        final_epoch = epoch + 1
        lr = cfg.learning_rate_at(epoch)
        _set_learning_rate(optimizer, lr)
        epoch_losses: list[dict] = []
        for indices in _epoch_batches(rng, len(dataset), cfg.batch_size):
            items = _pick_items(dataset, indices, rng, cache)
            out = enhance_flows(_stack(items, "initial_l"), _stack(items, "initial_r"),
                                _stack(items, "left"), _stack(items, "right"),
                                _stack(items, "warped_l0"), _stack(items, "warped_r0"),
                                _stack(items, "aux_up"), net=flow_net)
            _guard_finite(out.flow_l + out.flow_r, STAGE_FLOW, step,
                          lambda: bundle(epoch), out_dir)
            warped_l = warp_backward(_stack(items, "left"), out.flow_l)
            warped_r = warp_backward(_stack(items, "right"), out.flow_r)
            fused = fuse_warped(warped_l, warped_r, out.visibility_l,
                                _time_weights(items))
            total, breakdown = align_loss(fused, _stack(items, "gt"),
                                          _stack(items, "left"), _stack(items, "right"),
                                          out.flow_l, out.flow_r, features)
            _guard_finite(total, STAGE_FLOW, step, lambda: bundle(epoch), out_dir)
            optimizer.zero_grad()
            total.backward()
            _clip_gradients(cfg, flow_net.parameters())
            optimizer.step()
            record = {"step": step, "epoch": epoch, "lr": lr,
                      **breakdown.components(),
                      "weighted_total": breakdown.weighted_total}
            history.append(record)
            epoch_losses.append(record)
            step += 1
        mean_total = float(np.mean([r["weighted_total"] for r in epoch_losses]))
        epoch_means.append(mean_total)
        _append_metrics(out_dir, {
            "epoch": epoch, "lr": lr, "weighted_total": mean_total,
            **{key: float(np.mean([r[key] for r in epoch_losses]))
               for key in ("reconstruction", "perceptual", "warping",
                           "total_variation")}})
        if out_dir and cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(bundle(epoch + 1), out_dir / f"flow_epoch{epoch + 1:04d}.ckpt")
        if _should_stop_early(cfg, epoch_means):
            logger.info("flow stage early stop at epoch %d", epoch + 1)
            break

    result = bundle(final_epoch)
    result.optimizer_state = optimizer.state_dict()
    if out_dir:
        save_checkpoint(result, out_dir / "flow.ckpt")
    return result


def _stack_inputs(align_items, attribute: str) -> torch.Tensor:
    return torch.stack([getattr(item, attribute) for item in align_items])


def _appearance_forward(flow_net, align_items, contexts,
                        variant: AppearanceVariant, train_flow: bool,
                        flow_guard=None):
    """Enhancement -> warps -> (contexts) -> assembled appearance input.

    ``contexts`` is a list of (ctx_left, ctx_right, ctx_aux) triples or None
    for the context-free variants.
    """
    grad = torch.enable_grad() if train_flow else torch.no_grad()
    with grad:
        left = _stack_inputs(align_items, "left")
        right = _stack_inputs(align_items, "right")
        aux_up = _stack_inputs(align_items, "aux_up")
        out = enhance_flows(_stack_inputs(align_items, "initial_l"),
                            _stack_inputs(align_items, "initial_r"),
                            left, right,
                            _stack_inputs(align_items, "warped_l0"),
                            _stack_inputs(align_items, "warped_r0"),
                            aux_up, net=flow_net)
        if flow_guard is not None:
            flow_guard(out.flow_l + out.flow_r)
        warped_l = warp_backward(left, out.flow_l)
        warped_r = warp_backward(right, out.flow_r)
        context_l = context_r = context_aux = None
        if variant is AppearanceVariant.CONTEXT:
            context_l = warp_backward(torch.stack([c[0] for c in contexts]), out.flow_l)
            context_r = warp_backward(torch.stack([c[1] for c in contexts]), out.flow_r)
            context_aux = torch.stack([c[2] for c in contexts])
        return assemble_appearance_input(warped_l, warped_r, out.visibility_l,
                                         aux_up, context_l, context_r,
                                         context_aux, variant)


def train_appearance_stage(dataset, cfg: TrainConfig | None = None,
                           flow_checkpoint: CheckpointBundle | None = None,
                           handles: RuntimeHandles | None = None) -> CheckpointBundle:
    """Stage 2: train appearance estimation with the flow network frozen."""
    cfg = cfg or TrainConfig(stage=STAGE_APPEARANCE)
    handles = handles or RuntimeHandles()
    if cfg.stage != STAGE_APPEARANCE:
        raise ContractViolationError(
            f"config stage {cfg.stage!r} is not {STAGE_APPEARANCE!r}")
    if flow_checkpoint is None:
        raise ContractViolationError("appearance stage needs a trained flow checkpoint")
    if len(dataset) == 0:
        raise ContractViolationError("training dataset is empty")
    out_dir = Path(cfg.out_dir) if cfg.out_dir else None
    variant = AppearanceVariant(cfg.appearance_variant)

    torch.manual_seed(cfg.seed)
    appearance_net = build_unet(appearance_config(
        APPEARANCE_INPUT_CHANNELS[variant], cfg.level_widths))
    flow_net = flow_checkpoint.build_flow_net()
    flow_net.eval()
    flow_net.requires_grad_(False)
    features = Vgg16Features(handles.features)
    context_extractor = ContextExtractor(handles.context) \
        if variant is AppearanceVariant.CONTEXT else None
    cache = TrainingCache(create_flow_estimator(handles.flow), cfg.cache_size)
    assembled_cache: dict = {}

    optimizer = torch.optim.Adam(appearance_net.parameters(),
                                 lr=cfg.resolved_learning_rate)
    rng = np.random.default_rng(cfg.seed)
    history: list[dict] = []

    def bundle(epoch: int) -> CheckpointBundle:
        return CheckpointBundle(
            stage=STAGE_APPEARANCE, epoch=epoch,
            flow_state=_clone_state(flow_net), level_widths=cfg.level_widths,
            appearance_state=_clone_state(appearance_net),
            appearance_variant=variant.value, optimizer_state=None,
            train_config=_config_dict(cfg), handles=_handles_dict(handles),
            history=list(history))

    def assembled_for(sample, t_index, inputs) -> torch.Tensor:
        key = (sample.sample_id, t_index)
        if key not in assembled_cache:
            contexts = [cache.contexts(sample, t_index, context_extractor)] \
                if context_extractor else None
            assembled_cache[key] = _appearance_forward(
                flow_net, [inputs], contexts, variant, train_flow=False)[0]
            if len(assembled_cache) > cfg.cache_size:
                assembled_cache.pop(next(iter(assembled_cache)))
        return assembled_cache[key]

    step = 0
    epoch_means: list[float] = []
    final_epoch = 0
    for epoch in range(cfg.resolved_epochs):
        final_epoch = epoch + 1
        lr = cfg.learning_rate_at(epoch)
        _set_learning_rate(optimizer, lr)
        epoch_losses: list[dict] = []
        for indices in _epoch_batches(rng, len(dataset), cfg.batch_size):
            items = _pick_items(dataset, indices, rng, cache)
            assembled = torch.stack([assembled_for(sample, t_index, inputs)
                                     for sample, t_index, inputs in items])
            prediction = appearance_net(assembled)
            total, breakdown = appearance_loss(prediction, _stack(items, "gt"),
                                               features)
            _guard_finite(total, STAGE_APPEARANCE, step, lambda: bundle(epoch), out_dir)
            optimizer.zero_grad()
            total.backward()
            _clip_gradients(cfg, appearance_net.parameters())
            optimizer.step()
            record = {"step": step, "epoch": epoch, "lr": lr,
                      **breakdown.components(),
                      "weighted_total": breakdown.weighted_total}
            history.append(record)
            epoch_losses.append(record)
            step += 1
        mean_total = float(np.mean([r["weighted_total"] for r in epoch_losses]))
        epoch_means.append(mean_total)
        _append_metrics(out_dir, {
            "epoch": epoch, "lr": lr, "weighted_total": mean_total,
            "reconstruction": float(np.mean([r["reconstruction"] for r in epoch_losses])),
            "perceptual": float(np.mean([r["perceptual"] for r in epoch_losses]))})
        if out_dir and cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(bundle(epoch + 1),
                            out_dir / f"appearance_epoch{epoch + 1:04d}.ckpt")
        if _should_stop_early(cfg, epoch_means):
            logger.info("appearance stage early stop at epoch %d", epoch + 1)
            break

    result = bundle(final_epoch)
    result.optimizer_state = optimizer.state_dict()
    if out_dir:
        save_checkpoint(result, out_dir / "appearance.ckpt")
    return result


def finetune_joint(dataset, cfg: TrainConfig | None = None,
                   checkpoint: CheckpointBundle | None = None,
                   handles: RuntimeHandles | None = None) -> CheckpointBundle:
    """Stage 3: fine-tune both networks on the perceptual term alone."""
    cfg = cfg or TrainConfig(stage=STAGE_JOINT)
    handles = handles or RuntimeHandles()
    if cfg.stage != STAGE_JOINT:
        raise ContractViolationError(f"config stage {cfg.stage!r} is not {STAGE_JOINT!r}")
    if checkpoint is None or checkpoint.appearance_state is None:
        raise ContractViolationError(
            "joint fine-tuning needs a checkpoint holding both trained networks")
    if len(dataset) == 0:
        raise ContractViolationError("training dataset is empty")
    out_dir = Path(cfg.out_dir) if cfg.out_dir else None
    variant = AppearanceVariant(checkpoint.appearance_variant)

    torch.manual_seed(cfg.seed)
    flow_net = checkpoint.build_flow_net()
    appearance_net = checkpoint.build_appearance_net()
    flow_net.train()
    appearance_net.train()
    features = Vgg16Features(handles.features)
    context_extractor = ContextExtractor(handles.context) \
        if variant is AppearanceVariant.CONTEXT else None
    cache = TrainingCache(create_flow_estimator(handles.flow), cfg.cache_size)
    optimizer = torch.optim.Adam(
        list(flow_net.parameters()) + list(appearance_net.parameters()),
        lr=cfg.resolved_learning_rate)
    rng = np.random.default_rng(cfg.seed)
    history: list[dict] = []

    def bundle(epoch: int) -> CheckpointBundle:
        return CheckpointBundle(
            stage=STAGE_JOINT, epoch=epoch, flow_state=_clone_state(flow_net),
            level_widths=tuple(checkpoint.level_widths),
            appearance_state=_clone_state(appearance_net),
            appearance_variant=variant.value, optimizer_state=None,
            train_config=_config_dict(cfg), handles=_handles_dict(handles),
            history=list(history))

    step = 0
    epoch_means: list[float] = []
    final_epoch = 0
    for epoch in range(cfg.resolved_epochs):
        final_epoch = epoch + 1
        lr = cfg.learning_rate_at(epoch)
        _set_learning_rate(optimizer, lr)
        epoch_losses: list[float] = []
        for indices in _epoch_batches(rng, len(dataset), cfg.batch_size):
            items = _pick_items(dataset, indices, rng, cache)
            align_items = [inputs for _, _, inputs in items]
            contexts = [cache.contexts(sample, t_index, context_extractor)
                        for sample, t_index, _ in items] \
                if context_extractor else None
            guard = lambda flows: _guard_finite(flows, STAGE_JOINT, step,
                                                lambda: bundle(epoch), out_dir)
            assembled = _appearance_forward(flow_net, align_items, contexts,
                                            variant, train_flow=True,
                                            flow_guard=guard)
            prediction = appearance_net(assembled)
            total = loss_perceptual(prediction, _stack(items, "gt"), features)
            _guard_finite(total, STAGE_JOINT, step, lambda: bundle(epoch), out_dir)
            optimizer.zero_grad()
            total.backward()
            _clip_gradients(cfg, list(flow_net.parameters())
                            + list(appearance_net.parameters()))
            optimizer.step()
            value = float(total.detach())
            history.append({"step": step, "epoch": epoch, "lr": lr,
                            "perceptual": value, "weighted_total": value})
            epoch_losses.append(value)
            step += 1
        mean_total = float(np.mean(epoch_losses))
        epoch_means.append(mean_total)
        _append_metrics(out_dir, {"epoch": epoch, "lr": lr,
                                  "weighted_total": mean_total,
                                  "perceptual": mean_total})
        if _should_stop_early(cfg, epoch_means):
            logger.info("joint stage early stop at epoch %d", epoch + 1)
            break

    result = bundle(final_epoch)
    result.optimizer_state = optimizer.state_dict()
    if out_dir:
        save_checkpoint(result, out_dir / "joint.ckpt")
    return result


def _config_dict(cfg: TrainConfig) -> dict:
    raw = asdict(cfg)
    raw["out_dir"] = str(raw["out_dir"]) if raw["out_dir"] else None
    raw["level_widths"] = list(raw["level_widths"])
    raw["appearance_variant"] = AppearanceVariant(raw["appearance_variant"]).value
    return raw


def _handles_dict(handles: RuntimeHandles) -> dict:
    return {
        "flow": {"backend": handles.flow.backend,
                 "weights_path": str(handles.flow.weights_path)
                 if handles.flow.weights_path else None,
                 "levels": handles.flow.levels},
        "features": {"weights_path": str(handles.features.weights_path)
                     if handles.features.weights_path else None,
                     "seed": handles.features.seed},
        "context": {"weights_path": str(handles.context.weights_path)
                    if handles.context.weights_path else None,
                    "seed": handles.context.seed},
    }


def handles_from_dict(raw: dict | None) -> RuntimeHandles:
    """Rebuild runtime handles from a checkpoint's stored form."""
    from ..models import FeatureHandle, FlowEstimatorHandle
    if not raw:
        return RuntimeHandles()
    flow = raw.get("flow", {})
    features = raw.get("features", {})
    context = raw.get("context", {})
    return RuntimeHandles(
        flow=FlowEstimatorHandle(backend=flow.get("backend", "lucas_kanade"),
                                 weights_path=flow.get("weights_path"),
                                 levels=flow.get("levels")),
        features=FeatureHandle(weights_path=features.get("weights_path"),
                               seed=features.get("seed", 2024)),
        context=FeatureHandle(weights_path=context.get("weights_path"),
                              seed=context.get("seed", 77)),
    )
