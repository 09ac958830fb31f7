"""Frozen convolutional feature extractors.

Two pretrained backbones are consumed, never trained:

* a VGG-16 feature stack (through the conv4_3 response) for the perceptual
  loss and the perceptual-distance metric;
* the first convolution of a ResNet-18 classifier (64 channels) for the
  contextual maps fed to appearance estimation.

Weights are loaded from a configured checkpoint path when one is given.
Without a checkpoint the filters are drawn from a fixed seed instead, so the
whole system stays runnable (and deterministic) on machines with no access
to pretrained weights; random projections keep both uses functional, just
weaker than the pretrained filters.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ContractViolationError, InitializationError
from ..utils import seeded_init

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

# VGG-16 convolution plan up to conv4_3: (out_channels, pool_before)
_VGG16_PLAN = (
    (64, False), (64, False),
    (128, True), (128, False),
    (256, True), (256, False), (256, False),
    (512, True), (512, False), (512, False),
)
# indices (into the conv list above) after which LPIPS-style stages are tapped
_STAGE_TAPS = (1, 3, 6, 9)


@dataclass(frozen=True)
class FeatureHandle:
    """Locator for extractor weights; ``weights_path=None`` selects the
    deterministic seeded fallback."""

    weights_path: str | Path | None = None
    seed: int = 2024


def _normalize(images: torch.Tensor) -> torch.Tensor:
    if images.dim() != 4 or images.shape[1] != 3:
        raise ContractViolationError(
            f"expected (B, 3, H, W) images, got {tuple(images.shape)}")
    mean = images.new_tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
    std = images.new_tensor(IMAGENET_STD).view(1, 3, 1, 1)
    return (images - mean) / std


class Vgg16Features(nn.Module):
    """VGG-16 convolutions through conv4_3, frozen.

    ``forward`` returns the conv4_3 response; ``stages`` returns the four
    per-block responses used by the perceptual-distance metric.
    """

    def __init__(self, handle: FeatureHandle = FeatureHandle()):
        super().__init__()
        convs = []
        previous = 3
        for out_channels, _ in _VGG16_PLAN:
            convs.append(nn.Conv2d(previous, out_channels, 3, padding=1))
            previous = out_channels
        self.convs = nn.ModuleList(convs)
        self.source = _load_weights(self, handle, prefix="features")
        self.requires_grad_(False)
        self.eval()

    def _run(self, images: torch.Tensor) -> list[torch.Tensor]:
        if min(images.shape[-2:]) < 8:
            raise ContractViolationError(
                f"feature stack needs inputs of at least 8x8, got "
                f"{tuple(images.shape[-2:])}")
        x = _normalize(images)
        taps = []
        for index, (conv, (_, pool_before)) in enumerate(zip(self.convs, _VGG16_PLAN)):
            if pool_before:
                x = F.max_pool2d(x, 2)
            x = F.relu(conv(x))
            if index in _STAGE_TAPS:
                taps.append(x)
        return taps

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self._run(images)[-1]

    def stages(self, images: torch.Tensor) -> list[torch.Tensor]:
        return self._run(images)


class ContextExtractor(nn.Module):
    """64-channel contextual features from a frame.

    Applies the ResNet-18 first convolution (7x7, stride 2) and upsamples the
    response back to the input resolution so contexts can be warped with
    frame-resolution flows. Parameters are frozen.
    """

    channels = 64

    def __init__(self, handle: FeatureHandle = FeatureHandle()):
        super().__init__()
        self.conv = nn.Conv2d(3, 64, 7, stride=2, padding=3, bias=False)
        self.source = _load_weights(self, handle, prefix="resnet_stem")
        self.requires_grad_(False)
        self.eval()

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        squeeze = images.dim() == 3
        if squeeze:
            images = images.unsqueeze(0)
        h, w = images.shape[-2:]
        features = F.relu(self.conv(_normalize(images)))
        features = F.interpolate(features, size=(h, w), mode="bilinear",
                                 align_corners=False)
        return features.squeeze(0) if squeeze else features


def _load_weights(module: nn.Module, handle: FeatureHandle, prefix: str) -> str:
    """Fill ``module`` from a checkpoint or from the seeded fallback.

    Returns a short provenance tag recorded in evaluation reports.
    """
    if handle.weights_path is None:
        seeded_init(module, handle.seed)
        return f"seeded:{handle.seed}"
    path = Path(handle.weights_path)
    if not path.is_file():
        raise InitializationError(f"feature weights not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise InitializationError(f"cannot read feature weights {path}: {exc}") from exc
    state = payload.get("state_dict", payload) if isinstance(payload, dict) else payload
    if not isinstance(state, dict):
        raise InitializationError(f"unsupported weights format in {path}")
    try:
        _fill_from_state(module, state)
    except (KeyError, RuntimeError, ValueError) as exc:
        raise InitializationError(f"incompatible feature weights {path}: {exc}") from exc
    return f"file:{path.name}"


def _fill_from_state(module: nn.Module, state: dict) -> None:
    if isinstance(module, Vgg16Features):
        # torchvision layout: features.<idx>.weight with ReLU/pool gaps
        conv_keys = sorted(
            (key for key in state if key.endswith(".weight") and state[key].dim() == 4),
            key=lambda key: int(key.split(".")[-2]) if key.split(".")[-2].isdigit() else 0)
        if len(conv_keys) < len(module.convs):
            raise ValueError(f"expected >= {len(module.convs)} conv layers, "
                             f"found {len(conv_keys)}")
        with torch.no_grad():
            for conv, key in zip(module.convs, conv_keys):
                conv.weight.copy_(state[key])
                bias_key = key[:-len("weight")] + "bias"
                if bias_key in state:
                    conv.bias.copy_(state[bias_key])
                else:
                    conv.bias.zero_()
    elif isinstance(module, ContextExtractor):
        key = "conv1.weight" if "conv1.weight" in state else "weight"
        with torch.no_grad():
            module.conv.weight.copy_(state[key])
    else:  # pragma: no cover - internal misuse
        raise ValueError(f"no loading rule for {type(module).__name__}")
