"""Encoder-decoder network shared by flow enhancement and appearance estimation.

The two trainable networks are the same construction with different input
and output channel counts; flow enhancement additionally passes its
visibility channel through a sigmoid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ContractViolationError

FLOW_ENHANCER_IN_CHANNELS = 19
FLOW_ENHANCER_OUT_CHANNELS = 5
APPEARANCE_OUT_CHANNELS = 3
DEFAULT_LEVEL_WIDTHS = (32, 64, 128, 256, 512, 512)


@dataclass(frozen=True)
class UNetConfig:
    input_channels: int
    output_channels: int
    level_widths: tuple[int, ...] = DEFAULT_LEVEL_WIDTHS
    leaky_slope: float = 0.1
    sigmoid_channels: tuple[int, ...] = ()
    zero_head: bool = False  # start the output layer at zero (residual heads)

    def __post_init__(self) -> None:
        if self.input_channels <= 0 or self.output_channels <= 0:
            raise ContractViolationError("channel counts must be positive")
        if len(self.level_widths) < 2:
            raise ContractViolationError("need at least two encoder levels")
        if any(c < 0 or c >= self.output_channels for c in self.sigmoid_channels):
            raise ContractViolationError(
                f"sigmoid channels {self.sigmoid_channels} out of range for "
                f"{self.output_channels} outputs")


def flow_enhancer_config(level_widths: tuple[int, ...] = DEFAULT_LEVEL_WIDTHS) -> UNetConfig:
    """19 inputs (two initial flows, keyframes, warped keyframes, upsampled
    auxiliary target); 5 outputs (two residual flows + sigmoid visibility).

    The head starts at zero so an untrained enhancer leaves the initial
    flows unchanged and emits a uniform 0.5 visibility map.
    """
    return UNetConfig(FLOW_ENHANCER_IN_CHANNELS, FLOW_ENHANCER_OUT_CHANNELS,
                      level_widths=level_widths, sigmoid_channels=(4,),
                      zero_head=True)


def appearance_config(input_channels: int = 201,
                      level_widths: tuple[int, ...] = DEFAULT_LEVEL_WIDTHS) -> UNetConfig:
    return UNetConfig(input_channels, APPEARANCE_OUT_CHANNELS, level_widths=level_widths)


class _ConvPair(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, slope: float):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1)
        self.slope = slope

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = F.leaky_relu(self.conv1(x), self.slope)
        return F.leaky_relu(self.conv2(x), self.slope)


class UNet(nn.Module):
    """Fully convolutional encoder-decoder with skip connections.

    Downsampling is 2x average pooling, upsampling is bilinear. Inputs whose
    sides are not divisible by ``2**(levels-1)`` are replicate-padded and the
    output cropped back, so spatial resolution is always preserved.
    """

    def __init__(self, config: UNetConfig):
        super().__init__()
        self.config = config
        widths = config.level_widths
        self.encoders = nn.ModuleList()
        previous = config.input_channels
        for width in widths:
            self.encoders.append(_ConvPair(previous, width, config.leaky_slope))
            previous = width
        self.decoders = nn.ModuleList()
        for level in range(len(widths) - 2, -1, -1):
            self.decoders.append(
                _ConvPair(widths[level + 1] + widths[level], widths[level],
                          config.leaky_slope))
        self.head = nn.Conv2d(widths[0], config.output_channels, 3, padding=1)
        if config.zero_head:
            nn.init.zeros_(self.head.weight)
            nn.init.zeros_(self.head.bias)

    @property
    def stride(self) -> int:
        return 2 ** (len(self.config.level_widths) - 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4:
            raise ContractViolationError(
                f"expected (B, C, H, W) input, got {tuple(x.shape)}")
        if x.shape[1] != self.config.input_channels:
            raise ContractViolationError(
                f"network expects {self.config.input_channels} input channels, "
                f"got {x.shape[1]}")
        h, w = x.shape[-2:]
        pad_h = (-h) % self.stride
        pad_w = (-w) % self.stride
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h), mode="replicate")

        skips = []
        for index, encoder in enumerate(self.encoders):
            if index > 0:
                x = F.avg_pool2d(x, 2)
            x = encoder(x)
            skips.append(x)

        x = skips[-1]
        for index, decoder in enumerate(self.decoders):
            skip = skips[len(skips) - 2 - index]
            x = F.interpolate(x, size=skip.shape[-2:], mode="bilinear",
                              align_corners=False)
            x = decoder(torch.cat([x, skip], dim=1))
        out = self.head(x)

        if pad_h or pad_w:
            out = out[:, :, :h, :w]
        if self.config.sigmoid_channels:
            parts = []
            for channel in range(self.config.output_channels):
                part = out[:, channel:channel + 1]
                parts.append(torch.sigmoid(part)
                             if channel in self.config.sigmoid_channels else part)
            out = torch.cat(parts, dim=1)
        return out


def build_unet(config: UNetConfig) -> UNet:
    return UNet(config)


def parameter_shapes(net: UNet) -> list[tuple[str, tuple[int, ...]]]:
    return [(name, tuple(p.shape)) for name, p in net.named_parameters()]
