"""Small shared helpers."""

from __future__ import annotations

import hashlib

import torch


def parameter_checksum(module: torch.nn.Module) -> str:
    """SHA-256 over parameter names and raw values, in state-dict order."""
    digest = hashlib.sha256()
    for name, tensor in module.state_dict().items():
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def seeded_init(module: torch.nn.Module, seed: int) -> None:
    """Deterministically (re)initialize conv/linear weights from a seed."""
    generator = torch.Generator().manual_seed(seed)
    for submodule in module.modules():
        if isinstance(submodule, (torch.nn.Conv2d, torch.nn.Linear)):
            fan_in = submodule.weight[0].numel()
            std = (2.0 / fan_in) ** 0.5
            with torch.no_grad():
                submodule.weight.normal_(0.0, std, generator=generator)
                if submodule.bias is not None:
                    submodule.bias.zero_()
