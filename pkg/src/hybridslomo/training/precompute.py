"""Derived-tensor cache for training.

Initial flows (and everything downstream of the frozen estimator) depend
only on the stored sample, never on trainable parameters, so they are
computed once per (sample, target) and reused across steps. Entries are
kept in a bounded LRU so large corpora degrade to recomputation instead of
exhausting memory.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import torch

from ..core import to_tensor, warp_backward
from ..data import HybridSample
from ..models import (ContextExtractor, compute_initial_flows,
                      estimate_window_flows, upsample_window)


@dataclass
class AlignmentInputs:
    """Static per-(sample, target) tensors feeding the flow stage."""

    left: torch.Tensor
    right: torch.Tensor
    aux_up: torch.Tensor
    initial_l: torch.Tensor
    initial_r: torch.Tensor
    warped_l0: torch.Tensor
    warped_r0: torch.Tensor
    gt: torch.Tensor
    t: float


class _Lru(OrderedDict):
    def __init__(self, max_entries: int):
        super().__init__()
        self.max_entries = max_entries

    def get_or(self, key, factory):
        if key in self:
            self.move_to_end(key)
            return self[key]
        value = factory()
        self[key] = value
        if len(self) > self.max_entries:
            self.popitem(last=False)
        return value


class TrainingCache:
    def __init__(self, estimator, max_entries: int = 64):
        self.estimator = estimator
        self._aux_up = _Lru(max(4, max_entries // 8))
        self._pairwise = _Lru(max(4, max_entries // 8))
        self._alignment = _Lru(max_entries)
        self._contexts = _Lru(max_entries)

    def _upsampled(self, sample: HybridSample) -> list[torch.Tensor]:
        h, w = sample.main_resolution()
        return self._aux_up.get_or(
            sample.sample_id, lambda: upsample_window(sample.aux, h, w))

    def _pairwise_flows(self, sample: HybridSample):
        return self._pairwise.get_or(
            sample.sample_id,
            lambda: estimate_window_flows(self._upsampled(sample), self.estimator))

    def alignment(self, sample: HybridSample, t_index: int) -> AlignmentInputs:
        def build() -> AlignmentInputs:
            h, w = sample.main_resolution()
            upsampled = self._upsampled(sample)
            initial_l, initial_r = compute_initial_flows(
                sample.aux, t_index, (h, w), self.estimator,
                pairwise=self._pairwise_flows(sample))
            left = to_tensor(sample.left)
            right = to_tensor(sample.right)
            return AlignmentInputs(
                left=left,
                right=right,
                aux_up=upsampled[t_index],
                initial_l=initial_l,
                initial_r=initial_r,
                warped_l0=warp_backward(left, initial_l),
                warped_r0=warp_backward(right, initial_r),
                gt=to_tensor(sample.targets[t_index - 1]),
                t=sample.normalized_time(t_index),
            )

        return self._alignment.get_or((sample.sample_id, t_index), build)

    def contexts(self, sample: HybridSample, t_index: int,
                 extractor: ContextExtractor,
                 ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Unwarped context maps for (left, right, auxiliary target)."""
        def build():
            inputs = self.alignment(sample, t_index)
            with torch.no_grad():
                return (extractor(inputs.left), extractor(inputs.right),
                        extractor(inputs.aux_up))

        return self._contexts.get_or((sample.sample_id, t_index), build)
