import numpy as np
import pytest
import torch

from hybridslomo.errors import ContractViolationError
from hybridslomo.models import (AppearanceVariant, LucasKanadeEstimator,
                                assemble_appearance_input,
                                assemble_enhancement_input, build_unet,
                                compute_initial_flows, enhance_flows,
                                estimate_appearance, estimate_window_flows,
                                flow_enhancer_config, appearance_config,
                                upsample_window)

from oracles import smooth_field

SMALL_WIDTHS = (8, 16, 32)


def _translating_window(rng, n, h, w, velocity=(1.0, 0.0)):
    """n frames of a smooth texture translating by `velocity` px/frame."""
    pad = int(np.ceil(abs(velocity[0]) * n)) + 2
    canvas = np.clip(smooth_field(rng, h + 2 * pad, w + 2 * pad, 3,
                                  amplitude=0.45, blur_passes=1) + 0.5, 0, 1)
    frames = []
    for i in range(n):
        # content moves by +velocity per frame: crop window moves by -velocity
        ox = pad - int(round(velocity[0] * i))
        oy = pad - int(round(velocity[1] * i))
        frames.append(canvas[oy:oy + h, ox:ox + w].copy())
    return frames


class TestComputeInitialFlows:
    def test_target_at_left_keyframe_gives_zero_left_flow(self):
        rng = np.random.default_rng(0)
        frames = [np.clip(smooth_field(rng, 12, 12, 3) + 0.5, 0, 1) for _ in range(4)]
        flow_l, flow_r = compute_initial_flows(frames, 0, (24, 24),
                                               LucasKanadeEstimator())
        assert torch.count_nonzero(flow_l) == 0
        assert flow_l.shape == (2, 24, 24)

    def test_target_at_right_keyframe_gives_zero_right_flow(self):
        rng = np.random.default_rng(1)
        frames = [np.clip(smooth_field(rng, 12, 12, 3) + 0.5, 0, 1) for _ in range(4)]
        _, flow_r = compute_initial_flows(frames, 3, (24, 24),
                                          LucasKanadeEstimator())
        assert torch.count_nonzero(flow_r) == 0

    def test_static_window_small_flows(self):
        rng = np.random.default_rng(2)
        frame = np.clip(smooth_field(rng, 24, 32, 3, amplitude=0.45,
                                     blur_passes=1) + 0.5, 0, 1)
        frames = [frame] * 5
        flow_l, flow_r = compute_initial_flows(frames, 2, (48, 64),
                                               LucasKanadeEstimator())
        for flow in (flow_l, flow_r):
            magnitude = flow.norm(dim=0).numpy()
            assert float(np.median(magnitude)) <= 0.5

    def test_constant_velocity_chained_magnitudes(self):
        rng = np.random.default_rng(3)
        frames = _translating_window(rng, 9, 48, 64, velocity=(1.0, 0.0))
        flow_l, flow_r = compute_initial_flows(frames, 4, (48, 64),
                                               LucasKanadeEstimator())
        # content moves +1 px/frame; flow from target toward earlier frames
        # points backward along x, toward later frames forward
        median_lx = float(np.median(flow_l[0].numpy()))
        median_rx = float(np.median(flow_r[0].numpy()))
        assert abs(median_lx - (-4.0)) <= 1.0
        assert abs(median_rx - 4.0) <= 1.0
        assert abs(float(np.median(flow_l[1].numpy()))) <= 1.0

    def test_pairwise_cache_reused(self):
        rng = np.random.default_rng(4)
        frames = [np.clip(smooth_field(rng, 8, 8, 3) + 0.5, 0, 1) for _ in range(3)]
        upsampled = upsample_window(frames, 16, 16)
        pairwise = estimate_window_flows(upsampled, LucasKanadeEstimator())
        flow_l, flow_r = compute_initial_flows(frames, 1, (16, 16),
                                               estimator=None, pairwise=pairwise)
        assert flow_l.shape == flow_r.shape == (2, 16, 16)

    def test_bad_target_index_rejected(self):
        frames = [np.zeros((4, 4, 3))] * 3
        with pytest.raises(ContractViolationError):
            compute_initial_flows(frames, 3, (8, 8), LucasKanadeEstimator())


class TestEnhanceFlows:
    def _inputs(self, h=16, w=16):
        torch.manual_seed(0)
        kwargs = dict(dtype=torch.float32)
        return dict(
            initial_l=torch.randn(2, h, w, **kwargs),
            initial_r=torch.randn(2, h, w, **kwargs),
            left=torch.rand(3, h, w, **kwargs),
            right=torch.rand(3, h, w, **kwargs),
            warped_l=torch.rand(3, h, w, **kwargs),
            warped_r=torch.rand(3, h, w, **kwargs),
            aux_up=torch.rand(3, h, w, **kwargs),
        )

    def test_nineteen_channel_assembly(self):
        inputs = self._inputs()
        stacked = assemble_enhancement_input(**inputs)
        assert stacked.shape == (19, 16, 16)

    def test_wrong_slot_channels_rejected(self):
        inputs = self._inputs()
        inputs["aux_up"] = torch.rand(4, 16, 16)
        with pytest.raises(ContractViolationError):
            assemble_enhancement_input(**inputs)

    def test_zero_network_keeps_initial_flows(self):
        net = build_unet(flow_enhancer_config(SMALL_WIDTHS))
        with torch.no_grad():
            for parameter in net.parameters():
                parameter.zero_()
        inputs = self._inputs()
        with torch.no_grad():
            out = enhance_flows(net=net, **inputs)
        assert torch.equal(out.flow_l, inputs["initial_l"])
        assert torch.equal(out.flow_r, inputs["initial_r"])
        assert torch.all(out.visibility_l == 0.5)

    def test_residual_additivity(self):
        torch.manual_seed(1)
        net = build_unet(flow_enhancer_config(SMALL_WIDTHS))
        inputs = self._inputs()
        with torch.no_grad():
            out = enhance_flows(net=net, **inputs)
        np.testing.assert_allclose((out.flow_l - inputs["initial_l"]).numpy(),
                                   out.delta_flow_l.numpy(), atol=1e-6)

    def test_visibility_complement(self):
        torch.manual_seed(2)
        net = build_unet(flow_enhancer_config(SMALL_WIDTHS))
        with torch.no_grad():
            out = enhance_flows(net=net, **self._inputs())
        ones = out.visibility_l + out.visibility_r
        np.testing.assert_allclose(ones.numpy(), 1.0, atol=1e-7)
        assert float(out.visibility_l.min()) > 0.0
        assert float(out.visibility_l.max()) < 1.0


class TestAppearanceAssembly:
    def _parts(self, h=16, w=16):
        torch.manual_seed(3)
        return dict(
            warped_l=torch.rand(3, h, w),
            warped_r=torch.rand(3, h, w),
            visibility_l=torch.rand(1, h, w),
            aux_up=torch.rand(3, h, w),
            context_l=torch.randn(64, h, w),
            context_r=torch.randn(64, h, w),
            context_aux=torch.randn(64, h, w),
        )

    def test_full_channel_math(self):
        stacked = assemble_appearance_input(**self._parts(),
                                            variant=AppearanceVariant.CONTEXT)
        assert stacked.shape[0] == 2 * (3 + 64) + (3 + 64) == 201

    def test_reduced_variants(self):
        parts = self._parts()
        base = assemble_appearance_input(parts["warped_l"], parts["warped_r"],
                                         parts["visibility_l"], parts["aux_up"],
                                         variant=AppearanceVariant.BASE)
        masked = assemble_appearance_input(parts["warped_l"], parts["warped_r"],
                                           parts["visibility_l"], parts["aux_up"],
                                           variant=AppearanceVariant.VISIBILITY)
        assert base.shape[0] == masked.shape[0] == 9
        # base passes frames through unmasked
        assert torch.equal(base[:3], parts["warped_l"])
        assert not torch.equal(masked[:3], parts["warped_l"])

    def test_context_variant_requires_contexts(self):
        parts = self._parts()
        with pytest.raises(ContractViolationError):
            assemble_appearance_input(parts["warped_l"], parts["warped_r"],
                                      parts["visibility_l"], parts["aux_up"],
                                      variant=AppearanceVariant.CONTEXT)

    def test_contexts_are_not_masked(self):
        parts = self._parts()
        parts["visibility_l"] = torch.zeros(1, 16, 16)
        stacked = assemble_appearance_input(**parts, variant=AppearanceVariant.CONTEXT)
        assert torch.count_nonzero(stacked[:3]) == 0        # masked left frame
        assert torch.equal(stacked[3:67], parts["context_l"])  # context untouched

    def test_estimate_appearance_clamps_only_at_inference(self):
        torch.manual_seed(4)
        net = build_unet(appearance_config(level_widths=SMALL_WIDTHS))
        stacked = assemble_appearance_input(**self._parts(),
                                            variant=AppearanceVariant.CONTEXT)
        with torch.no_grad():
            clamped = estimate_appearance(stacked, net, clamp=True)
            raw = estimate_appearance(stacked, net, clamp=False)
        assert clamped.shape == (3, 16, 16)
        assert float(clamped.min()) >= 0.0 and float(clamped.max()) <= 1.0
        assert float(raw.min()) < 0.0 or float(raw.max()) > 1.0
