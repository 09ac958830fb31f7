import numpy as np
import pytest
import torch

from hybridslomo.errors import ContractViolationError, InitializationError
from hybridslomo.models import ContextExtractor, FeatureHandle, Vgg16Features
from hybridslomo.utils import parameter_checksum


class TestContextExtractor:
    def test_sixty_four_channels_any_size(self):
        extractor = ContextExtractor(FeatureHandle(seed=1))
        for h, w in ((16, 16), (30, 44), (17, 23)):
            out = extractor(torch.rand(1, 3, h, w))
            assert out.shape == (1, 64, h, w)

    def test_deterministic(self):
        extractor = ContextExtractor(FeatureHandle(seed=1))
        frame = torch.rand(3, 20, 20)
        assert torch.equal(extractor(frame), extractor(frame))

    def test_same_seed_same_filters(self):
        a = ContextExtractor(FeatureHandle(seed=7))
        b = ContextExtractor(FeatureHandle(seed=7))
        assert parameter_checksum(a) == parameter_checksum(b)

    def test_parameters_frozen(self):
        extractor = ContextExtractor(FeatureHandle(seed=1))
        assert all(not p.requires_grad for p in extractor.parameters())

    def test_loads_resnet_stem_weights(self, tmp_path):
        weights = torch.randn(64, 3, 7, 7)
        path = tmp_path / "stem.pth"
        torch.save({"conv1.weight": weights}, path)
        extractor = ContextExtractor(FeatureHandle(weights_path=path))
        assert torch.equal(extractor.conv.weight, weights)
        assert extractor.source == "file:stem.pth"

    def test_missing_weights_rejected(self, tmp_path):
        with pytest.raises(InitializationError):
            ContextExtractor(FeatureHandle(weights_path=tmp_path / "nope.pth"))

    def test_corrupt_weights_rejected(self, tmp_path):
        path = tmp_path / "bad.pth"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(InitializationError):
            ContextExtractor(FeatureHandle(weights_path=path))


class TestVgg16Features:
    def test_final_response_shape(self):
        features = Vgg16Features(FeatureHandle(seed=2))
        out = features(torch.rand(1, 3, 32, 32))
        assert out.shape == (1, 512, 4, 4)

    def test_four_stage_taps(self):
        features = Vgg16Features(FeatureHandle(seed=2))
        stages = features.stages(torch.rand(1, 3, 32, 32))
        assert [s.shape[1] for s in stages] == [64, 128, 256, 512]

    def test_tiny_input_rejected(self):
        features = Vgg16Features(FeatureHandle(seed=2))
        with pytest.raises(ContractViolationError):
            features(torch.rand(1, 3, 4, 4))

    def test_loads_layered_state_dict(self, tmp_path):
        # torchvision-style keys: features.<index>.weight with activation gaps
        plan = [(64, 3), (64, 64), (128, 64), (128, 128), (256, 128),
                (256, 256), (256, 256), (512, 256), (512, 512), (512, 512)]
        indices = [0, 2, 5, 7, 10, 12, 14, 17, 19, 21]
        state = {}
        for idx, (out_c, in_c) in zip(indices, plan):
            state[f"features.{idx}.weight"] = torch.randn(out_c, in_c, 3, 3)
            state[f"features.{idx}.bias"] = torch.randn(out_c)
        path = tmp_path / "vgg.pth"
        torch.save(state, path)
        features = Vgg16Features(FeatureHandle(weights_path=path))
        assert torch.equal(features.convs[0].weight, state["features.0.weight"])
        assert torch.equal(features.convs[9].bias, state["features.21.bias"])
        assert features.source == "file:vgg.pth"

    def test_incompatible_state_rejected(self, tmp_path):
        path = tmp_path / "short.pth"
        torch.save({"features.0.weight": torch.randn(8, 3, 3, 3)}, path)
        with pytest.raises(InitializationError):
            Vgg16Features(FeatureHandle(weights_path=path))

    def test_frozen_and_eval(self):
        features = Vgg16Features(FeatureHandle(seed=2))
        assert all(not p.requires_grad for p in features.parameters())
        assert not features.training
