import numpy as np
import pytest
import torch

from hybridslomo.core import FlowField
from hybridslomo.errors import ContractViolationError, InitializationError
from hybridslomo.models import (FlowEstimatorHandle, LucasKanadeEstimator,
                                PyramidFlowNetwork, PyramidNetworkEstimator,
                                create_flow_estimator, estimate_flow,
                                save_pyramid_network)

from oracles import smooth_field


def _texture(rng, h, w):
    return np.clip(smooth_field(rng, h, w, 3, amplitude=0.45, blur_passes=1) + 0.5,
                   0.0, 1.0)


def _shift_right(frame, pixels):
    return np.concatenate([np.repeat(frame[:, :1], pixels, axis=1),
                           frame[:, :-pixels]], axis=1)


class TestLucasKanade:
    def test_static_frame_near_zero_flow(self):
        rng = np.random.default_rng(0)
        frame = _texture(rng, 48, 64)
        flow = LucasKanadeEstimator().estimate(frame, frame)
        magnitude = np.sqrt((flow ** 2).sum(axis=2))
        assert (magnitude <= 0.5).mean() >= 0.99

    def test_recovers_three_pixel_shift(self):
        rng = np.random.default_rng(1)
        frame = _texture(rng, 64, 96)
        shifted = _shift_right(frame, 3)
        flow = LucasKanadeEstimator().estimate(frame, shifted)
        median_x = float(np.median(flow[:, :, 0]))
        median_y = float(np.median(flow[:, :, 1]))
        assert abs(median_x - 3.0) <= 0.5
        assert abs(median_y) <= 0.5

    def test_mismatched_sizes_rejected(self):
        estimator = LucasKanadeEstimator()
        with pytest.raises(ContractViolationError):
            estimator.estimate(np.zeros((8, 8, 3)), np.zeros((8, 9, 3)))

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        a = _texture(rng, 32, 32)
        b = _texture(rng, 32, 32)
        estimator = LucasKanadeEstimator()
        np.testing.assert_array_equal(estimator.estimate(a, b), estimator.estimate(a, b))


class TestPyramidNetwork:
    def _saved_weights(self, tmp_path, levels=3, width=8):
        torch.manual_seed(0)
        network = PyramidFlowNetwork(levels=levels, width=width)
        path = tmp_path / "flow.pth"
        save_pyramid_network(network, path)
        return path

    def test_round_trip_and_shape(self, tmp_path):
        path = self._saved_weights(tmp_path)
        estimator = PyramidNetworkEstimator(path)
        rng = np.random.default_rng(3)
        flow = estimator.estimate(_texture(rng, 32, 32), _texture(rng, 32, 32))
        assert flow.shape == (32, 32, 2)

    def test_pads_and_crops_odd_sizes(self, tmp_path):
        path = self._saved_weights(tmp_path)
        estimator = PyramidNetworkEstimator(path)
        rng = np.random.default_rng(4)
        flow = estimator.estimate(_texture(rng, 21, 35), _texture(rng, 21, 35))
        assert flow.shape == (21, 35, 2)

    def test_missing_weights_is_initialization_error(self, tmp_path):
        with pytest.raises(InitializationError):
            PyramidNetworkEstimator(tmp_path / "missing.pth")
        with pytest.raises(InitializationError):
            PyramidNetworkEstimator(None)

    def test_corrupt_weights_is_initialization_error(self, tmp_path):
        path = tmp_path / "garbage.pth"
        path.write_bytes(b"\x00" * 64)
        with pytest.raises(InitializationError):
            PyramidNetworkEstimator(path)

    def test_incompatible_weights_is_initialization_error(self, tmp_path):
        path = tmp_path / "flow.pth"
        torch.save({"state_dict": {"blocks.0.net.0.weight": torch.zeros(1)}}, path)
        with pytest.raises(InitializationError):
            PyramidNetworkEstimator(path)


class TestHandle:
    def test_unknown_backend_rejected(self):
        with pytest.raises(ContractViolationError):
            FlowEstimatorHandle(backend="farneback")

    def test_create_default_is_weight_free(self):
        estimator = create_flow_estimator(FlowEstimatorHandle())
        assert isinstance(estimator, LucasKanadeEstimator)

    def test_estimate_flow_returns_flow_field(self):
        rng = np.random.default_rng(5)
        frame = _texture(rng, 24, 24)
        field = estimate_flow(frame, frame, FlowEstimatorHandle())
        assert isinstance(field, FlowField)
        assert field.data.shape == (24, 24, 2)
