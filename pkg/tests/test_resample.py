import numpy as np
import pytest
import torch

from hybridslomo.core import downsample_area, resample
from hybridslomo.errors import ContractViolationError

from oracles import resize_oracle


def _t(array):
    return torch.from_numpy(array).permute(2, 0, 1).to(torch.float64)


def _n(tensor):
    return tensor.permute(1, 2, 0).numpy()


class TestResample:
    def test_same_size_is_identity(self):
        rng = np.random.default_rng(0)
        frame = rng.uniform(size=(6, 8, 3))
        assert torch.equal(resample(_t(frame), 6, 8), _t(frame))

    def test_constant_image_stays_constant(self):
        frame = np.full((2, 2, 3), 0.37)
        for mode in ("bilinear", "bicubic"):
            out = _n(resample(_t(frame), 7, 5, mode=mode))
            np.testing.assert_allclose(out, 0.37, atol=1e-9)

    def test_ramp_upsample_matches_scalar_oracle(self):
        ramp = np.tile(np.arange(4.0)[None, :, None] / 3.0, (4, 1, 3))
        out = _n(resample(_t(ramp), 8, 8, mode="bilinear"))
        np.testing.assert_allclose(out, resize_oracle(ramp, 8, 8), atol=1e-9)

    def test_random_resize_matches_scalar_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            frame = rng.uniform(size=(5, 7, 3))
            out = _n(resample(_t(frame), 11, 9, mode="bilinear"))
            np.testing.assert_allclose(out, resize_oracle(frame, 11, 9), atol=1e-9)

    def test_output_clamped(self):
        frame = np.zeros((4, 4, 3))
        frame[1:3, 1:3] = 1.0
        out = _n(resample(_t(frame), 16, 16, mode="bicubic"))
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_invalid_target_rejected(self):
        with pytest.raises(ContractViolationError):
            resample(torch.zeros(3, 4, 4), 0, 4)
        with pytest.raises(ContractViolationError):
            resample(torch.zeros(3, 4, 4), 4, 4, mode="nearest")


class TestDownsampleArea:
    def test_box_means(self):
        frame = np.zeros((4, 4, 1))
        frame[:2, :2, 0] = [[0.0, 1.0], [0.2, 0.6]]
        frame[:2, 2:, 0] = 1.0
        out = _n(downsample_area(_t(frame), 2))
        np.testing.assert_allclose(out[0, 0, 0], 0.45, atol=1e-12)
        np.testing.assert_allclose(out[0, 1, 0], 1.0, atol=1e-12)
        np.testing.assert_allclose(out[1, :, 0], 0.0, atol=1e-12)

    def test_round_trip_preserves_smooth_content(self):
        # downsample-then-upsample only loses high frequencies
        rng = np.random.default_rng(2)
        base = rng.uniform(0.2, 0.8, size=(8, 8, 3))
        frame = _n(resample(_t(base), 64, 64, mode="bilinear"))
        down = downsample_area(_t(frame), 4)
        up = _n(resample(down, 64, 64, mode="bilinear"))
        mse = float(((up - frame) ** 2).mean())
        psnr = 10.0 * np.log10(1.0 / mse)
        assert psnr >= 25.0

    def test_indivisible_size_rejected(self):
        with pytest.raises(ContractViolationError):
            downsample_area(torch.zeros(3, 5, 4), 2)
