import json

import numpy as np
import pytest
from PIL import Image

from hybridslomo.pipeline.cli import main

from clipgen import make_translation_frames


def _write_frames(frames, directory):
    directory.mkdir(parents=True, exist_ok=True)
    for index, frame in enumerate(frames):
        data = np.clip(np.rint(frame * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(data, mode="RGB").save(directory / f"{index:04d}.png")


@pytest.fixture(scope="module")
def video_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("videos")
    for seed in range(2):
        frames = make_translation_frames(seed, 12, 48, 48, velocity=(1, 0))
        _write_frames(frames, root / f"clip{seed}")
    return root


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory, video_dirs):
    out = tmp_path_factory.mktemp("dataset")
    config = {"seed": 1, "crop_main": [48, 24]}
    config_path = out / "build.json"
    config_path.write_text(json.dumps(config))
    code = main(["dataset", "build", "--src", str(video_dirs),
                 "--out", str(out / "data"), "--config", str(config_path)])
    assert code == 0
    return out / "data"


@pytest.fixture(scope="module")
def checkpoint_path(tmp_path_factory, dataset_dir):
    out = tmp_path_factory.mktemp("train")
    config = {"epochs": 2, "batch_size": 2, "seed": 0,
              "level_widths": [8, 16, 32], "early_stop": False}
    flow_cfg = out / "flow.json"
    flow_cfg.write_text(json.dumps(config))
    code = main(["train", "--stage", "flow", "--config", str(flow_cfg),
                 "--data", str(dataset_dir), "--out", str(out)])
    assert code == 0
    flow_ckpt = out / "flow.ckpt"
    assert flow_ckpt.exists()
    app_cfg = out / "app.json"
    app_cfg.write_text(json.dumps(config))
    code = main(["train", "--stage", "appearance", "--config", str(app_cfg),
                 "--data", str(dataset_dir), "--out", str(out),
                 "--ckpt", str(flow_ckpt)])
    assert code == 0
    return out / "appearance.ckpt"


class TestDatasetBuild:
    def test_builds_samples_and_index(self, dataset_dir):
        assert (dataset_dir / "dataset.json").exists()
        index = json.loads((dataset_dir / "dataset.json").read_text())
        assert len(index["samples"]) == 2
        sample_dir = dataset_dir / "samples" / index["samples"][0]
        assert (sample_dir / "main_l.png").exists()
        assert (sample_dir / "aux_08.png").exists()
        assert (sample_dir / "manifest.json").exists()

    def test_missing_source_is_contract_error(self, tmp_path):
        code = main(["dataset", "build", "--src", str(tmp_path / "nope"),
                     "--out", str(tmp_path / "out")])
        assert code == 2


class TestTrainAndReconstruct:
    def test_reconstruct_writes_expected_frame_count(self, checkpoint_path,
                                                     tmp_path):
        frames = make_translation_frames(7, 17, 48, 48, velocity=(1, 0))
        aux = [f.reshape(12, 4, 12, 4, 3).mean(axis=(1, 3)).astype(np.float32)
               for f in frames]
        main_dir = tmp_path / "main"
        aux_dir = tmp_path / "aux"
        _write_frames([frames[0], frames[8], frames[16]], main_dir)
        _write_frames(aux, aux_dir)
        out_dir = tmp_path / "out"
        code = main(["reconstruct", "--main", str(main_dir), "--aux", str(aux_dir),
                     "--ckpt", str(checkpoint_path), "--out", str(out_dir),
                     "--main-fps", "30", "--aux-fps", "240"])
        assert code == 0
        outputs = sorted(out_dir.glob("*.png"))
        assert len(outputs) == 17

    def test_missing_checkpoint_exit_code(self, tmp_path, video_dirs):
        code = main(["reconstruct", "--main", str(video_dirs / "clip0"),
                     "--aux", str(video_dirs / "clip0"),
                     "--ckpt", str(tmp_path / "missing.ckpt"),
                     "--out", str(tmp_path / "out")])
        assert code == 7  # checkpoint error category

    def test_eval_sweep_writes_report(self, checkpoint_path, dataset_dir,
                                      tmp_path):
        report = tmp_path / "report.csv"
        code = main(["eval", "--sweep", "desync", "--dataset", str(dataset_dir),
                     "--ckpt", str(checkpoint_path), "--report", str(report),
                     "--grid", "[0, 1]"])
        assert code == 0
        lines = report.read_text().strip().splitlines()
        assert len(lines) == 3  # header + 2 grid points
        assert lines[0].startswith("axis,value,status,n_frames,psnr,ssim,lpips")
