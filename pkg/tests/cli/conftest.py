import json

import pytest

TINY_RUN = {
    "seed": 0,
    "split_seeds": [0, 1],
    "datagen": {
        "n_classes": 4,
        "image_size": 16,
        "max_blobs": 2,
        "n_pairs": 12,
        "n_train": 4,
        "n_eval": 3,
        "fraction_novel": 0.25,
    },
    "encoders": {"image_size": 16, "patch_size": 8, "d_visual": 8, "d_text": 8, "layers": 1, "heads": 2, "max_text_len": 16},
    "clip_train": {"steps": 2, "batch_size": 4, "warmup_steps": 1, "heldout": 4, "min_recall": 0.0},
    "foodlearner": {"q_tokens": 2, "d_query": 8, "layers": 1, "heads": 2, "max_text_len": 16},
    "stage1": {"batch_size": 2, "steps": 2, "warmup_steps": 1, "heldout": 2, "log_every": 1},
    "stage2": {
        "n_proposals": 4,
        "head_dim": 8,
        "head_layers": 1,
        "head_heads": 2,
        "mask_size": 8,
        "steps": 2,
        "batch_size": 2,
        "log_every": 1,
    },
}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY_RUN))
    return path


@pytest.fixture
def run_dirs(tmp_path):
    return tmp_path / "data", tmp_path / "run"


@pytest.fixture
def cli_args(tiny_config, run_dirs):
    data, out = run_dirs
    return ["--config", str(tiny_config), "--data", str(data), "--out", str(out)]


@pytest.fixture
def gen_args(tiny_config, run_dirs):
    data, _ = run_dirs
    return ["--config", str(tiny_config), "--data", str(data)]
