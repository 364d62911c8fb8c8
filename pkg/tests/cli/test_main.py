import json

import numpy as np
import pytest
from PIL import Image

from food_vocab_seg.cli import RunConfig
from food_vocab_seg.main import apply_overrides, build_parser, main


def last_error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


@pytest.fixture
def pipeline(gen_args, cli_args):
    def run(*train_seg_flags):
        assert main(["gen-data", *gen_args]) == 0
        assert main(["pretrain-clip", *cli_args]) == 0
        assert main(["pretrain", *cli_args]) == 0
        assert main(["train-seg", *cli_args, *train_seg_flags]) == 0

    return run


def test_full_pipeline(pipeline, cli_args, run_dirs, capsys):
    data, out = run_dirs
    pipeline()
    for name in ("encoders/encoders.safetensors", "stage1.safetensors", "stage2.safetensors",
                 "stage1_log.jsonl", "stage2_log.jsonl", "clip_report.json", "config.json"):
        assert (out / name).exists(), name
    assert (data / "split_0.json").exists() and (data / "split_1.json").exists()
    assert len((out / "stage1_log.jsonl").read_text().splitlines()) == 2

    assert main(["eval", *cli_args]) == 0
    report = json.loads((out / "report.json").read_text())
    assert 0.0 <= report["miou_all"] <= 1.0
    assert report["seed"] == 0
    assert report["run"]["static_text"] == "false"
    assert "miou_novel" in capsys.readouterr().out


def test_eval_is_byte_identical(pipeline, cli_args, run_dirs):
    _, out = run_dirs
    pipeline()
    assert main(["eval", *cli_args]) == 0
    first = (out / "report.json").read_bytes()
    assert main(["eval", *cli_args]) == 0
    assert (out / "report.json").read_bytes() == first


def test_ablation_flags(gen_args, cli_args, run_dirs):
    _, out = run_dirs
    assert main(["gen-data", *gen_args]) == 0
    assert main(["pretrain-clip", *cli_args]) == 0
    for toggles in ("itm,lm", "itc,lm", "itc,itm"):
        assert main(["pretrain", *cli_args, "--loss-toggles", toggles, "--hard-negatives"]) == 0
    assert main(["train-seg", *cli_args, "--no-stage1", "--static-text", "--templates", "vild"]) == 0
    assert main(["eval", *cli_args]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["run"]["static_text"] == "true"


def test_alternative_split(gen_args, cli_args, run_dirs):
    data, out = run_dirs
    split_path = str(data / "split_1.json")
    assert main(["gen-data", *gen_args]) == 0
    assert main(["pretrain-clip", *cli_args]) == 0
    assert main(["train-seg", *cli_args, "--no-stage1", "--split", split_path]) == 0
    assert main(["eval", *cli_args, "--split", split_path]) == 0
    novel = json.loads((data / "split_1.json").read_text())["novel"]
    assert json.loads((out / "report.json").read_text())["novel_classes"] == novel


def test_missing_stage1_archive(gen_args, cli_args, capsys):
    assert main(["gen-data", *gen_args]) == 0
    assert main(["pretrain-clip", *cli_args]) == 0
    assert main(["train-seg", *cli_args]) == 1
    assert last_error(capsys)["error"] == "ConfigError"


def test_full_class_training_and_background_scoring(pipeline, cli_args, run_dirs):
    _, out = run_dirs
    pipeline("--full-class", "--no-stage1")
    assert main(["eval", *cli_args, "--full-class", "--include-background"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["novel_classes"] == []
    assert report["miou_novel"] is None
    assert "background" in report["per_class"]


def test_resume_appends_to_the_log(gen_args, cli_args, run_dirs):
    _, out = run_dirs
    assert main(["gen-data", *gen_args]) == 0
    assert main(["pretrain-clip", *cli_args]) == 0
    assert main(["pretrain", *cli_args]) == 0
    saved = out / "stage1_first.safetensors"
    saved.write_bytes((out / "stage1.safetensors").read_bytes())
    assert main(["pretrain", *cli_args, "--steps", "4", "--resume", str(saved)]) == 0
    steps = [json.loads(line)["step"] for line in (out / "stage1_log.jsonl").read_text().splitlines()]
    assert steps == [0, 1, 2, 3]


def test_infer_writes_maps(pipeline, cli_args, run_dirs, tmp_path):
    _, out = run_dirs
    pipeline()
    image_path = tmp_path / "dish.png"
    Image.fromarray(np.full((20, 24, 3), 120, dtype=np.uint8)).save(image_path)
    assert main(["infer", *cli_args, "--image", str(image_path), "--classes", "egg,zucchini"]) == 0
    with Image.open(out / "predictions" / "dish.png") as handle:
        class_map = np.array(handle)
    assert class_map.shape == (20, 24)
    assert set(np.unique(class_map).tolist()) <= {0, 1}
    sidecar = json.loads((out / "predictions" / "dish.json").read_text())
    assert sidecar["classes"] == {"0": "egg", "1": "zucchini"}


def test_aggregate(pipeline, cli_args, run_dirs, tmp_path):
    _, out = run_dirs
    pipeline()
    assert main(["eval", *cli_args]) == 0
    copy = tmp_path / "report_copy.json"
    copy.write_text((out / "report.json").read_text())
    assert main(["aggregate", *cli_args, str(out / "report.json"), str(copy)]) == 0
    aggregate = json.loads((out / "aggregate.json").read_text())
    assert aggregate["runs"] == 2
    assert aggregate["pacc"]["std"] == 0.0


def test_missing_inputs_are_reported_on_stderr(cli_args, capsys):
    assert main(["pretrain-clip", *cli_args]) == 1
    assert last_error(capsys)["error"] == "DatasetError"
    assert main(["pretrain", *cli_args]) == 1
    assert last_error(capsys)["error"] == "ConfigError"


def test_existing_dataset_needs_force(gen_args, capsys):
    assert main(["gen-data", *gen_args]) == 0
    assert main(["gen-data", *gen_args]) == 1
    assert last_error(capsys)["error"] == "DatasetError"
    assert main(["gen-data", *gen_args, "--force"]) == 0


def test_eval_refuses_foreign_classes(pipeline, cli_args, tiny_config, tmp_path, capsys):
    pipeline()
    other = tmp_path / "other"
    assert main(["gen-data", "--config", str(tiny_config), "--data", str(other), "--classes", "5"]) == 0
    assert main(["eval", "--config", str(tiny_config), "--data", str(other), "--out", cli_args[5]]) == 1
    assert last_error(capsys)["error"] == "CheckpointMismatchError"


def test_bad_flag_values(cli_args, gen_args, capsys):
    assert main(["pretrain", *cli_args, "--loss-toggles", "itc,mlm"]) == 1
    assert last_error(capsys)["error"] == "ConfigError"
    assert main(["gen-data", *gen_args, "--fraction-novel", "1.5"]) == 1
    assert last_error(capsys)["error"] == "ValidationError"


def test_overrides_layer_over_the_config():
    parser = build_parser()
    args = parser.parse_args(["gen-data", "--out", "d", "--samples", "9", "--classes", "6", "--seed", "3"])
    run = apply_overrides(RunConfig(), args)
    assert (run.paths.data, run.datagen.n_train, run.datagen.n_classes, run.seed) == ("d", 9, 6, 3)

    args = parser.parse_args(["train-seg", "--templates", "{} on a plate,a photo of {}", "--steps", "5"])
    run = apply_overrides(RunConfig(), args)
    assert run.stage2.templates == ["{} on a plate", "a photo of {}"]
    assert run.stage2.steps == 5
    assert run.stage1.steps == RunConfig().stage1.steps


def test_version(capsys):
    with pytest.raises(SystemExit):
        main(["--version"])
    assert "food-vocab-seg" in capsys.readouterr().out
