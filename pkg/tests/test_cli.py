import subprocess
import sys

import numpy as np

from levelset import BinaryMask, FeatureField, SynthSpec, generate
from levelset.cli import main
from levelset.fileio import (
    read_energy_csv,
    read_mask_png,
    read_scalar_field,
    write_field_file,
    write_mask_png,
)


def _write_synth_spec(path, **overrides):
    entries = {
        "seed": 7,
        "height": 48,
        "width": 48,
        "shape": "disk",
        "noise_sigma": 0.05,
        "channels": 1,
        "inside": "1.0",
        "outside": "0.0",
    }
    entries.update(overrides)
    path.write_text("\n".join(f"{k} = {v}" for k, v in entries.items()) + "\n")


def test_usage_errors_exit_one(capsys):
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["segment"]) == 1  # no input at all
    capsys.readouterr()


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    capsys.readouterr()


def test_missing_file_exits_two(tmp_path, capsys):
    code = main(
        ["segment", "--mode", "feature", "--features", str(tmp_path / "nope.lsf"),
         "--box", "4,4,20,20", "--out", str(tmp_path)]
    )
    assert code == 2
    capsys.readouterr()


def test_synth_then_segment_feature_mode(tmp_path, capsys):
    spec = tmp_path / "spec.cfg"
    _write_synth_spec(spec)
    assert main(["synth", "--spec", str(spec), "--out", str(tmp_path / "data")]) == 0
    out = tmp_path / "run"
    code = main(
        ["segment", "--mode", "feature", "--features", str(tmp_path / "data" / "features.lsf"),
         "--init-mask", str(tmp_path / "data" / "gt_mask.png"),
         "--steps", "10", "--mu", "0.02", "--out", str(out)]
    )
    assert code == 0
    captured = capsys.readouterr()
    assert "energy_final=" in captured.out
    mask = read_mask_png(out / "mask.png")
    gt = read_mask_png(tmp_path / "data" / "gt_mask.png")
    from levelset import mask_iou

    assert mask_iou(mask, gt) > 0.95
    energies = read_energy_csv(out / "energies.csv")
    assert len(energies) == 11
    phi = read_scalar_field(out / "phi_final.lsf")
    assert phi.shape == (48, 48)


def test_segment_zero_steps_returns_init_mask(tmp_path, capsys):
    spec = tmp_path / "spec.cfg"
    _write_synth_spec(spec, seed=9)
    assert main(["synth", "--spec", str(spec), "--out", str(tmp_path / "data")]) == 0
    out = tmp_path / "zero"
    code = main(
        ["segment", "--mode", "feature", "--features", str(tmp_path / "data" / "features.lsf"),
         "--box", "10,12,30,36", "--steps", "0", "--out", str(out)]
    )
    assert code == 0
    capsys.readouterr()
    mask = read_mask_png(out / "mask.png")
    expected = np.zeros((48, 48), dtype=np.uint8)
    expected[10:31, 12:37] = 1
    assert np.array_equal(mask.data, expected)


def test_config_file_with_flag_override(tmp_path, capsys):
    spec = tmp_path / "spec.cfg"
    _write_synth_spec(spec, seed=11)
    main(["synth", "--spec", str(spec), "--out", str(tmp_path / "data")])
    config = tmp_path / "run.cfg"
    config.write_text(
        "\n".join(
            [
                "# run settings",
                "mode = feature",
                f"features = {tmp_path / 'data' / 'features.lsf'}",
                "box = 10,10,38,38",
                "steps = 25",
                "mu = 0.02",
                f"out = {tmp_path / 'cfg_out'}",
            ]
        )
        + "\n"
    )
    # flag overrides the config's steps
    assert main(["segment", "--config", str(config), "--steps", "0"]) == 0
    capsys.readouterr()
    energies = read_energy_csv(tmp_path / "cfg_out" / "energies.csv")
    assert len(energies) == 1


def test_eval_command(tmp_path, capsys):
    m = np.zeros((20, 20), dtype=np.uint8)
    m[4:12, 4:12] = 1
    write_mask_png(tmp_path / "a.png", BinaryMask(m))
    write_mask_png(tmp_path / "b.png", BinaryMask(m))
    assert main(["eval", "--pred", str(tmp_path / "a.png"), "--gt", str(tmp_path / "b.png")]) == 0
    out = capsys.readouterr().out
    assert "iou=1.000000" in out
    assert "f1_1px=1.000000" in out
    assert "f1_2px=1.000000" in out
    far = np.zeros((20, 20), dtype=np.uint8)
    far[14:18, 14:18] = 1
    write_mask_png(tmp_path / "c.png", BinaryMask(far))
    assert main(["eval", "--pred", str(tmp_path / "a.png"), "--gt", str(tmp_path / "c.png")]) == 0
    out = capsys.readouterr().out
    assert "iou=0.000000" in out and "f1_1px=0.000000" in out


def test_eval_shape_mismatch_exits_two(tmp_path, capsys):
    write_mask_png(tmp_path / "a.png", BinaryMask(np.zeros((4, 4), dtype=np.uint8)))
    write_mask_png(tmp_path / "b.png", BinaryMask(np.zeros((5, 5), dtype=np.uint8)))
    assert main(["eval", "--pred", str(tmp_path / "a.png"), "--gt", str(tmp_path / "b.png")]) == 2
    capsys.readouterr()


def test_gradcheck_command(capsys):
    code = main(
        ["gradcheck", "--seed", "3", "--count", "1", "--height", "6", "--width", "6",
         "--channels", "2", "--steps", "2"]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "max_rel_err=" in out


def test_segment_divergence_exits_three(tmp_path, capsys):
    huge = np.empty((1, 8, 8))
    huge[0] = np.where(np.add.outer(np.arange(8), np.arange(8)) % 2 == 0, 1e200, -1e200)
    write_field_file(tmp_path / "huge.lsf", FeatureField(huge))
    code = main(
        ["segment", "--mode", "feature", "--features", str(tmp_path / "huge.lsf"),
         "--box", "2,2,5,5", "--steps", "3", "--out", str(tmp_path / "d")]
    )
    captured = capsys.readouterr()
    assert code == 3
    assert "step" in captured.err


def test_classic_mode_from_png(tmp_path, capsys):
    from levelset.fileio import write_gray_png
    from levelset import grayscale_projection

    spec = SynthSpec(seed=13, height=48, width=48, shape="disk", noise_sigma=0.05)
    features, gt, _ = generate(spec)
    write_gray_png(tmp_path / "img.png", grayscale_projection(features))
    write_mask_png(tmp_path / "gt.png", gt)
    out = tmp_path / "classic"
    code = main(
        ["segment", "--image", str(tmp_path / "img.png"), "--init-mask", str(tmp_path / "gt.png"),
         "--steps", "40", "--mu", "0.02", "--out", str(out)]
    )
    assert code == 0
    capsys.readouterr()
    from levelset import mask_iou

    assert mask_iou(read_mask_png(out / "mask.png"), gt) > 0.95


def test_evolve_alias(tmp_path, capsys):
    spec = tmp_path / "spec.cfg"
    _write_synth_spec(spec, seed=15)
    main(["synth", "--spec", str(spec), "--out", str(tmp_path / "data")])
    code = main(
        ["evolve", "--mode", "feature", "--features", str(tmp_path / "data" / "features.lsf"),
         "--box", "8,8,40,40", "--steps", "2", "--eps", "1.0,0.8", "--dt", "0.5,0.25",
         "--out", str(tmp_path / "e")]
    )
    assert code == 0
    capsys.readouterr()
    assert len(read_energy_csv(tmp_path / "e" / "energies.csv")) == 3


def test_schedule_length_mismatch_is_usage_error(tmp_path, capsys):
    spec = tmp_path / "spec.cfg"
    _write_synth_spec(spec, seed=16)
    main(["synth", "--spec", str(spec), "--out", str(tmp_path / "data")])
    code = main(
        ["segment", "--mode", "feature", "--features", str(tmp_path / "data" / "features.lsf"),
         "--box", "8,8,40,40", "--steps", "3", "--eps", "1.0,0.8", "--out", str(tmp_path / "x")]
    )
    assert code == 1
    capsys.readouterr()


def test_invalid_threads_env_is_usage_error(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("LEVELSET_THREADS", "many")
    spec = tmp_path / "spec.cfg"
    _write_synth_spec(spec, seed=17)
    assert main(["synth", "--spec", str(spec), "--out", str(tmp_path / "data")]) == 1
    capsys.readouterr()


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "levelset", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "segment" in proc.stdout
