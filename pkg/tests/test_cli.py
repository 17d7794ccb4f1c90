import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import photo
from iac.baselines import read_cube
from iac.cli import main
from iac.io import load_image, params_load, save_image


@pytest.fixture
def pair(tmp_path):
    x = photo("coffee", 48)
    save_image(x, tmp_path / "in.png")
    assert main(["synth", "--input", str(tmp_path / "in.png"), "--kind", "gamma", "--gamma", "0.8", "1.0", "1.2",
                 "--out", str(tmp_path / "tgt.png")]) == 0
    return tmp_path / "in.png", tmp_path / "tgt.png"


def fit_args(pair, out, *extra):
    return ["fit", "--input", str(pair[0]), "--target", str(pair[1]), "--out", str(out), "--iters", "60", *extra]


def test_fit_is_bit_identical(pair, tmp_path):
    assert main(fit_args(pair, tmp_path / "a.json", "--seed", "5")) == 0
    assert main(fit_args(pair, tmp_path / "b.json", "--seed", "5")) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_fit_rgb_only(pair, tmp_path, capsys):
    assert main(fit_args(pair, tmp_path / "p.json", "--rgb-only", "--curve-dims", "32")) == 0
    params = params_load(tmp_path / "p.json")
    np.testing.assert_array_equal(params.basis, np.eye(3))
    assert params.curve_dims == 32
    assert "psnr" in capsys.readouterr().out


def test_apply_and_metrics(pair, tmp_path, capsys):
    main(fit_args(pair, tmp_path / "p.json"))
    out = tmp_path / "out.png"
    assert main(["apply", "--input", str(pair[0]), "--params", str(tmp_path / "p.json"), "--out", str(out)]) == 0
    assert load_image(out).shape == load_image(pair[0]).shape
    capsys.readouterr()
    assert main(["metrics", "--a", str(out), "--b", str(pair[1])]) == 0
    text = capsys.readouterr().out
    for key in ("psnr", "ssim", "mse", "mae", "deltaE"):
        assert key in text
    assert main(["metrics", "--a", str(out), "--b", str(pair[1]), "--psnr"]) == 0
    assert capsys.readouterr().out.count("\n") == 1


def test_occupancy(pair, capsys):
    assert main(["occupancy", "--input", str(pair[0])]) == 0
    text = capsys.readouterr().out
    assert "occupancy" in text and "5.53%" in text


def test_lut(pair, tmp_path):
    main(fit_args(pair, tmp_path / "p.json"))
    assert main(["lut", "--params", str(tmp_path / "p.json"), "--size", "9", "--out", str(tmp_path / "t.cube")]) == 0
    assert read_cube(tmp_path / "t.cube").n == 9


def test_bench(pair, capsys):
    assert main(["bench", "--input", str(pair[0]), "--repeat", "2"]) == 0
    assert "ms" in capsys.readouterr().out


def test_gradcheck_exit_zero(capsys):
    assert main(["gradcheck", "--trials", "3"]) == 0
    assert "3/3" in capsys.readouterr().out


def test_missing_input_reports_error(tmp_path, capsys):
    rc = main(["occupancy", "--input", str(tmp_path / "nope.png")])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_singular_params_reported(pair, tmp_path, capsys):
    doc = {"format": "iac-params", "version": 1, "basis": [1, 1, 0, 1, 1, 0, 0, 0, 1], "curve_dims": 2,
           "curves": [[0, 1]] * 3}
    (tmp_path / "s.json").write_text(json.dumps(doc))
    rc = main(["apply", "--input", str(pair[0]), "--params", str(tmp_path / "s.json"), "--out", str(tmp_path / "o.png")])
    assert rc == 2


def test_synth_kinds(pair, tmp_path):
    for kind, extra in [("hue_rotate", ["--angle", "30"]), ("exposure", ["--ev", "-1"]), ("permute", ["--perm", "BGR"]),
                        ("channel_mix", ["--mix", "1", "0", "0", "0", "1", "0", "0", "0", "1"])]:
        out = tmp_path / f"{kind}.png"
        assert main(["synth", "--input", str(pair[0]), "--kind", kind, *extra, "--out", str(out)]) == 0
        assert out.exists()
    np.testing.assert_array_equal(load_image(tmp_path / "channel_mix.png"), load_image(pair[0]))


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "iac", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "gradcheck" in proc.stdout
