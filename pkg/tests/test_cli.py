import json
import os

import numpy as np
import pytest

from jointfilter import cli, net, synth
from jointfilter.netpbm import read_image, write_image

TINY = '{"n1": 4, "n2": 4, "f1": 3, "f3": 3, "init_std": 0.2}'


@pytest.fixture
def files(tmp_path, rng):
    write_image(tmp_path / "low.pgm", rng.random((1, 4, 4)), 65535)
    write_image(tmp_path / "rgb.ppm", rng.random((3, 16, 16)))
    write_image(tmp_path / "full.pgm", rng.random((1, 16, 16)), 65535)
    model = net.build_network(net.NetworkConfig(n1=4, n2=4, f1=3, f3=3, init_std=0.2))
    net.save(model, tmp_path / "m.djf")
    return tmp_path


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_no_arguments_prints_synopsis(capsys):
    code, _, err = run(capsys)
    assert code == 1 and "usage" in err


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run(capsys, "apply", "upsample", "--bogus")
    assert code == 1 and "usage" in err


def test_bad_config_is_usage_error(capsys, tmp_path):
    code, _, err = run(capsys, "train", "--manifest", synth.toy_manifest_path(), "--out", tmp_path / "x",
                       "--config", '{"n1": 4, "colour": 1}')
    assert code == 1 and "unknown config keys" in err
    code, _, _ = run(capsys, "train", "--manifest", synth.toy_manifest_path(), "--out", tmp_path / "x",
                     "--config", "[1, 2]")
    assert code == 1


def test_apply_shape_mismatch_is_data_error(capsys, files):
    code, _, err = run(capsys, "apply", "denoise", "--model", files / "m.djf", "--target", files / "low.pgm",
                       "--guidance", files / "rgb.ppm", "--out", files / "o.pgm")
    assert code == 2 and "differ in size" in err


def test_missing_file_is_data_error(capsys, files):
    code, _, err = run(capsys, "apply", "denoise", "--model", files / "nope.djf", "--target", files / "full.pgm",
                       "--guidance", files / "rgb.ppm", "--out", files / "o.pgm")
    assert code == 2 and err.startswith("error:")


def test_apply_upsample_and_denoise(capsys, files):
    code, _, _ = run(capsys, "apply", "upsample", "--model", files / "m.djf", "--target", files / "low.pgm",
                     "--guidance", files / "rgb.ppm", "--scale", 4, "--out", files / "up.pgm")
    assert code == 0 and read_image(files / "up.pgm").shape == (1, 16, 16)
    code, _, _ = run(capsys, "apply", "denoise", "--model", files / "m.djf", "--target", files / "full.pgm",
                     "--guidance", files / "rgb.ppm", "--out", files / "dn.pgm")
    assert code == 0 and read_image(files / "dn.pgm").shape == (1, 16, 16)


@pytest.mark.parametrize("method", ["bicubic", "jbu", "gf"])
def test_baseline(capsys, files, method):
    code, _, _ = run(capsys, "baseline", method, "--target", files / "low.pgm", "--guidance", files / "rgb.ppm",
                     "--scale", 4, "--out", files / f"{method}.pgm")
    assert code == 0 and read_image(files / f"{method}.pgm").shape == (1, 16, 16)


def test_separate_and_features(capsys, files):
    code, _, _ = run(capsys, "separate", "--model", files / "m.djf", "--image", files / "rgb.ppm",
                     "--iterations", 2, "--guidance-mode", "rolling", "--out", files / "s.ppm")
    assert code == 0 and read_image(files / "s.ppm").shape == (3, 16, 16)
    code, out, _ = run(capsys, "features", "--model", files / "m.djf", "--target", files / "full.pgm",
                       "--guidance", files / "rgb.ppm", "--branch", "g", "--layer", 1, "--out", files / "feat")
    assert code == 0 and len(os.listdir(files / "feat")) == 4
    code, _, _ = run(capsys, "features", "--model", files / "m.djf", "--target", files / "full.pgm",
                     "--guidance", files / "rgb.ppm", "--layer", 9, "--out", files / "feat")
    assert code == 2


def test_inspect_checkpoint(capsys, files):
    code, out, _ = run(capsys, "inspect-checkpoint", files / "m.djf")
    info = json.loads(out)
    assert code == 0
    assert info["param_count"] == info["payload_params"] == net.param_count(net.NetworkConfig(**info["config"]))
    assert info["payload_bytes"] == 4 * info["param_count"]


def test_inspect_corrupt_checkpoint(capsys, files):
    (files / "bad.djf").write_bytes(b"XXXX" + bytes(12))
    code, _, err = run(capsys, "inspect-checkpoint", files / "bad.djf")
    assert code == 2 and "bad magic" in err


def test_train_is_deterministic(capsys, tmp_path):
    digests = []
    for k in range(2):
        code, out, _ = run(capsys, "train", "--manifest", synth.toy_manifest_path(), "--scale", 4, "--seed", 7,
                           "--config", TINY, "--patches", 16, "--batch", 8, "--epochs", 3, "--lr", 0.01,
                           "--out", tmp_path / f"m{k}.djf", "--loss-csv", tmp_path / f"l{k}.csv")
        assert code == 0
        digests.append(out.split("sha256 ")[1].strip())
    assert digests[0] == digests[1]
    assert (tmp_path / "m0.djf").read_bytes() == (tmp_path / "m1.djf").read_bytes()
    assert net.load(tmp_path / "m0.djf").config.seed == 7


def test_train_empty_manifest(capsys, tmp_path):
    (tmp_path / "e.jsonl").write_text("")
    code, _, err = run(capsys, "train", "--manifest", tmp_path / "e.jsonl", "--out", tmp_path / "m.djf")
    assert code == 2 and "empty" in err


def test_eval_baselines_and_model(capsys, files):
    man = synth.toy_manifest_path()
    results = {}
    for name in ("identity", "bicubic", "jbu", "gf"):
        code, out, _ = run(capsys, "eval", "--manifest", man, "--scale", 4, "--baseline", name,
                           "--out-json", files / f"{name}.json")
        assert code == 0 and out.startswith("images 8 skipped 0")
        results[name] = json.loads((files / f"{name}.json").read_text())["mean"]
    assert results["identity"] == pytest.approx(results["bicubic"], abs=1e-12)
    code, out, _ = run(capsys, "eval", "--manifest", man, "--scale", 4, "--model", files / "m.djf",
                       "--out-csv", files / "m.csv")
    assert code == 0 and len((files / "m.csv").read_text().splitlines()) == 9


def test_eval_needs_model_or_baseline(capsys):
    code, _, _ = run(capsys, "eval", "--manifest", synth.toy_manifest_path())
    assert code == 1


def test_bench(capsys, files):
    code, out, _ = run(capsys, "--threads", 2, "bench", "--model", files / "m.djf", "--height", 16, "--width", 16)
    res = json.loads(out)
    assert code == 0 and res["threads"] == 2 and len(res["times"]) == 3
    code, out, _ = run(capsys, "bench", "--baseline", "jbu", "--scale", 4, "--height", 16, "--width", 16)
    assert code == 0


def test_threads_must_be_positive(capsys):
    code, _, _ = run(capsys, "--threads", 0, "inspect-checkpoint", "x")
    assert code == 1


def test_bundled_toy_set_is_reproducible(tmp_path):
    synth.write_toy_set(tmp_path)
    bundled = os.path.dirname(synth.toy_manifest_path())
    assert sorted(os.listdir(tmp_path)) == sorted(f for f in os.listdir(bundled) if not f.startswith("_"))
    for name in os.listdir(tmp_path):
        with open(os.path.join(bundled, name), "rb") as fh:
            assert fh.read() == (tmp_path / name).read_bytes(), name


def test_toy_depth_is_guidance_luminance():
    from jointfilter.baselines import luminance
    from jointfilter.manifest import load_pairs, read_manifest
    for depth, rgb in load_pairs(read_manifest(synth.toy_manifest_path())):
        np.testing.assert_allclose(depth, luminance(rgb), atol=1 / 65535)
