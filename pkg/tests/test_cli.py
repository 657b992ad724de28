"""End-to-end command-line interface tests."""

import numpy as np
import pytest
from PIL import Image

from pyrderain import Tensor, init_params, save_checkpoint
from pyrderain.cli import main
from pyrderain.data import random_scene, save_image, write_scene_set
from pyrderain.model import ModelConfig

from conftest import make_corpus_dir

TINY_FLAGS = [
    "--levels", "5",
    "--recursions", "2",
    "--kernel-counts", "4,3,2,2,1",
    "--patch-size", "32",
    "--batch-size", "2",
    "--epochs", "1",
    "--patches-per-epoch", "4",
]


def identity_checkpoint(path, config=ModelConfig()):
    params = init_params(config, seed=1)
    for sub in params.subnets:
        sub.w4.data[:] = 0.0
        sub.b4.data[:] = 0.0
    save_checkpoint(path, params)
    return path


class TestSynth:
    def test_creates_corpus_and_summary(self, tmp_path, capsys):
        write_scene_set(tmp_path / "clean", 3, 48, 48, seed=0)
        code = main(["synth", str(tmp_path / "clean"), str(tmp_path / "corpus")])
        out = capsys.readouterr().out
        assert code == 0
        assert "pairs=3" in out
        assert "mean_rainy_psnr=" in out
        assert len(list((tmp_path / "corpus" / "rainy").glob("*.png"))) == 3

    def test_same_seed_identical_corpora(self, tmp_path):
        write_scene_set(tmp_path / "clean", 2, 40, 40, seed=0)
        assert main(["synth", str(tmp_path / "clean"), str(tmp_path / "a"), "--seed", "9"]) == 0
        assert main(["synth", str(tmp_path / "clean"), str(tmp_path / "b"), "--seed", "9"]) == 0
        for name in ("rainy", "clean"):
            for fa in sorted((tmp_path / "a" / name).glob("*.png")):
                assert fa.read_bytes() == (tmp_path / "b" / name / fa.name).read_bytes()

    def test_missing_clean_dir_is_data_error(self, tmp_path, capsys):
        code = main(["synth", str(tmp_path / "nope"), str(tmp_path / "out")])
        assert code == 2
        assert "nope" in capsys.readouterr().err

    def test_demo_scenes(self, tmp_path, capsys):
        code = main([
            "synth", str(tmp_path / "clean"), str(tmp_path / "corpus"),
            "--demo-scenes", "2", "--demo-size", "40",
        ])
        assert code == 0
        assert len(list((tmp_path / "clean").glob("*.png"))) == 2

    def test_config_echoed(self, tmp_path, capsys):
        write_scene_set(tmp_path / "clean", 1, 40, 40, seed=0)
        main(["synth", str(tmp_path / "clean"), str(tmp_path / "c"), "--rain-density", "500"])
        out = capsys.readouterr().out
        assert "config rain_density=500" in out
        assert "config seed=0" in out


class TestTrain:
    def test_banner_and_outputs(self, tmp_path, capsys):
        root = make_corpus_dir(tmp_path / "corpus", count=2, size=48)
        ck = tmp_path / "model.lpn"
        code = main(["train", str(root), str(ck), *TINY_FLAGS])
        out = capsys.readouterr().out
        assert code == 0
        assert "parameters: " in out
        assert ck.exists()
        csv = tmp_path / "model.lpn.loss.csv"
        assert csv.exists()
        rows = csv.read_text().strip().splitlines()
        assert rows[0].startswith("step,total,l1_1")
        assert len(rows) - 1 == 2  # ceil(4/2) steps x 1 epoch

    def test_default_parameter_banner_is_7548(self, tmp_path, capsys):
        root = make_corpus_dir(tmp_path / "corpus", count=1, size=96)
        code = main(["train", str(root), str(tmp_path / "m.lpn"), "--epochs", "0"])
        out = capsys.readouterr().out
        assert code == 0
        assert "parameters: 7548" in out

    def test_epochs_zero_checkpoint_equals_init(self, tmp_path):
        from pyrderain import load_checkpoint

        root = make_corpus_dir(tmp_path / "corpus", count=1, size=48)
        ck = tmp_path / "m.lpn"
        assert main(["train", str(root), str(ck), *TINY_FLAGS, "--epochs", "0", "--seed", "4"]) == 0
        params, _ = load_checkpoint(ck)
        want = init_params(params.config, seed=4)
        for (_, a), (_, b) in zip(params.named_tensors(), want.named_tensors()):
            np.testing.assert_array_equal(a.data, b.data)

    def test_unknown_config_key_exit_1(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("not_a_key=5\n")
        root = make_corpus_dir(tmp_path / "corpus", count=1, size=48)
        code = main(["train", str(root), str(tmp_path / "m.lpn"), "--config", str(cfg)])
        assert code == 1
        assert "not_a_key" in capsys.readouterr().err

    def test_config_file_supplies_values(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("epochs=0\nkernel_counts=4,3,2,2,1\n")
        root = make_corpus_dir(tmp_path / "corpus", count=1, size=48)
        code = main(["train", str(root), str(tmp_path / "m.lpn"), "--config", str(cfg)])
        out = capsys.readouterr().out
        assert code == 0
        assert "config kernel_counts=4,3,2,2,1" in out
        assert "parameters: " in out


class TestDerain:
    def test_identity_checkpoint_pixel_identical(self, tmp_path):
        ck = identity_checkpoint(tmp_path / "id.lpn")
        src = tmp_path / "in"
        src.mkdir()
        save_image(random_scene(50, 41, seed=3), src / "img.png")
        code = main(["derain", str(ck), str(src), str(tmp_path / "out")])
        assert code == 0
        a = np.asarray(Image.open(src / "img.png"))
        b = np.asarray(Image.open(tmp_path / "out" / "img.png"))
        np.testing.assert_array_equal(a, b)

    def test_arbitrary_size_output_dims(self, tmp_path):
        ck = identity_checkpoint(tmp_path / "id.lpn")
        src = tmp_path / "in"
        src.mkdir()
        save_image(random_scene(97, 81, seed=5), src / "odd.png")
        assert main(["derain", str(ck), str(src), str(tmp_path / "out")]) == 0
        out = np.asarray(Image.open(tmp_path / "out" / "odd.png"))
        assert out.shape == (97, 81, 3)

    def test_undersized_file_reported_others_processed(self, tmp_path, capsys):
        ck = identity_checkpoint(tmp_path / "id.lpn")
        src = tmp_path / "in"
        src.mkdir()
        save_image(random_scene(48, 48, seed=1), src / "ok.png")
        save_image(random_scene(8, 8, seed=2), src / "tiny.png")
        code = main(["derain", str(ck), str(src), str(tmp_path / "out")])
        assert code == 2
        assert (tmp_path / "out" / "ok.png").exists()
        assert not (tmp_path / "out" / "tiny.png").exists()
        assert "tiny.png" in capsys.readouterr().err

    def test_single_file_input(self, tmp_path):
        ck = identity_checkpoint(tmp_path / "id.lpn")
        img = tmp_path / "one.png"
        save_image(random_scene(40, 40, seed=6), img)
        assert main(["derain", str(ck), str(img), str(tmp_path / "out")]) == 0
        assert (tmp_path / "out" / "one.png").exists()


class TestEval:
    def test_identical_dirs(self, tmp_path, capsys):
        d = tmp_path / "imgs"
        d.mkdir()
        save_image(random_scene(32, 32, seed=1), d / "a.png")
        code = main(["eval", str(d), str(d)])
        out = capsys.readouterr().out
        assert code == 0
        assert "name,psnr,ssim" in out
        assert "a,inf,1.00" in out
        assert "mean,inf,1.00" in out

    def test_uniform_offset_pair_is_20db(self, tmp_path, capsys):
        da, db = tmp_path / "a", tmp_path / "b"
        da.mkdir(), db.mkdir()
        base = np.full((1, 3, 16, 16), 100 / 255, dtype=np.float32)
        shifted = base + np.float32(25.5 / 255)
        save_image(Tensor(base), da / "x.png")
        save_image(Tensor(shifted), db / "x.png")
        code = main(["eval", str(da), str(db)])
        out = capsys.readouterr().out
        assert code == 0
        row = [l for l in out.splitlines() if l.startswith("x,")][0]
        assert abs(float(row.split(",")[1]) - 20.0) < 0.05

    def test_unpaired_listed_and_excluded(self, tmp_path, capsys):
        da, db = tmp_path / "a", tmp_path / "b"
        da.mkdir(), db.mkdir()
        save_image(random_scene(24, 24, seed=1), da / "both.png")
        save_image(random_scene(24, 24, seed=2), db / "both.png")
        save_image(random_scene(24, 24, seed=3), da / "only_a.png")
        code = main(["eval", str(da), str(db)])
        captured = capsys.readouterr()
        assert code == 2
        assert "only_a" in captured.err
        assert "only_a" not in captured.out

    def test_matches_library_values(self, tmp_path, capsys):
        from pyrderain import load_image, psnr, ssim_value

        da, db = tmp_path / "a", tmp_path / "b"
        da.mkdir(), db.mkdir()
        save_image(random_scene(32, 32, seed=4), da / "z.png")
        save_image(random_scene(32, 32, seed=5), db / "z.png")
        main(["eval", str(da), str(db)])
        out = capsys.readouterr().out
        row = [l for l in out.splitlines() if l.startswith("z,")][0]
        _, p_str, s_str = row.split(",")
        a, b = load_image(da / "z.png"), load_image(db / "z.png")
        assert p_str == f"{psnr(a, b):.2f}"
        assert s_str == f"{ssim_value(a, b):.2f}"


class TestInspect:
    def test_outputs_for_natural_image(self, tmp_path):
        img = tmp_path / "scene.png"
        save_image(random_scene(64, 64, seed=8), img)
        out = tmp_path / "inspect"
        assert main(["inspect", str(img), str(out)]) == 0
        assert len(list(out.glob("laplacian_*.png"))) == 5
        assert len(list(out.glob("gaussian_*.png"))) == 5
        assert len(list(out.glob("hist_laplacian_*.csv"))) == 5
        stats = (out / "stats.csv").read_text().splitlines()
        assert stats[0].startswith("name,min,max,mean,std,excess_kurtosis")

    def test_constant_image_histogram_mass_in_zero_bin(self, tmp_path):
        img = tmp_path / "flat.png"
        save_image(Tensor(np.full((1, 3, 64, 64), 0.5, dtype=np.float32)), img)
        out = tmp_path / "inspect"
        assert main(["inspect", str(img), str(out)]) == 0
        for n in range(1, 5):
            rows = (out / f"hist_laplacian_{n}.csv").read_text().strip().splitlines()[1:]
            populated = [r for r in rows if int(r.split(",")[2]) > 0]
            assert len(populated) == 1
            lo, hi, _ = populated[0].split(",")
            assert float(lo) <= 0.0 <= float(hi)

    def test_level1_kurtosis_exceeds_image_domain(self, tmp_path):
        img = tmp_path / "scene.png"
        save_image(random_scene(96, 96, seed=12), img)
        out = tmp_path / "inspect"
        assert main(["inspect", str(img), str(out)]) == 0
        rows = {r.split(",")[0]: r.split(",") for r in (out / "stats.csv").read_text().splitlines()[1:]}
        assert float(rows["laplacian_1"][5]) > float(rows["image"][5])


class TestUsage:
    def test_unknown_command_exit_1(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_missing_required_positional_exit_1(self, capsys):
        assert main(["eval", "only_one_dir"]) == 1
