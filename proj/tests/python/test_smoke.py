import json

import numpy as np
import pytest

import visprompt


def tiny_config(tmp_path):
    cfg = visprompt.default_config()
    cfg.update(image_size=16, embed_dim=16, depth=1, heads=2, batch_size=2, steps=4,
               corpus_size=6, checkpoint_every=100, out_dir=str(tmp_path / "run"))
    return cfg


def test_metric_closed_forms():
    zero = np.zeros((16, 16, 3), np.float32)
    half = np.full((16, 16, 3), 0.5, np.float32)
    assert visprompt.psnr(zero, half) == pytest.approx(6.0206, abs=1e-3)
    assert visprompt.ssim(half, half) == 1.0
    assert visprompt.mae(zero, np.ones_like(zero)) == 255.0


def test_operators_roundtrip_arrays():
    img = np.random.default_rng(0).random((16, 16, 3), dtype=np.float32)
    assert "canny" in visprompt.operator_names()
    edges = visprompt.apply("canny", img)
    assert edges.shape == img.shape
    assert set(np.unique(edges)) <= {0.0, 1.0}
    np.testing.assert_array_equal(visprompt.apply("gaussian_noise", img, sigma_255=0.0), img)
    flat = np.full((12, 12, 3), 0.3, np.float32)
    np.testing.assert_array_equal(visprompt.apply("laplacian", flat), np.zeros_like(flat))


def test_errors_surface_as_exceptions():
    img = np.zeros((8, 8, 3), np.float32)
    with pytest.raises(visprompt.Error, match="threshold"):
        visprompt.apply("canny", img, threshold=3)
    with pytest.raises(visprompt.Error):
        visprompt.psnr(img, np.zeros((4, 8, 3), np.float32))


def test_grad_check():
    err, samples = visprompt.grad_check(seed=1)
    assert err < 1e-4
    assert samples >= 200


def test_train_and_infer(tmp_path):
    cfg = tiny_config(tmp_path)
    log, ckpt = visprompt.train(cfg)
    assert [row[0] for row in log] == [1, 2, 3, 4]
    assert all(np.isfinite(row[2]) for row in log)

    model = visprompt.Model(ckpt)
    assert model.step == 4
    assert model.config["embed_dim"] == 16
    pq, pa = visprompt.make_prompt(cfg, "gauss_noise", 0)
    query, _ = visprompt.make_test_pairs(cfg, "gauss_noise", 1)[0]
    out = model.infer(pq, pa, query)
    assert out.shape == (16, 16, 3)
    assert out.min() >= 0.0 and out.max() <= 1.0
    np.testing.assert_array_equal(out, model.infer(pq, pa, query))


def test_cli_in_process(tmp_path):
    code, out, _ = visprompt.run_cli("gradcheck", "--seed", 3)
    assert code == 0 and out.startswith("max_relative_error")
    code, _, err = visprompt.run_cli("eval", "--ckpt", tmp_path / "missing.gipt", "--task", "canny",
                                     "--out", tmp_path / "o")
    assert code != 0
    assert "missing.gipt" in json.loads(err)["message"]
