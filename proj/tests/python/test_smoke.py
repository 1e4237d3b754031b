"""Smoke tests for the python surface of the conversion core."""

import math
import os
import tempfile

import numpy as np
import pytest

import cyclevc


def test_ops_match_hand_values():
    x = np.array([[[[1.0, 2.0, 3.0]]]])  # (1,1,1,3)
    k = np.array([[[[1.0, 1.0]]]])       # (1,1,1,2)
    b = np.zeros(1)
    y = cyclevc.conv2d(x, k, b)
    assert y.shape == (1, 1, 1, 2)
    assert np.allclose(y.ravel(), [3.0, 5.0])

    g = cyclevc.glu(np.array([[[[2.0]], [[20.0]]]]))
    assert g.shape == (1, 1, 1, 1)
    assert abs(g.ravel()[0] - 2.0) < 1e-6

    z = cyclevc.instance_norm(
        np.array([[[[1.0, 2.0, 3.0]]]]), np.ones(1), np.zeros(1), eps=1e-12
    )
    assert np.allclose(z.ravel(), [-1.2247448, 0.0, 1.2247448], atol=1e-5)

    ps = cyclevc.pixel_shuffle(np.arange(4.0).reshape(1, 4, 1, 1), 2, 2)
    assert ps.shape == (1, 1, 2, 2)
    assert np.allclose(ps.ravel(), [0, 1, 2, 3])


def test_grad_check_table():
    rows = dict(cyclevc.grad_check_all(42))
    for op in ("conv1d", "conv2d", "glu", "instance_norm", "pixel_shuffle"):
        assert rows[op] < 1e-4


def test_generator_shape_preservation():
    gen = cyclevc.Generator("2-1-2d", q=20, base_channels=2, n_res=1, seed=3)
    x = np.random.default_rng(0).normal(size=(20, 64))
    y = gen.forward(x)
    assert y.shape == (20, 64)
    assert np.isfinite(y).all()
    assert gen.n_parameters > 0

    with pytest.raises(ValueError):
        gen.forward(np.zeros((20, 30)))  # T not divisible by 4


def test_discriminator_scores():
    d = cyclevc.Discriminator("patch", q=20, base_channels=2, t_ref=64, seed=4)
    scores = d.forward(np.random.default_rng(1).normal(size=(20, 64)))
    assert scores.size > 1


def test_losses():
    real = np.ones((1, 1, 1, 3))
    fake = np.zeros((1, 1, 1, 3))
    assert cyclevc.lsgan_d_loss(real, fake) == pytest.approx(0.0)
    assert cyclevc.lsgan_g_loss(fake) == pytest.approx(1.0)
    x = np.random.default_rng(2).normal(size=(4, 10))
    assert cyclevc.cycle_loss(x, x, x, x) == pytest.approx(0.0)


def test_feature_file_roundtrip_and_metrics():
    rng = np.random.default_rng(3)
    f = rng.normal(size=(6, 80)).astype(np.float32).astype(np.float64)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "u.mcp")
        cyclevc.write_features(path, f)
        g = cyclevc.read_features(path)
    assert np.array_equal(f, g)

    assert cyclevc.mcd(f, f) == pytest.approx(0.0)
    assert cyclevc.msd(f, f) == pytest.approx(0.0)
    path_steps = cyclevc.dtw_align(f, f)
    assert path_steps[0] == (0, 0)
    assert path_steps[-1] == (79, 79)

    d = cyclevc.differential_mceps(f, f)
    assert np.all(d == 0.0)

    assert cyclevc.convert_f0(5.2, 5.0, 0.2, 5.5, 0.1) == pytest.approx(5.6)


def test_end_to_end_pipeline():
    with tempfile.TemporaryDirectory() as tmp:
        spec = os.path.join(tmp, "synth.cfg")
        with open(spec, "w") as fh:
            fh.write("seed=5\nn_train=3\nn_eval=2\nq=6\nt_min=40\nt_max=48\n")
        data = os.path.join(tmp, "data")
        cyclevc.synth(spec, data)

        cfg = os.path.join(tmp, "run.cfg")
        with open(cfg, "w") as fh:
            fh.write(
                "train_manifest_x=data/manifest_a_train.txt\n"
                "train_manifest_y=data/manifest_b_train.txt\n"
                "iterations=3\ncrop_frames=16\nbase_channels=2\nn_res=1\n"
                "id_cutoff_iter=2\nadv_steps=2\nseed=9\n"
                f"out_dir={os.path.join(tmp, 'run')}\n"
            )
        cyclevc.train(cfg)

        ckpt = os.path.join(tmp, "run", "ckpt_final.cvc2")
        out = os.path.join(tmp, "converted")
        cyclevc.convert(ckpt, os.path.join(data, "a", "eval"), out, "xy")

        report = os.path.join(tmp, "report.csv")
        cyclevc.evaluate(out, os.path.join(data, "oracle"),
                         os.path.join(data, "pairs_xy.txt"), report)
        with open(report) as fh:
            lines = fh.read().strip().splitlines()
        assert len(lines) == 3  # two eval pairs + summary
        assert lines[-1].startswith("summary,")
        mcd_value = float(lines[0].split(",")[1])
        assert math.isfinite(mcd_value)
