import json

import numpy as np
import pytest

import synocc


def test_uniform_volume_decodes_to_crop_center():
    spec = synocc.GridSpec()
    vol = np.zeros((spec.depth_bins, spec.heatmap_height, spec.heatmap_width))
    x, y, dz = synocc.soft_argmax3(vol, spec)
    assert x == pytest.approx(128.0, abs=1e-9)
    assert y == pytest.approx(128.0, abs=1e-9)
    assert dz == pytest.approx(0.0, abs=1e-9)


def test_depth_head_center_and_bad_shape():
    zstar = synocc.grid_axes()["zstar"]
    assert synocc.soft_argmax1(np.zeros(len(zstar)), zstar) == pytest.approx(5000.0, abs=1e-9)
    with pytest.raises(ValueError):
        synocc.soft_argmax3(np.zeros((2, 2, 2)))


def test_back_project_round_trip():
    p = synocc.back_project(40.0, 200.0, -120.0, 4000.0, f=1200.0, s=0.5, c=1.1)
    assert p[2] == 4000.0 - 120.0
    xy = synocc.project(p, 1200.0 * 0.5 * 1.1)
    assert np.allclose(xy, [40.0, 200.0], rtol=0, atol=1e-9)
    with pytest.raises(ValueError):
        synocc.back_project(0.0, 0.0, -5000.0, 4000.0)


def test_mpjpe_single_joint_and_flip():
    rng = np.random.default_rng(0)
    gt = rng.uniform(-900, 900, size=(17, 3)).round()
    pred = gt.copy()
    pred[4] += [3.0, 4.0, 0.0]
    assert synocc.mpjpe(pred, gt) == pytest.approx(5.0 / 17.0, abs=1e-12)
    assert synocc.mpjpe(gt, gt) == 0.0
    assert np.array_equal(synocc.flip_pose(synocc.flip_pose(gt)), gt)
    avg = synocc.ensemble_average([gt + 2.0, gt - 2.0])
    assert np.array_equal(avg, gt)


def test_gradcheck_small_run():
    errors = synocc.run_gradcheck(trials=2)
    assert set(errors) == {"soft_argmax3", "soft_argmax1", "back_project", "full_backward"}
    assert max(errors.values()) < 1e-4


def test_cli_exit_codes(tmp_path):
    code, _, _ = synocc.run_cli(["gradcheck", "--trials", "0"])
    assert code == 2
    code, out, _ = synocc.run_cli(["sweep-pocc", "--p-occ-values", "2"])
    assert code == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"J": 4, "toy_samples": 1, "steps": 60, "lr_period": 20}))
    code, out, err = synocc.run_cli(["train-toy", "--config", str(cfg), "--out", str(tmp_path / "run")])
    assert code == 0, err
    report = json.loads((tmp_path / "run" / "train_report.json").read_text())
    assert report["final_loss"] < report["initial_loss"]
