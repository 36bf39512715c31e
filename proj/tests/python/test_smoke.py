import json
import math

import numpy as np
import pytest

import wifislam


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("c_hall")
    info = wifislam.generate("c_hall", 1, str(out))
    assert info["frames"] > 0
    assert info["gt_loops"] > 0
    return out


def test_pose_algebra():
    a = wifislam.Pose2(1.0, 2.0, 0.5)
    b = wifislam.Pose2(-3.0, 0.5, -1.0)
    d = wifislam.between(a, b)
    back = a * d
    assert back.x == pytest.approx(b.x)
    assert back.y == pytest.approx(b.y)
    assert back.theta == pytest.approx(b.theta)
    ident = a * a.inverse()
    assert abs(ident.x) < 1e-12 and abs(ident.theta) < 1e-12


def test_signatures():
    assert wifislam.strength_of(-100.0) == 0.0
    assert wifislam.strength_of(-40.0) == 60.0
    assert wifislam.mask_bssid("00:11:22:33:44:57") == wifislam.mask_bssid("00:11:22:33:44:50")
    a = {"00:11:22:33:44:50": 40.0, "66:77:88:99:aa:b0": 10.0}
    assert wifislam.cosine_similarity(a, a) == pytest.approx(1.0)
    assert wifislam.cosine_similarity(a, {"de:ad:be:ef:00:00": 5.0}) == 0.0


def test_kabsch_recovers_rigid_motion():
    rng = np.random.default_rng(3)
    gt = rng.uniform(-10, 10, size=(30, 2))
    c, s = math.cos(0.7), math.sin(0.7)
    rot = np.array([[c, -s], [s, c]])
    est = (gt - [2.0, 5.0]) @ rot
    r, t = wifislam.kabsch_align(est, gt)
    assert np.allclose(est @ r.T + t, gt, atol=1e-9)
    assert wifislam.rmse(gt, gt) == 0.0


def test_errors_raise():
    with pytest.raises(wifislam.WifiSlamError, match="a_hall"):
        wifislam.generate("d_hall", 1, "/tmp/unused")
    with pytest.raises(wifislam.WifiSlamError):
        wifislam.kabsch_align(np.zeros((0, 2)), np.zeros((0, 2)))


def test_gated_run_has_no_false_positives(dataset):
    gated = wifislam.run(str(dataset), json.dumps({"policy": "orb", "gated": True}))
    assert gated["fp"] == 0
    assert gated["clusters"] > 0
    assert len(gated["loop_edges"]) > 0
    vanilla = wifislam.run(str(dataset), json.dumps({"policy": "orb", "gated": False}))
    assert vanilla["overhead_cost"] == 0.0
    assert gated["loop_cost"] <= vanilla["loop_cost"]


def test_curve_and_localize(dataset):
    d, s, rho = wifislam.similarity_curve(str(dataset))
    assert len(d) == len(s) > 0
    assert rho < -0.3
    loc = wifislam.localize(str(dataset))
    assert loc["query_count"] == len(loc["errors"])
    assert 0.0 <= loc["within_4m"] <= 1.0


def test_cli_passthrough(dataset, tmp_path):
    code, out, _ = wifislam.cli(["run", str(dataset), "--policy", "rgbd", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "report.csv").exists()
    code, _, err = wifislam.cli(["run", str(dataset), "--policy", "lsd"])
    assert code == 2
