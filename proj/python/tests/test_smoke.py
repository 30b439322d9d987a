import json
import os
import tempfile

import numpy as np
import pytest

import docdet


def test_text_metrics():
    assert docdet.edit_distance("kitten", "sitting") == 3
    assert docdet.cer("abce", "abcd") == pytest.approx(0.25)
    assert docdet.cer("xy", "") == pytest.approx(2.0)
    assert docdet.wer("a b c", "a b d") == pytest.approx(1 / 3)


def test_rasterize_rectangle_center_sampling():
    mask = docdet.rasterize_polygon([(0, 0), (4, 0), (4, 2), (0, 2)], 10, 10)
    assert mask.shape == (10, 10)
    assert mask.sum() == 8
    assert mask[:2, :4].all()


def test_ap_single_prediction_at_iou_062():
    # 100 px ground truth, prediction covering 62 of them exactly
    gt = [(0, 0), (10, 0), (10, 10), (0, 10)]
    pred = [(0, 0), (10, 0), (10, 6.2), (0, 6.2)]
    assert docdet.mask_iou(pred, gt, 20, 20) == pytest.approx(0.6)
    pred = [(0, 0), (31, 0), (31, 2), (0, 2)]
    gt = [(0, 0), (50, 0), (50, 2), (0, 2)]
    assert docdet.mask_iou(pred, gt, 64, 4) == pytest.approx(0.62)
    r = docdet.map_over_thresholds([pred], [0.9], [gt], 64, 4)
    assert r["map"] == pytest.approx(0.3, abs=1e-12)


def test_extract_and_pce():
    probs = np.zeros((2, 10, 10), dtype=np.float32)
    probs[0] = 1.0
    probs[1, 2:6, 2:6] = 0.9
    probs[0, 2:6, 2:6] = 0.1
    objs = docdet.extract_objects(probs, threshold=0.7, min_cc=1)
    assert len(objs) == 1
    assert objs[0]["pixels"] == 16
    assert objs[0]["confidence"] == pytest.approx(0.9, abs=1e-6)
    assert docdet.pce(probs, [objs[0]["outline"]]) == pytest.approx(0.9, abs=1e-6)


def test_ensemble_estimators():
    assert docdet.dov([1, 2, 3]) == pytest.approx(1.0)
    assert docdet.dov([0, 5, 10]) == pytest.approx(25.0)
    box = [(2, 2), (12, 2), (12, 12), (2, 12)]
    assert docdet.dap([[box]] * 4, 32, 32) == pytest.approx(1.0)


def test_selection_and_rejection():
    assert docdet.select_images(["a", "b"], [0.1, 0.9], "lowest", budget=1) == ["a"]
    assert docdet.select_images(["a", "b"], [0.1, 0.9], "highest", budget=1) == ["b"]
    curve = docdet.rejection_curve([0.5, 0.5, 0.5], [0.2, 0.4, 0.6])
    assert len(curve) == 1
    assert curve[0]["metric"] == pytest.approx(0.4)


def test_forest_constant_targets():
    x = [[float(i), float(i % 3)] for i in range(20)]
    forest = docdet.RegressionForest.train(x, [0.25] * 20, num_trees=10, seed=1)
    assert forest.predict([3.0, 1.0]) == pytest.approx(0.25)
    again = docdet.RegressionForest.from_json(forest.to_json())
    assert again.to_json() == forest.to_json()


def test_cli_round_trip():
    base = os.environ.get("DOCDET_TEST_TMP")
    if base:
        os.makedirs(base, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=base) as tmp:
        code, out, _ = docdet.run(["synth", "--out-dir", tmp, "--pages", "4", "--seed", "3", "--drop", "0",
                                   "--spurious", "0", "--jitter", "0", "--text-mutation", "0"])
        assert code == 0
        manifest = json.loads(out)["manifest"]
        obj = docdet.evaluate("object", manifest)
        assert obj["map"] == pytest.approx(1.0)
        pix = docdet.evaluate("pixel", manifest)
        assert pix["micro_macro"]["iou"] == pytest.approx(1.0)
        text = docdet.evaluate("text", manifest)
        assert text["cer"] == pytest.approx(0.0)
        code, _, err = docdet.run(["no-such-command"])
        assert code == 2
        assert "unknown subcommand" in err


def test_errors_are_typed():
    with pytest.raises(docdet.DocdetError):
        docdet.dov([1])
