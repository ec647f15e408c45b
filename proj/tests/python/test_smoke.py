import math
import os

import numpy as np
import pytest

import unireid

CONFIG = os.environ.get(
    "UNIREID_CONFIG",
    os.path.join(os.path.dirname(__file__), "..", "..", "configs", "smoke.toml"),
)


def test_uniform_losses():
    ones = np.ones((6, 8))
    t2i, i2t = unireid.prompt_contrastive(ones, ones)
    assert t2i == pytest.approx(math.log(6), abs=1e-9)
    assert i2t == pytest.approx(math.log(6), abs=1e-9)
    assert unireid.identity_loss(np.zeros((4, 5)), [0, 1, 2, 3]) == pytest.approx(math.log(5))
    assert unireid.cic_loss(ones, np.ones((5, 8)), [0, 1, 2, 3, 4, 0]) == pytest.approx(
        math.log(5)
    )


def test_triplet_equidistant():
    tet = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    assert unireid.triplet_loss(tet, [0, 0, 1, 1], 0.3) == pytest.approx(0.3, abs=1e-9)


def test_sdm_nonnegative():
    rng = np.random.default_rng(0)
    assert unireid.sdm_loss(rng.normal(size=(4, 8)), rng.normal(size=(4, 8)), [0, 0, 1, 2]) >= 0


def test_retrieval():
    assert unireid.average_precision([1, 0, 1, 0]) == pytest.approx(5 / 6)
    r = unireid.evaluate_retrieval(np.array([[0.9, 0.8, 0.1]]), [4], [4, 4, 1])
    assert r["rank1"] == 1.0
    assert r["mAP"] == 1.0
    assert len(r["cmc"]) == 10


def test_errors_are_typed():
    with pytest.raises(unireid.UnireidError, match="label"):
        unireid.identity_loss(np.zeros((2, 3)), [0, 7])
    with pytest.raises(unireid.UnireidError, match="evaluation"):
        unireid.average_precision([0, 0])


def test_schedules():
    assert unireid.exponential_lr(1, 5e-5, 0.8) == pytest.approx(4e-5)
    assert unireid.warmup_cosine_lr(60, 1e-6, 1e-5, 1e-7, 5, 60) == pytest.approx(1e-7)


def test_config_overrides():
    cfg = unireid.load_config(CONFIG, {"seed": 5, "loss.lambda1": 0.2})
    assert cfg["seed"] == 5
    assert cfg["loss"]["lambda1"] == 0.2
    with pytest.raises(unireid.UnireidError, match="config"):
        unireid.load_config(CONFIG, {"loss.nope": 1})


def test_pipeline(tmp_path):
    overrides = {"output.dir": str(tmp_path)}
    t2i, i2i = unireid.generate(CONFIG, overrides)
    assert os.path.exists(t2i) and os.path.exists(i2i)
    stage1, stage2 = unireid.train(CONFIG, overrides)
    assert os.path.isdir(stage1) and os.path.isdir(stage2)
    first = unireid.evaluate(CONFIG, overrides)
    assert [r["task"] for r in first] == ["t2i", "i2i"]
    for r in first:
        assert 0.0 <= r["mAP"] <= 1.0
    assert unireid.evaluate(CONFIG, overrides) == first
