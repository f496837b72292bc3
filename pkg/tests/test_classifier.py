import numpy as np
import pytest
import torch

from handgun_pose.classifier import (HandRegionClassifier, ModelConfig, TrainConfig, build_model, load_checkpoint,
                                     save_checkpoint, train)
from handgun_pose.exceptions import CheckpointError, ConfigError, DataError, InputShapeError
from handgun_pose.networks import FULL, HRC, HRC_P, build_network

from conftest import brightness_regions


def _crops(n, seed=0):
    return np.random.default_rng(seed).integers(0, 256, (n, 256, 256, 3), dtype=np.uint8)


def _poses(n, value):
    return np.full((n, 512, 256), value, np.uint8)


@pytest.mark.parametrize("variant", [HRC, HRC_P])
def test_output_shape_and_probabilities(variant):
    clf = build_model(ModelConfig(variant), seed=1)
    X = _crops(3) if variant == HRC else (_crops(3), _poses(3, 1))
    proba = clf.predict_proba(X)
    assert proba.shape == (3, 2)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
    assert set(clf.predict(X)) <= {"handgun", "no_handgun"}


def test_full_backbone_shape():
    net = build_network(HRC, FULL).eval()
    with torch.no_grad():
        out = net(torch.zeros(1, 3, 256, 256))
    assert out.shape == (1, 2)
    convs = [m for m in net.modules() if isinstance(m, torch.nn.Conv2d)]
    assert len(convs) == 52


def test_pose_branch_is_live():
    clf = build_model(ModelConfig(HRC_P), seed=2)
    crops = _crops(2)
    a = clf.predict_proba((crops, _poses(2, 0)))
    b = clf.predict_proba((crops, _poses(2, 1)))
    assert np.abs(a - b).max() > 1e-6


def test_hrc_rejects_nothing_about_pose_and_hrc_p_requires_it():
    clf = build_model(ModelConfig(HRC_P))
    with pytest.raises(DataError):
        clf.predict_region(_crops(1)[0])
    with pytest.raises((DataError, InputShapeError)):
        clf.predict_proba(_crops(2))


def test_bad_crop_shape():
    clf = build_model(ModelConfig(HRC))
    with pytest.raises(InputShapeError):
        clf.predict_proba(np.zeros((1, 128, 128, 3), np.uint8))


@pytest.mark.parametrize("kwargs", [dict(variant="yolo"), dict(backbone_scale="tiny"),
                                    dict(input_region=(128, 128, 3)),
                                    dict(variant=HRC_P, input_pose=(256, 512, 1)),
                                    dict(variant=HRC, input_pose=(512, 256, 1))])
def test_model_config_rejects(kwargs):
    with pytest.raises(ConfigError):
        ModelConfig(**kwargs)


def test_model_config_pose_default():
    assert ModelConfig(HRC_P).input_pose == (512, 256, 1)
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0)


def test_predict_is_pure():
    clf = build_model(ModelConfig(HRC), seed=4)
    X = _crops(2)
    before = {k: v.clone() for k, v in clf.model_.state_dict().items()}
    p1, p2 = clf.predict_proba(X), clf.predict_proba(X)
    np.testing.assert_array_equal(p1, p2)
    for k, v in clf.model_.state_dict().items():
        assert torch.equal(v, before[k])


def test_single_step_reduces_loss_on_one_sample():
    region = brightness_regions(2)[:1]
    clf = HandRegionClassifier(epochs=1, batch_size=1, seed=5).fit(region)
    assert clf.loss_curve_[0] == pytest.approx(clf.initial_loss_)
    after = HandRegionClassifier(epochs=2, batch_size=1, seed=5).fit(region)
    assert after._mean_loss(*after._tensors(*after._unpack(region)[:2]),
                            torch.tensor([1])) < clf.initial_loss_


def test_training_is_deterministic():
    data = brightness_regions(6, seed=1)
    a = HandRegionClassifier(epochs=3, seed=7).fit(data)
    b = HandRegionClassifier(epochs=3, seed=7).fit(data)
    assert a.loss_curve_ == b.loss_curve_
    for (ka, va), (kb, vb) in zip(a.model_.state_dict().items(), b.model_.state_dict().items()):
        assert ka == kb and torch.equal(va, vb)
    assert a.training_meta_["dataset_fingerprint"] == b.training_meta_["dataset_fingerprint"]


def test_fit_accepts_arrays_and_rejects_empty():
    crops = _crops(4)
    clf = HandRegionClassifier(epochs=1).fit(crops, ["handgun", "no_handgun", "handgun", "no_handgun"])
    assert len(clf.loss_curve_) == 1
    HandRegionClassifier(epochs=1).fit(crops, [1, 0, 1, 0])
    with pytest.raises(DataError):
        HandRegionClassifier(epochs=1).fit(crops, ["gun", "no_handgun", "handgun", "no_handgun"])
    with pytest.raises(DataError):
        HandRegionClassifier(epochs=1).fit([])


def test_train_requires_pose_halves_for_fused_variant():
    with pytest.raises(DataError):
        train(build_model(ModelConfig(HRC_P)), brightness_regions(2), TrainConfig(epochs=1))


def test_sklearn_params_round_trip():
    clf = HandRegionClassifier(variant=HRC_P, epochs=3)
    assert clf.get_params()["epochs"] == 3
    assert clf.set_params(seed=9).seed == 9


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    data = brightness_regions(4, seed=2)
    for r in data:
        r.pose_half = (np.random.default_rng(0).random((512, 256)) > 0.5).astype(np.uint8)
    clf = HandRegionClassifier(HRC_P, epochs=2, seed=11).fit(data)
    path = tmp_path_factory.mktemp("ckpt") / "model.pt"
    save_checkpoint(clf, path)
    return clf, data, path


def test_checkpoint_round_trip(trained):
    clf, data, path = trained
    back = load_checkpoint(path)
    np.testing.assert_array_equal(back.predict_proba(data), clf.predict_proba(data))
    assert back.variant == HRC_P and back.epochs == 2 and back.seed == 11
    assert back.loss_curve_ == clf.loss_curve_


def test_checkpoint_wrong_variant(trained):
    with pytest.raises(CheckpointError):
        load_checkpoint(trained[2], variant=HRC)


def test_checkpoint_truncated(trained, tmp_path):
    bad = tmp_path / "bad.pt"
    bad.write_bytes(trained[2].read_bytes()[:200])
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)


def test_checkpoint_config_weights_mismatch(trained, tmp_path):
    payload = torch.load(trained[2], weights_only=True)
    payload["config"]["variant"] = HRC
    bad = tmp_path / "swapped.pt"
    torch.save(payload, bad)
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
