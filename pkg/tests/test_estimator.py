"""Scikit-learn estimator facade."""

import numpy as np
import pytest
from sklearn.base import clone

from pyrderain import LaplacianPyramid, PyramidDerainer, ShapeError
from pyrderain.data import random_scene


def tiny_derainer(**overrides):
    kwargs = dict(
        levels=5,
        recursions=2,
        kernel_counts=(4, 3, 2, 2, 1),
        patch_size=32,
        batch_size=2,
        epochs=1,
        patches_per_epoch=8,
        random_state=0,
    )
    kwargs.update(overrides)
    return PyramidDerainer(**kwargs)


def paired_data(n=3, size=48):
    clean = np.stack([random_scene(size, size, seed=10 + i).data[0] for i in range(n)])
    rainy = np.clip(clean + 0.08, 0.0, 1.0)
    return rainy, clean


class TestSklearnProtocol:
    def test_get_params_round_trip(self):
        est = tiny_derainer()
        params = est.get_params()
        assert params["recursions"] == 2
        est.set_params(recursions=3)
        assert est.recursions == 3

    def test_clone(self):
        est = tiny_derainer()
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_repr_mentions_class(self):
        assert "PyramidDerainer" in repr(tiny_derainer())


class TestFitPredict:
    def test_fit_sets_attributes(self):
        X, y = paired_data()
        est = tiny_derainer().fit(X, y)
        assert hasattr(est, "params_")
        assert est.n_parameters_ > 0
        assert len(est.loss_curve_) == 4  # ceil(8 / 2) per epoch

    def test_predict_shapes_and_range(self):
        X, y = paired_data()
        est = tiny_derainer().fit(X, y)
        outputs = est.predict(X)
        assert len(outputs) == 3
        for out, inp in zip(outputs, X):
            assert out.shape == inp.shape
            assert out.min() >= 0.0 and out.max() <= 1.0

    def test_predict_before_fit_raises(self):
        with pytest.raises(RuntimeError, match="not fitted"):
            tiny_derainer().predict(paired_data()[0])

    def test_score_finite(self):
        X, y = paired_data()
        est = tiny_derainer().fit(X, y)
        assert np.isfinite(est.score(X, y))

    def test_mismatched_pairs_rejected(self):
        X, y = paired_data()
        with pytest.raises(ShapeError):
            tiny_derainer().fit(X, y[:2])

    def test_ragged_image_lists_accepted(self):
        clean = [random_scene(48, 48, seed=1).data[0], random_scene(64, 56, seed=2).data[0]]
        rainy = [np.clip(c + 0.05, 0, 1) for c in clean]
        est = tiny_derainer().fit(rainy, clean)
        outs = est.predict(rainy)
        assert outs[0].shape != outs[1].shape

    def test_checkpoint_round_trip_predictions(self, tmp_path):
        X, y = paired_data()
        est = tiny_derainer().fit(X, y)
        path = tmp_path / "est.lpn"
        est.save(path)
        loaded = PyramidDerainer.from_checkpoint(path)
        a = est.predict(X[:1])[0]
        b = loaded.predict(X[:1])[0]
        np.testing.assert_array_equal(a, b)


class TestLaplacianPyramidTransformer:
    def test_transform_shapes(self):
        X = np.stack([random_scene(64, 64, seed=3).data[0]])
        levels = LaplacianPyramid(levels=5).fit(X).transform(X)
        assert len(levels) == 1
        assert [lvl.shape[1] for lvl in levels[0]] == [64, 32, 16, 8, 4]

    def test_inverse_round_trip(self):
        X = np.stack([random_scene(48, 48, seed=4).data[0]])
        tf = LaplacianPyramid(levels=4)
        rec = tf.inverse_transform(tf.transform(X))
        assert np.abs(rec[0] - X[0]).max() <= 1e-5

    def test_clone(self):
        tf = LaplacianPyramid(levels=3)
        assert clone(tf).get_params()["levels"] == 3
