"""Scikit-learn style estimators wrapping the functional core.

``PyramidDerainer`` is fit/predict shaped: fit on paired rainy/clean images,
predict restored images. ``LaplacianPyramid`` is a stateless transformer for
the decomposition itself. Both expose get_params/set_params so they compose
with the wider scikit-learn ecosystem (clone, grid search, pipelines).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .autodiff import Tensor, resolve_precision
from .checkpoint import load_checkpoint, save_checkpoint
from .data import PairedCorpus
from .losses import psnr
from .model import ModelConfig, count_parameters, net_forward
from .pyramid import gaussian_reconstruct, laplacian_decompose
from .train import TrainConfig, train
from .validation import check_image_batch, check_paired_batches


class PyramidDerainer(BaseEstimator):
    """Image derainer built on a Laplacian pyramid of tiny recursive sub-networks.

    Parameters mirror :class:`ModelConfig` and :class:`TrainConfig`; see those
    for semantics. After ``fit`` the learned tensors live in ``params_`` and
    the per-step training losses in ``loss_curve_``.
    """

    def __init__(
        self,
        levels=5,
        recursions=5,
        kernel_counts=(16, 8, 4, 2, 1),
        feature_kernel=3,
        output_kernel=1,
        lrelu_slope=0.2,
        learning_rate=0.001,
        batch_size=10,
        patch_size=80,
        epochs=3,
        patches_per_epoch=500,
        beta1=0.9,
        beta2=0.999,
        epsilon=1e-8,
        precision="f32",
        random_state=0,
    ):
        self.levels = levels
        self.recursions = recursions
        self.kernel_counts = kernel_counts
        self.feature_kernel = feature_kernel
        self.output_kernel = output_kernel
        self.lrelu_slope = lrelu_slope
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.patch_size = patch_size
        self.epochs = epochs
        self.patches_per_epoch = patches_per_epoch
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.precision = precision
        self.random_state = random_state

    def _model_config(self) -> ModelConfig:
        return ModelConfig(
            levels=self.levels,
            recursions=self.recursions,
            kernel_counts=tuple(self.kernel_counts),
            feature_kernel=self.feature_kernel,
            output_kernel=self.output_kernel,
            lrelu_slope=self.lrelu_slope,
        )

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            patch_size=self.patch_size,
            epochs=self.epochs,
            patches_per_epoch=self.patches_per_epoch,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
            seed=self.random_state,
        )

    def fit(self, X, y):
        """Train on paired images: ``X`` rainy, ``y`` the matching clean images."""
        rainy, clean = check_paired_batches(X, y, "X", "y")
        corpus = PairedCorpus.from_arrays(clean, rainy)
        result = train(
            corpus,
            self._train_config(),
            self._model_config(),
            precision=self.precision,
        )
        self.params_ = result.params
        self.loss_curve_ = [row.total for row in result.rows]
        self.n_parameters_ = count_parameters(result.params)
        return self

    def predict(self, X) -> list[np.ndarray]:
        """Derained images in [0, 1], same dims as the inputs."""
        self._check_fitted()
        dtype = resolve_precision(self.precision)
        out = []
        for img in check_image_batch(X, "X", dtype=dtype):
            g_out, _ = net_forward(Tensor(img[np.newaxis]), self.params_)
            out.append(np.clip(g_out[0].data[0], 0.0, 1.0))
        return out

    def score(self, X, y) -> float:
        """Mean PSNR (dB) of the predictions against the clean targets."""
        rainy, clean = check_paired_batches(X, y, "X", "y")
        predictions = self.predict(rainy)
        values = [psnr(Tensor(p), Tensor(c)) for p, c in zip(predictions, clean)]
        return float(np.mean(values))

    def save(self, path) -> None:
        """Write the fitted parameters to a checkpoint file."""
        self._check_fitted()
        save_checkpoint(path, self.params_)

    @classmethod
    def from_checkpoint(cls, path, precision: str = "f32") -> "PyramidDerainer":
        """Build a ready-to-predict estimator from a checkpoint."""
        params, _ = load_checkpoint(path, precision=precision)
        cfg = params.config
        est = cls(
            levels=cfg.levels,
            recursions=cfg.recursions,
            kernel_counts=cfg.kernel_counts,
            feature_kernel=cfg.feature_kernel,
            output_kernel=cfg.output_kernel,
            lrelu_slope=cfg.lrelu_slope,
            precision=precision,
        )
        est.params_ = params
        est.n_parameters_ = count_parameters(params)
        return est

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise RuntimeError("this PyramidDerainer is not fitted; call fit() or from_checkpoint()")


class LaplacianPyramid(BaseEstimator, TransformerMixin):
    """Stateless transformer exposing the pyramid decomposition.

    ``transform`` maps an image batch to a list of per-level arrays (finest to
    coarsest); ``inverse_transform`` collapses levels back to images exactly.
    """

    def __init__(self, levels=5, precision="f32"):
        self.levels = levels
        self.precision = precision

    def fit(self, X, y=None):
        check_image_batch(X, "X")
        return self

    def transform(self, X) -> list[list[np.ndarray]]:
        dtype = resolve_precision(self.precision)
        out = []
        for img in check_image_batch(X, "X", dtype=dtype):
            lap, _ = laplacian_decompose(Tensor(img[np.newaxis]), self.levels)
            out.append([level.data[0] for level in lap])
        return out

    def inverse_transform(self, pyramids) -> list[np.ndarray]:
        out = []
        for levels in pyramids:
            tensors = [Tensor(np.asarray(level)[np.newaxis]) for level in levels]
            gauss = gaussian_reconstruct(tensors, clamp=False)
            out.append(gauss[0].data[0])
        return out
