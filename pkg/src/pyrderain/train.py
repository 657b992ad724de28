"""End-to-end training: patch sampling, the Adam loop, checkpoints, loss logging."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tape, Tensor, resolve_precision
from .checkpoint import save_checkpoint
from .data import PairedCorpus
from .errors import DataError, NumericError
from .losses import DEFAULT_SSIM, LossReport, SsimConfig, combined_loss
from .model import ModelConfig, ModelParams, init_params, net_forward
from .optim import AdamState, adam_step


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters.

    One epoch visits ``patches_per_epoch`` randomly sampled patch pairs, so
    the total step count is epochs * ceil(patches_per_epoch / batch_size).
    The paper-scale run (one million patches) is just a larger
    ``patches_per_epoch``; the default is desk scale.
    """

    learning_rate: float = 0.001
    batch_size: int = 10
    patch_size: int = 80
    epochs: int = 3
    patches_per_epoch: int = 500
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 0  # 0 writes only the final checkpoint

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patch_size < 16:
            raise ValueError("patch_size must be >= 16 to survive a 5-level pyramid")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.patches_per_epoch < 1:
            raise ValueError("patches_per_epoch must be >= 1")

    @property
    def total_steps(self) -> int:
        return self.epochs * math.ceil(self.patches_per_epoch / self.batch_size)


@dataclass
class LossRow:
    """One logged optimizer step: loss values before the parameter update."""

    step: int
    total: float
    per_level_l1: list[float]
    per_level_ssim_loss: list[float]

    @classmethod
    def from_report(cls, step: int, report: LossReport) -> "LossRow":
        return cls(step, report.total, list(report.per_level_l1), list(report.per_level_ssim_loss))


def loss_csv_header(levels: int, ssim_levels: int) -> str:
    cols = ["step", "total"]
    cols += [f"l1_{n}" for n in range(1, levels + 1)]
    cols += [f"ssim_{n}" for n in range(1, ssim_levels + 1)]
    return ",".join(cols)


def write_loss_csv(path, rows: list[LossRow], levels: int, ssim_levels: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(loss_csv_header(levels, ssim_levels) + "\n")
        for row in rows:
            values = [f"{v:.9g}" for v in [row.total, *row.per_level_l1, *row.per_level_ssim_loss]]
            fh.write(",".join([str(row.step), *values]) + "\n")


def sample_patch_batch(
    corpus: PairedCorpus,
    cfg: TrainConfig,
    rng: np.random.Generator,
    dtype=np.float32,
) -> tuple[Tensor, Tensor]:
    """Draw ``batch_size`` aligned clean/rainy crops at uniform positions.

    Each batch element independently picks an image index and a top-left
    corner; the clean and rainy crops of a pair share both. Deterministic for
    a fixed generator state.
    """
    ps = cfg.patch_size
    clean_batch = np.empty((cfg.batch_size, 3, ps, ps), dtype=dtype)
    rainy_batch = np.empty((cfg.batch_size, 3, ps, ps), dtype=dtype)
    for i in range(cfg.batch_size):
        index = int(rng.integers(0, len(corpus)))
        clean, rainy = corpus.pair(index)
        h, w = clean.shape[1], clean.shape[2]
        if h < ps or w < ps:
            raise DataError(f"{corpus.names[index]}: image {h}x{w} smaller than patch size {ps}")
        top = int(rng.integers(0, h - ps + 1))
        left = int(rng.integers(0, w - ps + 1))
        clean_batch[i] = clean[:, top : top + ps, left : left + ps]
        rainy_batch[i] = rainy[:, top : top + ps, left : left + ps]
    return Tensor(clean_batch), Tensor(rainy_batch)


@dataclass
class TrainResult:
    params: ModelParams
    state: AdamState
    rows: list[LossRow]


def train(
    corpus: PairedCorpus,
    cfg: TrainConfig = TrainConfig(),
    model_cfg: ModelConfig = ModelConfig(),
    ssim_cfg: SsimConfig = DEFAULT_SSIM,
    precision: str = "f32",
    checkpoint_path=None,
    loss_csv_path=None,
    log=None,
) -> TrainResult:
    """Sample, forward, loss, backward, Adam; repeat for the configured steps.

    The logged loss at step k is the objective evaluated with the parameters
    as they stood before update k, so the step-0 row equals an independent
    evaluation with the initial parameters. Aborts with NumericError if the
    loss goes non-finite; any checkpoints already on disk are retained.
    """
    resolve_precision(precision)
    corpus.check_min_size(cfg.patch_size)
    params = init_params(model_cfg, seed=cfg.seed, precision=precision)
    state = AdamState.for_params(params)
    rng = np.random.default_rng([cfg.seed, 1])
    rows: list[LossRow] = []
    steps = cfg.total_steps
    ssim_levels = min(2, model_cfg.levels)
    dtype = resolve_precision(precision)
    for step in range(steps):
        clean, rainy = sample_patch_batch(corpus, cfg, rng, dtype=dtype)
        with Tape() as tape:
            g_out, _ = net_forward(rainy, params)
            report = combined_loss(g_out, clean, ssim_cfg, ssim_levels=ssim_levels)
        if not math.isfinite(report.total):
            raise NumericError(f"non-finite loss at step {step}; last checkpoint retained")
        rows.append(LossRow.from_report(step, report))
        grad_map = tape.gradients(report.node, params.tensors())
        grads = {name: grad_map[t] for name, t in params.named_tensors()}
        adam_step(
            params,
            grads,
            state,
            learning_rate=cfg.learning_rate,
            beta1=cfg.beta1,
            beta2=cfg.beta2,
            epsilon=cfg.epsilon,
        )
        if log is not None and (step % max(1, steps // 20) == 0 or step == steps - 1):
            log(f"step {step}/{steps} loss {report.total:.6f}")
        if checkpoint_path and cfg.checkpoint_every > 0 and (step + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(Path(f"{checkpoint_path}.step{step + 1:06d}"), params, state)
    if checkpoint_path:
        save_checkpoint(checkpoint_path, params, state)
    if loss_csv_path:
        write_loss_csv(loss_csv_path, rows, model_cfg.levels, ssim_levels)
    return TrainResult(params=params, state=state, rows=rows)
