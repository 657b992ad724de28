"""Plain-text key=value run configuration, merged with command-line flags.

Flags win over file values. Unknown keys are rejected naming the offender,
and the effective configuration is echoed at command start so every run is
reproducible from its log.
"""

from __future__ import annotations

from pathlib import Path

from .data import RainParams
from .errors import ConfigError
from .model import ModelConfig
from .train import TrainConfig


def _parse_int_list(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in str(raw).replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"cannot parse integer list from {raw!r}") from exc


def _parse_precision(raw: str) -> str:
    if raw not in ("f32", "f64"):
        raise ConfigError(f"precision must be f32 or f64, got {raw!r}")
    return raw


SCHEMA = {
    # global
    "seed": int,
    "precision": _parse_precision,
    # model architecture
    "levels": int,
    "recursions": int,
    "kernel_counts": _parse_int_list,
    "feature_kernel": int,
    "output_kernel": int,
    "lrelu_slope": float,
    # training
    "learning_rate": float,
    "batch_size": int,
    "patch_size": int,
    "epochs": int,
    "patches_per_epoch": int,
    "checkpoint_every": int,
    "beta1": float,
    "beta2": float,
    "epsilon": float,
    # rain synthesis
    "rain_density": float,
    "rain_angle": float,
    "rain_angle_jitter": float,
    "rain_length": float,
    "rain_length_jitter": float,
    "rain_width": float,
    "rain_intensity": float,
    "rain_blur": float,
    # paths (flags/positionals override)
    "corpus": str,
    "clean_dir": str,
    "out_dir": str,
    "checkpoint": str,
    "input": str,
    "loss_csv": str,
}

DEFAULTS = {
    "seed": 0,
    "precision": "f32",
    "levels": ModelConfig.levels,
    "recursions": ModelConfig.recursions,
    "kernel_counts": ModelConfig.kernel_counts,
    "feature_kernel": ModelConfig.feature_kernel,
    "output_kernel": ModelConfig.output_kernel,
    "lrelu_slope": ModelConfig.lrelu_slope,
    "learning_rate": TrainConfig.learning_rate,
    "batch_size": TrainConfig.batch_size,
    "patch_size": TrainConfig.patch_size,
    "epochs": TrainConfig.epochs,
    "patches_per_epoch": TrainConfig.patches_per_epoch,
    "checkpoint_every": TrainConfig.checkpoint_every,
    "beta1": TrainConfig.beta1,
    "beta2": TrainConfig.beta2,
    "epsilon": TrainConfig.epsilon,
    "rain_density": RainParams.density,
    "rain_angle": RainParams.angle_deg,
    "rain_angle_jitter": RainParams.angle_jitter_deg,
    "rain_length": RainParams.length_px,
    "rain_length_jitter": RainParams.length_jitter_px,
    "rain_width": RainParams.width_px,
    "rain_intensity": RainParams.intensity,
    "rain_blur": RainParams.blur_sigma,
}


class RunConfig:
    """Effective configuration for one command invocation."""

    def __init__(self, values: dict | None = None):
        self.values = dict(DEFAULTS)
        if values:
            self.update(values)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc})") from exc
        values = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, raw = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            values[key.strip()] = raw.strip()
        cfg = cls()
        cfg.update(values, source=str(path))
        return cfg

    def update(self, values: dict, source: str = "flags") -> None:
        for key, raw in values.items():
            if raw is None:
                continue
            if key not in SCHEMA:
                raise ConfigError(f"{source}: unknown config key {key!r}")
            parser = SCHEMA[key]
            try:
                self.values[key] = parser(raw) if not isinstance(raw, (tuple, list)) else tuple(raw)
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{source}: bad value for {key}: {raw!r} ({exc})") from exc

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def echo_lines(self) -> list[str]:
        lines = []
        for key in sorted(self.values):
            value = self.values[key]
            if value is None:
                continue
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"config {key}={value}")
        return lines

    def model_config(self) -> ModelConfig:
        try:
            return ModelConfig(
                levels=self["levels"],
                recursions=self["recursions"],
                kernel_counts=tuple(self["kernel_counts"]),
                feature_kernel=self["feature_kernel"],
                output_kernel=self["output_kernel"],
                lrelu_slope=self["lrelu_slope"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig(
                learning_rate=self["learning_rate"],
                batch_size=self["batch_size"],
                patch_size=self["patch_size"],
                epochs=self["epochs"],
                patches_per_epoch=self["patches_per_epoch"],
                beta1=self["beta1"],
                beta2=self["beta2"],
                epsilon=self["epsilon"],
                seed=self["seed"],
                checkpoint_every=self["checkpoint_every"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def rain_params(self) -> RainParams:
        try:
            return RainParams(
                density=self["rain_density"],
                angle_deg=self["rain_angle"],
                angle_jitter_deg=self["rain_angle_jitter"],
                length_px=self["rain_length"],
                length_jitter_px=self["rain_length_jitter"],
                width_px=self["rain_width"],
                intensity=self["rain_intensity"],
                blur_sigma=self["rain_blur"],
                seed=self["seed"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
