"""Image I/O, paired corpora, synthetic rain streaks, and procedural test scenes.

Everything here is deterministic for a fixed seed so the whole engine stays
testable without external datasets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .autodiff import Tensor
from .errors import DataError

RAIN_PARAMS_FILENAME = "rain_params.txt"


def load_image(path) -> Tensor:
    """Read an 8-bit RGB PNG into a (1, 3, h, w) tensor with values v / 255."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.format != "PNG":
                raise DataError(f"{path}: expected a PNG file, got {img.format}")
            if img.mode != "RGB":
                raise DataError(f"{path}: expected 8-bit RGB, got mode {img.mode}")
            arr = np.asarray(img, dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise DataError(f"{path}: cannot read image ({exc})") from exc
    chw = arr.astype(np.float32).transpose(2, 0, 1) / np.float32(255.0)
    return Tensor(chw[np.newaxis])


def save_image(img: Tensor | np.ndarray, path) -> None:
    """Clamp to [0, 1], quantize with round-half-up, and write an RGB PNG."""
    arr = img.data if isinstance(img, Tensor) else np.asarray(img)
    if arr.ndim == 4:
        if arr.shape[0] != 1:
            raise DataError(f"save_image expects batch size 1, got {arr.shape[0]}")
        arr = arr[0]
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise DataError(f"save_image expects a (3, h, w) image, got shape {arr.shape}")
    clipped = np.clip(arr.astype(np.float64), 0.0, 1.0)
    quantized = np.floor(clipped * 255.0 + 0.5).astype(np.uint8)
    path = Path(path)
    try:
        Image.fromarray(quantized.transpose(1, 2, 0), mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise DataError(f"{path}: cannot write image ({exc})") from exc


@dataclass(frozen=True)
class RainParams:
    """Synthetic rain-streak settings; streaks only brighten (additive model)."""

    density: float = 1200.0  # streaks per megapixel
    angle_deg: float = 75.0  # mean streak angle, degrees from vertical
    angle_jitter_deg: float = 8.0
    length_px: float = 14.0
    length_jitter_px: float = 5.0
    width_px: float = 1.2
    intensity: float = 0.7  # additive brightness of the streak layer
    blur_sigma: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.density < 0:
            raise ValueError("rain density must be >= 0")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError("rain intensity must be in [0, 1]")

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for f in fields(self):
                fh.write(f"{f.name}={getattr(self, f.name)}\n")

    @classmethod
    def load(cls, path) -> "RainParams":
        values = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, raw = line.partition("=")
                values[key.strip()] = raw.strip()
        kwargs = {}
        for f in fields(cls):
            if f.name in values:
                kwargs[f.name] = int(values[f.name]) if f.name == "seed" else float(values[f.name])
        return cls(**kwargs)


def _streak_layer(h: int, w: int, p: RainParams, rng: np.random.Generator) -> np.ndarray:
    count = int(round(p.density * (h * w) / 1e6))
    layer = np.zeros((h, w), dtype=np.float32)
    half_w = max(p.width_px, 0.3) / 2.0
    for _ in range(count):
        cy = rng.uniform(0, h)
        cx = rng.uniform(0, w)
        angle = math.radians(p.angle_deg + rng.uniform(-1.0, 1.0) * p.angle_jitter_deg)
        length = max(2.0, p.length_px + rng.uniform(-1.0, 1.0) * p.length_jitter_px)
        dy, dx = math.cos(angle), math.sin(angle)
        y0, x0 = cy - dy * length / 2.0, cx - dx * length / 2.0
        y1, x1 = cy + dy * length / 2.0, cx + dx * length / 2.0
        lo_y = max(int(math.floor(min(y0, y1) - half_w - 1)), 0)
        hi_y = min(int(math.ceil(max(y0, y1) + half_w + 1)) + 1, h)
        lo_x = max(int(math.floor(min(x0, x1) - half_w - 1)), 0)
        hi_x = min(int(math.ceil(max(x0, x1) + half_w + 1)) + 1, w)
        if lo_y >= hi_y or lo_x >= hi_x:
            continue
        yy, xx = np.mgrid[lo_y:hi_y, lo_x:hi_x]
        # distance from each pixel center to the segment
        vy, vx = y1 - y0, x1 - x0
        norm2 = vy * vy + vx * vx
        ty = yy - y0
        tx = xx - x0
        t = np.clip((ty * vy + tx * vx) / norm2, 0.0, 1.0)
        dist = np.hypot(ty - t * vy, tx - t * vx)
        # anti-aliased coverage with a one-pixel soft edge
        cover = np.clip(half_w + 0.5 - dist, 0.0, 1.0)
        np.maximum(layer[lo_y:hi_y, lo_x:hi_x], cover.astype(np.float32), out=layer[lo_y:hi_y, lo_x:hi_x])
    if p.blur_sigma > 0 and count > 0:
        layer = ndimage.gaussian_filter(layer, sigma=p.blur_sigma).astype(np.float32)
    return np.clip(layer, 0.0, 1.0)


def synthesize_rain(clean: Tensor, p: RainParams) -> Tensor:
    """Add oriented bright streaks to a clean [0, 1] image; deterministic per seed."""
    arr = clean.data
    if arr.ndim != 4:
        raise DataError(f"synthesize_rain expects a 4-D image tensor, got shape {clean.shape}")
    rng = np.random.default_rng(p.seed)
    out = np.empty_like(arr)
    for b in range(arr.shape[0]):
        layer = _streak_layer(arr.shape[2], arr.shape[3], p, rng) * np.float32(p.intensity)
        out[b] = np.clip(arr[b] + layer[np.newaxis], 0.0, 1.0)
    return Tensor(out)


class PairedCorpus:
    """Clean/rainy image pairs, matched by filename stem across two directories.

    Pairs can also be held in memory (see :meth:`from_arrays`). Images are
    loaded lazily and cached as float32 (3, h, w) arrays.
    """

    def __init__(self, names, loaders):
        if len(names) != len(loaders):
            raise ValueError("names and loaders must align")
        if not names:
            raise DataError("corpus is empty")
        self.names = list(names)
        self._loaders = list(loaders)
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    @classmethod
    def from_dir(cls, root) -> "PairedCorpus":
        root = Path(root)
        clean_dir, rainy_dir = root / "clean", root / "rainy"
        for d in (clean_dir, rainy_dir):
            if not d.is_dir():
                raise DataError(f"{d}: corpus directory not found")
        clean = {p.stem: p for p in sorted(clean_dir.glob("*.png"))}
        rainy = {p.stem: p for p in sorted(rainy_dir.glob("*.png"))}
        unmatched = sorted(set(clean) ^ set(rainy))
        if unmatched:
            raise DataError(f"{root}: unpaired stems: {', '.join(unmatched)}")
        if not clean:
            raise DataError(f"{root}: no PNG pairs found")
        names = sorted(clean)
        loaders = [(clean[stem], rainy[stem]) for stem in names]
        return cls(names, loaders)

    @classmethod
    def from_arrays(cls, clean_images, rainy_images, names=None) -> "PairedCorpus":
        clean_images = list(clean_images)
        rainy_images = list(rainy_images)
        if len(clean_images) != len(rainy_images):
            raise DataError(
                f"got {len(clean_images)} clean and {len(rainy_images)} rainy images"
            )
        names = list(names) if names is not None else [f"pair[{i}]" for i in range(len(clean_images))]
        corpus = cls(names, list(zip(clean_images, rainy_images)))
        return corpus

    def __len__(self) -> int:
        return len(self.names)

    def _materialize(self, source) -> np.ndarray:
        if isinstance(source, (str, Path)):
            return load_image(source).data[0]
        arr = np.asarray(source, dtype=np.float32)
        if arr.ndim == 4 and arr.shape[0] == 1:
            arr = arr[0]
        if arr.ndim != 3 or arr.shape[0] != 3:
            raise DataError(f"corpus images must be (3, h, w), got shape {arr.shape}")
        return arr

    def pair(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        """The (clean, rainy) float32 arrays for one entry; dims must match."""
        if index not in self._cache:
            clean_src, rainy_src = self._loaders[index]
            clean = self._materialize(clean_src)
            rainy = self._materialize(rainy_src)
            if clean.shape != rainy.shape:
                raise DataError(
                    f"{self.names[index]}: clean {clean.shape[1:]} and rainy "
                    f"{rainy.shape[1:]} dimensions differ"
                )
            self._cache[index] = (clean, rainy)
        return self._cache[index]

    def check_min_size(self, patch_size: int) -> None:
        for i, name in enumerate(self.names):
            clean, _ = self.pair(i)
            if min(clean.shape[1], clean.shape[2]) < patch_size:
                raise DataError(
                    f"{name}: image {clean.shape[1]}x{clean.shape[2]} smaller than "
                    f"patch size {patch_size}"
                )


def build_corpus(clean_dir, out_dir, p: RainParams) -> PairedCorpus:
    """Mirror a directory of clean PNGs into ``out_dir/clean`` and ``out_dir/rainy``.

    Rain for each image uses a seed derived from (p.seed, image index), so the
    output is byte-identical across runs and independent of parallelism.
    """
    clean_dir = Path(clean_dir)
    if not clean_dir.is_dir():
        raise DataError(f"{clean_dir}: clean image directory not found")
    sources = sorted(clean_dir.glob("*.png"))
    if not sources:
        raise DataError(f"{clean_dir}: no PNG images found")
    out_dir = Path(out_dir)
    (out_dir / "clean").mkdir(parents=True, exist_ok=True)
    (out_dir / "rainy").mkdir(parents=True, exist_ok=True)
    for index, src in enumerate(sources):
        clean = load_image(src)
        rng_seed = np.random.SeedSequence([p.seed, index]).generate_state(1)[0]
        rainy = synthesize_rain(clean, _with_seed(p, int(rng_seed)))
        save_image(clean, out_dir / "clean" / src.name)
        save_image(rainy, out_dir / "rainy" / src.name)
    p.save(out_dir / RAIN_PARAMS_FILENAME)
    return PairedCorpus.from_dir(out_dir)


def _with_seed(p: RainParams, seed: int) -> RainParams:
    values = {f.name: getattr(p, f.name) for f in fields(p)}
    values["seed"] = seed
    return RainParams(**values)


def random_scene(height: int, width: int, seed: int = 0) -> Tensor:
    """Procedural piecewise-smooth scene: gradients plus soft-edged shapes.

    Stands in for natural images in tests and demos; like natural images its
    fine Laplacian levels are sparse and heavy-tailed.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float32)
    yy /= max(height - 1, 1)
    xx /= max(width - 1, 1)
    img = np.empty((3, height, width), dtype=np.float32)
    for c in range(3):
        lo, hi = rng.uniform(0.1, 0.9, size=2)
        wy, wx = rng.uniform(-1.0, 1.0, size=2)
        ramp = (wy * yy + wx * xx - min(wy, 0) - min(wx, 0)) / (abs(wy) + abs(wx) + 1e-6)
        img[c] = lo + (hi - lo) * ramp
    for _ in range(rng.integers(5, 10)):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        ry = rng.uniform(0.08, 0.35) * height
        rx = rng.uniform(0.08, 0.35) * width
        theta = rng.uniform(0, math.pi)
        color = rng.uniform(0.05, 0.95, size=3).astype(np.float32)
        dy, dx = np.mgrid[0:height, 0:width].astype(np.float32)
        dy -= cy
        dx -= cx
        ry_ = np.cos(theta) * dy - np.sin(theta) * dx
        rx_ = np.sin(theta) * dy + np.cos(theta) * dx
        d = np.sqrt((ry_ / ry) ** 2 + (rx_ / rx) ** 2)
        mask = np.clip((1.0 - d) / 0.04, 0.0, 1.0)  # soft edge ~4% of the radius
        img = img * (1 - mask) + color[:, None, None] * mask
    noise = rng.normal(0.0, 0.01, size=(3, height, width)).astype(np.float32)
    img = np.clip(img + ndimage.gaussian_filter(noise, sigma=(0, 1.0, 1.0)), 0.0, 1.0)
    return Tensor(img[np.newaxis].astype(np.float32))


def write_scene_set(out_dir, count: int, height: int, width: int, seed: int = 0) -> list[Path]:
    """Write ``count`` procedural clean scenes as PNGs; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        path = out_dir / f"scene_{i:03d}.png"
        save_image(random_scene(height, width, seed=seed * 100003 + i), path)
        paths.append(path)
    return paths
