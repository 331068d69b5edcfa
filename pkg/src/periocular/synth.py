"""Synthetic periocular benchmark with a known location of the class signal.

Each image holds an eye centred in a 120x160 frame: a dark iris disk
(radius 25) whose statistics are the same for both classes, surrounded by a
periocular annulus (radius 25 to 55) whose texture depends on the class,
on top of subject-specific skin shading shared by both classes. Female
annuli carry fine-grained, slightly brighter texture; male annuli carry
coarse, blotchy texture.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import FEMALE, MALE, SampleRecord, dump_manifest
from .imagecore import CANONICAL_HEIGHT, CANONICAL_WIDTH, GrayImage, OcclusionCircle, write_image

IRIS_RADIUS = 25.0
ANNULUS_OUTER = 55.0
PUPIL_RADIUS = 10.0


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 200
    images_per_subject: int = 2
    width: int = CANONICAL_WIDTH
    height: int = CANONICAL_HEIGHT
    brightness_gap: float = 45.0
    texture_std: float = 22.0
    seed: int = 0

    @property
    def center(self) -> tuple[float, float]:
        return self.width / 2.0, self.height / 2.0


def radial_distance(cfg: SynthConfig) -> np.ndarray:
    cx, cy = cfg.center
    ys = np.arange(cfg.height)[:, None] + 0.5
    xs = np.arange(cfg.width)[None, :] + 0.5
    return np.hypot(xs - cx, ys - cy)


def region_masks(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """Boolean (iris disk, annulus) masks using pixel-centre distances."""
    d = radial_distance(cfg)
    iris = d <= IRIS_RADIUS
    annulus = (d > IRIS_RADIUS) & (d <= ANNULUS_OUTER)
    return iris, annulus


def _smooth_noise(rng, shape, cell: int) -> np.ndarray:
    """Unit-variance noise with correlation length of about ``cell`` pixels."""
    h, w = shape
    coarse = rng.standard_normal((h // cell + 2, w // cell + 2))
    ys = np.arange(h) / cell
    xs = np.arange(w) / cell
    y0, x0 = ys.astype(int), xs.astype(int)
    fy, fx = (ys - y0)[:, None], (xs - x0)[None, :]
    a = coarse[np.ix_(y0, x0)]
    b = coarse[np.ix_(y0, x0 + 1)]
    c = coarse[np.ix_(y0 + 1, x0)]
    d = coarse[np.ix_(y0 + 1, x0 + 1)]
    field = (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy
    return field / field.std()


def render_eye(cfg: SynthConfig, gender: str, skin: np.ndarray, rng) -> np.ndarray:
    shape = (cfg.height, cfg.width)
    d = radial_distance(cfg)
    iris, annulus = region_masks(cfg)
    img = skin + 6.0 * rng.standard_normal(shape)
    if gender == FEMALE:
        texture = cfg.texture_std * rng.standard_normal(shape) + cfg.brightness_gap / 2
    else:
        texture = cfg.texture_std * _smooth_noise(rng, shape, 6) - cfg.brightness_gap / 2
    img = np.where(annulus, img + texture, img)
    iris_tex = 70.0 + 12.0 * _smooth_noise(rng, shape, 3) + 5.0 * rng.standard_normal(shape)
    img = np.where(iris, iris_tex, img)
    img = np.where(d <= PUPIL_RADIUS, 20.0 + 4.0 * rng.standard_normal(shape), img)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def generate(cfg: SynthConfig = SynthConfig()):
    """Yield ``(SampleRecord, GrayImage)`` pairs; half of the subjects are female."""
    rng = np.random.default_rng(cfg.seed)
    shape = (cfg.height, cfg.width)
    cx, cy = cfg.center
    circle = OcclusionCircle(cx, cy, IRIS_RADIUS)
    for s in range(cfg.n_subjects):
        gender = FEMALE if s % 2 == 0 else MALE
        subject = f"s{s:04d}"
        skin = 150.0 + 10.0 * rng.standard_normal() + 15.0 * _smooth_noise(rng, shape, 20)
        for k in range(cfg.images_per_subject):
            eye = "left" if k % 2 == 0 else "right"
            pixels = render_eye(cfg, gender, skin, rng)
            rec = SampleRecord(f"images/{subject}_{k}.pgm", subject, gender, eye, str(k), circle)
            yield rec, GrayImage(cfg.width, cfg.height, pixels)


def write_benchmark(out_dir, cfg: SynthConfig = SynthConfig()) -> Path:
    """Write PGM images and ``manifest.csv`` under ``out_dir``; returns the manifest path."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    records = []
    for rec, img in generate(cfg):
        write_image(out / rec.image_path, img)
        records.append(rec)
    manifest = out / "manifest.csv"
    manifest.write_text(dump_manifest(records))
    return manifest
