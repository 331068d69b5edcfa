"""Intensity, texture (uniform LBP) and shape (HOG) descriptors.

Every extractor returns a :class:`FeatureVector` tied to a :class:`FeatureSpec`
that can map each output index back to the extractor, scale and, where one
exists, the pixel region it summarizes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .imagecore import CANONICAL_HEIGHT, CANONICAL_WIDTH, GrayImage

ULBP_POINTS = 8
ULBP_BINS = 59
ULBP_RADII = tuple(range(1, 9))
HOG_BINS = 20
HOG_BIN_DEGREES = 360.0 / HOG_BINS
HOG_GRIDS = (3, 5, 10)
INTENSITY_BINS = 256
CANONICAL_FUSION = ("intensity_hist", "ulbp_concat", "hog:3", "hog:5", "hog:10")


class IndexEntry(NamedTuple):
    extractor: str
    scale: int | None
    locus: tuple


@dataclass(frozen=True)
class FeatureSpec:
    extractor: str
    params: dict = field(default_factory=dict)
    length: int = 0

    def to_dict(self) -> dict:
        return {"extractor": self.extractor, "params": self.params, "length": self.length}

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureSpec":
        return cls(doc["extractor"], doc.get("params", {}), int(doc["length"]))

    def to_json(self) -> str:
        return json.dumps({**self.to_dict(), "spec_id": self.spec_id}, sort_keys=True)

    @property
    def spec_id(self) -> str:
        return _spec_hash(json.dumps(self.to_dict(), sort_keys=True))

    def components(self) -> list["FeatureSpec"]:
        if self.extractor == "fusion":
            return [FeatureSpec.from_dict(d) for d in self.params["components"]]
        return [self]

    def index_map(self) -> list[IndexEntry]:
        if self.extractor == "fusion":
            return [e for comp in self.components() for e in comp.index_map()]
        if self.extractor == "raw":
            w = self.params["width"]
            return [IndexEntry("raw", None, ("pixel", i // w, i % w)) for i in range(self.length)]
        if self.extractor == "intensity_hist":
            return [IndexEntry("intensity_hist", None, ("bin", v)) for v in range(self.length)]
        if self.extractor == "ulbp":
            return [IndexEntry("ulbp", self.params["radius"], ("bin", b)) for b in range(ULBP_BINS)]
        if self.extractor == "hog":
            grid = self.params["grid"]
            return [
                IndexEntry("hog", grid, ("window", i // (HOG_BINS * grid), (i // HOG_BINS) % grid, i % HOG_BINS))
                for i in range(self.length)
            ]
        raise ValueError(f"unknown extractor {self.extractor!r}")

    def pixel_regions(self) -> list[tuple[int, int, int, int] | None]:
        """Per index, the ``(row0, row1, col0, col1)`` pixel box it describes, or None."""
        if self.extractor == "fusion":
            return [r for comp in self.components() for r in comp.pixel_regions()]
        if self.extractor == "raw":
            w = self.params["width"]
            return [(i // w, i // w + 1, i % w, i % w + 1) for i in range(self.length)]
        if self.extractor == "hog":
            grid = self.params["grid"]
            rows = window_edges(self.params["height"], grid)
            cols = window_edges(self.params["width"], grid)
            out = []
            for i in range(self.length):
                wr, wc = i // (HOG_BINS * grid), (i // HOG_BINS) % grid
                out.append((rows[wr], rows[wr + 1], cols[wc], cols[wc + 1]))
            return out
        return [None] * self.length

    @property
    def has_spatial_loci(self) -> bool:
        return all(r is not None for r in self.pixel_regions())


@lru_cache(maxsize=None)
def _spec_hash(canonical: str) -> str:
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    spec: FeatureSpec

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size != self.spec.length:
            raise ValueError(
                f"vector of length {vals.size} does not match spec length {self.spec.length}"
            )
        object.__setattr__(self, "values", vals)

    @property
    def spec_id(self) -> str:
        return self.spec.spec_id

    def __len__(self):
        return self.values.size


def _require_canonical(img: GrayImage) -> None:
    if (img.width, img.height) != (CANONICAL_WIDTH, CANONICAL_HEIGHT):
        raise ValueError(
            f"expected a {CANONICAL_WIDTH}x{CANONICAL_HEIGHT} image, got {img.width}x{img.height}"
        )


def raw_spec(width: int = CANONICAL_WIDTH, height: int = CANONICAL_HEIGHT) -> FeatureSpec:
    return FeatureSpec("raw", {"width": width, "height": height}, width * height)


def raw_features(img: GrayImage) -> FeatureVector:
    _require_canonical(img)
    return FeatureVector(img.data.ravel() / 255.0, raw_spec())


def intensity_spec() -> FeatureSpec:
    return FeatureSpec("intensity_hist", {"bins": INTENSITY_BINS}, INTENSITY_BINS)


def intensity_histogram(img: GrayImage) -> FeatureVector:
    counts = np.bincount(img.data.ravel(), minlength=INTENSITY_BINS)
    return FeatureVector(counts / img.data.size, intensity_spec())


# --- uniform LBP ---------------------------------------------------------

def transitions(pattern: int, bits: int = ULBP_POINTS) -> int:
    """Number of circular 0/1 changes in an 8-bit pattern."""
    return sum(
        ((pattern >> i) & 1) != ((pattern >> ((i + 1) % bits)) & 1) for i in range(bits)
    )


@lru_cache(maxsize=None)
def ulbp_table() -> np.ndarray:
    """256-entry lookup: uniform patterns get bins 0..57 in pattern order, the rest 58."""
    table = np.full(256, ULBP_BINS - 1, dtype=np.intp)
    nxt = 0
    for p in range(256):
        if transitions(p) <= 2:
            table[p] = nxt
            nxt += 1
    assert nxt == ULBP_BINS - 1
    table.flags.writeable = False
    return table


def ulbp_offsets(radius: int) -> list[tuple[float, float]]:
    """(dy, dx) of the 8 circular samples; k=0 points right, then counter-clockwise."""
    out = []
    for k in range(ULBP_POINTS):
        angle = 2.0 * np.pi * k / ULBP_POINTS
        # snap cos/sin residue such as 6e-17 so axis samples land on pixel centers
        dx = round(radius * np.cos(angle), 10)
        dy = round(-radius * np.sin(angle), 10)
        out.append((dy + 0.0, dx + 0.0))
    return out


def ulbp_spec(radius: int) -> FeatureSpec:
    return FeatureSpec("ulbp", {"points": ULBP_POINTS, "radius": radius}, ULBP_BINS)


def ulbp_codes(img: GrayImage, radius: int) -> np.ndarray:
    """Raw 8-bit LBP code for every pixel with a complete neighbourhood."""
    h, w = img.shape
    if radius < 1 or h < 2 * radius + 1 or w < 2 * radius + 1:
        raise ValueError(f"image {w}x{h} too small for radius {radius}")
    src = img.data.astype(np.float64)
    center = src[radius:h - radius, radius:w - radius]
    codes = np.zeros(center.shape, dtype=np.intp)
    for k, (dy, dx) in enumerate(ulbp_offsets(radius)):
        fy, fx = int(np.floor(dy)), int(np.floor(dx))
        ty, tx = dy - fy, dx - fx
        rows = slice(radius + fy, h - radius + fy)
        cols = slice(radius + fx, w - radius + fx)
        rows1 = slice(rows.start + 1, rows.stop + 1) if ty else rows
        cols1 = slice(cols.start + 1, cols.stop + 1) if tx else cols
        a = src[rows, cols]
        b = src[rows, cols1]
        c = src[rows1, cols]
        d = src[rows1, cols1]
        # lerp form keeps equal corners exact, so flat regions compare equal
        top = a + tx * (b - a)
        bot = c + tx * (d - c)
        val = top + ty * (bot - top)
        codes |= (val >= center).astype(np.intp) << k
    return codes


def ulbp_histogram(img: GrayImage, radius: int) -> FeatureVector:
    codes = ulbp_codes(img, radius)
    counts = np.bincount(ulbp_table()[codes.ravel()], minlength=ULBP_BINS)
    return FeatureVector(counts / codes.size, ulbp_spec(radius))


def ulbp_concat_spec() -> FeatureSpec:
    return fusion_spec([ulbp_spec(r) for r in ULBP_RADII], name="ulbp_concat")


def ulbp_concat(img: GrayImage) -> FeatureVector:
    _require_canonical(img)
    return fuse([ulbp_histogram(img, r) for r in ULBP_RADII], name="ulbp_concat")


# --- HOG -----------------------------------------------------------------

def window_edges(n: int, grid: int) -> list[int]:
    return [(i * n) // grid for i in range(grid + 1)]


def hog_spec(grid: int, width: int = CANONICAL_WIDTH, height: int = CANONICAL_HEIGHT) -> FeatureSpec:
    return FeatureSpec(
        "hog",
        {"grid": grid, "bins": HOG_BINS, "width": width, "height": height},
        HOG_BINS * grid * grid,
    )


def gradients(img: GrayImage) -> tuple[np.ndarray, np.ndarray]:
    """Vertical and horizontal central differences on interior pixels."""
    src = img.data.astype(np.float64)
    h = src[1:-1, 2:] - src[1:-1, :-2]
    v = src[2:, 1:-1] - src[:-2, 1:-1]
    return v, h


def hog_window_mass(img: GrayImage, grid: int) -> np.ndarray:
    """Un-normalized ``(grid, grid, 20)`` magnitude histograms."""
    v, h = gradients(img)
    mag = np.sqrt(v * v + h * h)
    theta = np.mod(np.degrees(np.arctan2(v, h)), 360.0)
    bins = np.floor(theta / HOG_BIN_DEGREES).astype(np.intp) % HOG_BINS
    rows = np.arange(1, img.height - 1)
    cols = np.arange(1, img.width - 1)
    row_edges = window_edges(img.height, grid)
    col_edges = window_edges(img.width, grid)
    wr = np.searchsorted(row_edges, rows, side="right") - 1
    wc = np.searchsorted(col_edges, cols, side="right") - 1
    flat = (wr[:, None] * grid + wc[None, :]) * HOG_BINS + bins
    mass = np.bincount(flat.ravel(), weights=mag.ravel(), minlength=grid * grid * HOG_BINS)
    return mass.reshape(grid, grid, HOG_BINS)


def hog_features(img: GrayImage, grid: int) -> FeatureVector:
    _require_canonical(img)
    if grid not in HOG_GRIDS:
        raise ValueError(f"grid must be one of {HOG_GRIDS}")
    mass = hog_window_mass(img, grid)
    norms = np.sqrt((mass * mass).sum(axis=2, keepdims=True))
    out = np.divide(mass, norms, out=np.zeros_like(mass), where=norms > 0)
    return FeatureVector(out.ravel(), hog_spec(grid))


# --- fusion --------------------------------------------------------------

def fusion_spec(components, name: str = "fusion") -> FeatureSpec:
    comps = [c.to_dict() for c in components]
    spec = FeatureSpec("fusion", {"components": comps, "name": name}, sum(c.length for c in components))
    return spec


def fuse(components, name: str = "fusion") -> FeatureVector:
    """Concatenate component vectors in order."""
    components = list(components)
    if not components:
        raise ValueError("fuse needs at least one component")
    if len(components) == 1:
        return components[0]
    values = np.concatenate([c.values for c in components])
    return FeatureVector(values, fusion_spec([c.spec for c in components], name=name))


def segments(spec: FeatureSpec) -> list[tuple[int, int]]:
    bounds, start = [], 0
    for comp in spec.components():
        bounds.append((start, start + comp.length))
        start += comp.length
    return bounds


# --- dispatch by experiment name ------------------------------------------

def extractor_names() -> list[str]:
    names = ["raw", "intensity_hist", "ulbp_concat", "fusion"]
    names += [f"ulbp:{r}" for r in ULBP_RADII]
    names += [f"hog:{b}" for b in HOG_GRIDS]
    return names


def extract(img: GrayImage, name: str) -> FeatureVector:
    """Run the extractor named ``raw``, ``intensity_hist``, ``ulbp:R``,
    ``ulbp_concat``, ``hog:B`` or ``fusion`` (canonical order)."""
    kind, _, arg = name.partition(":")
    if kind == "raw":
        return raw_features(img)
    if kind == "intensity_hist":
        return intensity_histogram(img)
    if kind == "ulbp":
        return ulbp_histogram(img, int(arg))
    if kind == "ulbp_concat":
        return ulbp_concat(img)
    if kind == "hog":
        return hog_features(img, int(arg))
    if kind == "fusion":
        return fuse([extract(img, part) for part in CANONICAL_FUSION])
    raise ValueError(f"unknown extractor {name!r}")


def spec_for(name: str) -> FeatureSpec:
    kind, _, arg = name.partition(":")
    if kind == "raw":
        return raw_spec()
    if kind == "intensity_hist":
        return intensity_spec()
    if kind == "ulbp":
        return ulbp_spec(int(arg))
    if kind == "ulbp_concat":
        return ulbp_concat_spec()
    if kind == "hog":
        return hog_spec(int(arg))
    if kind == "fusion":
        return fusion_spec([spec_for(p) for p in CANONICAL_FUSION])
    raise ValueError(f"unknown extractor {name!r}")


def extract_matrix(images, name: str, jobs: int = 1) -> tuple[np.ndarray, FeatureSpec]:
    """Stack one feature row per image."""
    images = list(images)
    if jobs > 1 and len(images) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            vectors = list(pool.map(lambda im: extract(im, name), images))
    else:
        vectors = [extract(im, name) for im in images]
    spec = vectors[0].spec if vectors else spec_for(name)
    if vectors:
        X = np.vstack([v.values for v in vectors])
    else:
        X = np.zeros((0, spec.length))
    return X, spec


# --- columnar CSV ----------------------------------------------------------

def features_csv(paths, X: np.ndarray, spec: FeatureSpec) -> str:
    """One row per image with ``path`` first; the header carries the spec id."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    paths = list(paths)
    if X.shape != (len(paths), spec.length):
        raise ValueError(f"matrix shape {X.shape} does not match {len(paths)} paths x {spec.length}")
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["path"] + [f"{spec.spec_id}:{i}" for i in range(spec.length)])
    for p, row in zip(paths, X):
        w.writerow([p] + [repr(float(v)) for v in row])
    return out.getvalue()


def read_features_csv(text: str, spec: FeatureSpec) -> tuple[list[str], np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:1] != ["path"]:
        raise ValueError("feature CSV must start with a 'path' column")
    expected = [f"{spec.spec_id}:{i}" for i in range(spec.length)]
    if rows[0][1:] != expected:
        raise ValueError("feature CSV columns do not match the spec")
    body = [r for r in rows[1:] if r]
    paths = [r[0] for r in body]
    X = np.array([[float(v) for v in r[1:]] for r in body]).reshape(len(body), spec.length)
    return paths, X
