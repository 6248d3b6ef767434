"""Dataset ingestion, channel ground-truth synthesis, patch handling,
augmentation, fold splitting, and a synthetic degraded-document generator.

The synthetic generator draws stroke-like glyphs in a saturated color over a
two-band background whose luminances straddle the text luminance, so a single
global gray threshold must misclassify either a background band or all text,
while per-channel intensities keep the text separable for the color networks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from docbin.errors import DataError
from docbin.raster import (
    BinaryMask,
    RasterImage,
    mask_resize,
    read_image,
    read_mask,
    resize,
    threshold,
    write_image,
    write_mask,
)
from docbin.rng import derive_seed


@dataclass(frozen=True)
class SamplePair:
    """One dataset entry: paths to the input image and its GT mask."""

    id: str
    input_path: Path
    gt_path: Path


def load_sample(pair: SamplePair) -> tuple[RasterImage, BinaryMask]:
    """Decode a pair and check that dimensions agree."""
    for p in (pair.input_path, pair.gt_path):
        if not Path(p).is_file():
            raise DataError(f"{pair.id}: missing file {p}")
    try:
        img = read_image(pair.input_path)
        gt = read_mask(pair.gt_path)
    except OSError as exc:
        raise DataError(f"{pair.id}: cannot decode ({exc})") from exc
    if (img.height, img.width) != (gt.height, gt.width):
        raise DataError(
            f"{pair.id}: input is {img.width}x{img.height} but GT is {gt.width}x{gt.height}"
        )
    return img, gt


def read_manifest(path: str | Path) -> list[SamplePair]:
    """JSON array of {id, input, gt}; relative paths resolve next to the manifest."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    try:
        entries = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise DataError("manifest must be a JSON array")
    base = path.parent
    pairs = []
    for e in entries:
        try:
            pairs.append(
                SamplePair(
                    id=str(e["id"]),
                    input_path=(base / e["input"]).resolve(),
                    gt_path=(base / e["gt"]).resolve(),
                )
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"manifest entry malformed: {e!r}") from exc
    return sorted(pairs, key=lambda p: p.id)


def write_manifest(path: str | Path, pairs: list[SamplePair]) -> None:
    path = Path(path)
    base = path.parent.resolve()

    def portable(p: Path) -> str:
        p = Path(p).resolve()
        try:
            return str(p.relative_to(base))
        except ValueError:
            return str(p)

    entries = [
        {"id": p.id, "input": portable(p.input_path), "gt": portable(p.gt_path)}
        for p in sorted(pairs, key=lambda p: p.id)
    ]
    path.write_text(json.dumps(entries, indent=2) + "\n")


def scan_pairs(directory: str | Path) -> list[SamplePair]:
    """Auto-pair name.png with name_GT.png in one folder."""
    directory = Path(directory)
    pairs = []
    for img_path in sorted(directory.glob("*.png")):
        if img_path.stem.endswith("_GT"):
            continue
        gt_path = img_path.with_name(img_path.stem + "_GT.png")
        if gt_path.is_file():
            pairs.append(SamplePair(id=img_path.stem, input_path=img_path, gt_path=gt_path))
    return pairs


def build_channel_gt(x_k: RasterImage, y: BinaryMask, t: float = 0.5) -> BinaryMask:
    """Channel ground truth: mask the channel with the GT, then threshold at t.

    Text pixels whose channel intensity falls below t drop to background in
    the channel GT; the result is always a subset of y.
    """
    if x_k.channels != 1:
        raise ValueError("build_channel_gt requires a single-channel image")
    if (x_k.height, x_k.width) != (y.height, y.width):
        raise ValueError(f"dimensions differ: {x_k.data.shape[:2]} vs {y.data.shape}")
    masked = RasterImage(x_k.plane() * y.data)
    return threshold(masked, t)


@dataclass(frozen=True)
class PatchGrid:
    """Row-major patch tiling of an image padded up to padded_size."""

    patch: int
    stride: int
    offsets: tuple[tuple[int, int], ...]
    padded_size: tuple[int, int]  # (w, h)

    def __post_init__(self):
        if self.stride > self.patch or self.stride < 1:
            raise ValueError("require 1 <= stride <= patch")

    @classmethod
    def cover(cls, w: int, h: int, patch: int = 256, stride: int = 256) -> "PatchGrid":
        def axis_offsets(n: int) -> list[int]:
            if n <= patch:
                return [0]
            steps = math.ceil((n - patch) / stride) + 1
            return [i * stride for i in range(steps)]

        xs = axis_offsets(w)
        ys = axis_offsets(h)
        padded = (xs[-1] + patch, ys[-1] + patch)
        offsets = tuple((x, y) for y in ys for x in xs)
        return cls(patch=patch, stride=stride, offsets=offsets, padded_size=padded)


def _pad_for_grid(data: np.ndarray, grid: PatchGrid) -> np.ndarray:
    pw, ph = grid.padded_size
    pad_h = ph - data.shape[0]
    pad_w = pw - data.shape[1]
    widths = [(0, pad_h), (0, pad_w)] + [(0, 0)] * (data.ndim - 2)
    return np.pad(data, widths, mode="symmetric")


def extract_patches(img: RasterImage, grid: PatchGrid) -> list[RasterImage]:
    """Reflect-pad to the grid size and emit patches in row-major order."""
    padded = _pad_for_grid(img.data, grid)
    return [
        RasterImage(padded[y:y + grid.patch, x:x + grid.patch, :])
        for x, y in grid.offsets
    ]


def extract_mask_patches(mask: BinaryMask, grid: PatchGrid) -> list[BinaryMask]:
    padded = _pad_for_grid(mask.data, grid)
    return [
        BinaryMask(padded[y:y + grid.patch, x:x + grid.patch])
        for x, y in grid.offsets
    ]


def stitch_patches(
    patches: list[RasterImage], grid: PatchGrid, out_size: tuple[int, int]
) -> RasterImage:
    """Inverse of extract_patches; overlapping regions are averaged."""
    if len(patches) != len(grid.offsets):
        raise ValueError(f"expected {len(grid.offsets)} patches, got {len(patches)}")
    pw, ph = grid.padded_size
    channels = patches[0].channels
    acc = np.zeros((ph, pw, channels), dtype=np.float64)
    cnt = np.zeros((ph, pw, 1), dtype=np.float64)
    for patch, (x, y) in zip(patches, grid.offsets):
        acc[y:y + grid.patch, x:x + grid.patch, :] += patch.data
        cnt[y:y + grid.patch, x:x + grid.patch, :] += 1.0
    out_w, out_h = out_size
    return RasterImage((acc / cnt)[:out_h, :out_w, :])


@dataclass(frozen=True)
class AugmentationConfig:
    """Which extra pairs augment() emits besides the identity."""

    scales: tuple[float, ...] = ()
    rotations: tuple[int, ...] = ()
    hflip: bool = False
    vflip: bool = False

    def __post_init__(self):
        if any(s <= 0 for s in self.scales):
            raise ValueError("scale factors must be positive")
        if any(r % 90 != 0 for r in self.rotations):
            raise ValueError("only multiples of 90 degrees are supported")


def augment(
    pair: tuple[RasterImage, BinaryMask], cfg: AugmentationConfig
) -> list[tuple[RasterImage, BinaryMask]]:
    """Identity pair plus one pair per enabled transform, in config order.

    GT transforms use nearest-neighbor resampling so masks stay binary.
    """
    img, gt = pair
    out = [(img, gt)]
    for s in cfg.scales:
        sw = max(1, round(img.width * s))
        sh = max(1, round(img.height * s))
        scaled = resize(resize(img, sw, sh, "bilinear"), img.width, img.height, "bilinear")
        scaled_gt = mask_resize(mask_resize(gt, sw, sh), img.width, img.height)
        out.append((scaled, scaled_gt))
    for r in cfg.rotations:
        k = (r // 90) % 4
        out.append((RasterImage(np.rot90(img.data, k, axes=(0, 1))), BinaryMask(np.rot90(gt.data, k))))
    if cfg.hflip:
        out.append((RasterImage(img.data[:, ::-1, :]), BinaryMask(gt.data[:, ::-1])))
    if cfg.vflip:
        out.append((RasterImage(img.data[::-1, :, :]), BinaryMask(gt.data[::-1, :])))
    return out


@dataclass(frozen=True)
class FoldSplit:
    k: int
    seed: int
    assignment: dict[str, int]

    def fold_ids(self, fold: int) -> list[str]:
        return sorted(i for i, f in self.assignment.items() if f == fold)

    def complement_ids(self, fold: int) -> list[str]:
        return sorted(i for i, f in self.assignment.items() if f != fold)


def make_folds(ids: list[str], k: int = 5, seed: int = 0) -> FoldSplit:
    """Seeded shuffle then round-robin assignment; fold sizes differ by <= 1."""
    if len(ids) < k:
        raise ValueError(f"need at least {k} ids, got {len(ids)}")
    ordered = sorted(ids)
    perm = np.random.default_rng(seed).permutation(len(ordered))
    assignment = {ordered[perm[i]]: i % k for i in range(len(ordered))}
    return FoldSplit(k=k, seed=seed, assignment=assignment)


@dataclass(frozen=True)
class SynthSpec:
    """Controls for the synthetic degraded-document generator.

    With text_color/bg_color unset, each document gets red-family text over a
    dark band and a bright band plus optional cyan contaminant blobs; setting
    both colors produces a plain two-tone page (no split, no contaminants).
    """

    size: tuple[int, int] = (128, 128)  # (w, h)
    noise: float = 0.03
    text_color: tuple[float, float, float] | None = None
    bg_color: tuple[float, float, float] | None = None
    contaminants: bool = True
    min_text_frac: float = 0.03
    max_text_frac: float = 0.25

    def __post_init__(self):
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if not 0 < self.min_text_frac < self.max_text_frac < 1:
            raise ValueError("require 0 < min_text_frac < max_text_frac < 1")


def _draw_glyphs(rng: np.random.Generator, w: int, h: int, spec: SynthSpec) -> np.ndarray:
    gt = np.zeros((h, w), dtype=bool)
    total = h * w
    min_px = int(spec.min_text_frac * total)
    max_px = int(spec.max_text_frac * total)
    for _ in range(500):
        if gt.sum() >= min_px:
            break
        horizontal = rng.random() < 0.5
        if horizontal:
            gw = int(rng.integers(6, max(7, w // 4)))
            gh = int(rng.integers(2, 5))
        else:
            gw = int(rng.integers(2, 5))
            gh = int(rng.integers(6, max(7, h // 4)))
        x0 = int(rng.integers(0, max(1, w - gw)))
        y0 = int(rng.integers(0, max(1, h - gh)))
        if gt.sum() + gw * gh > max_px:
            continue
        gt[y0:y0 + gh, x0:x0 + gw] = True
    return gt


def gen_synthetic_doc(seed: int, spec: SynthSpec | None = None) -> tuple[RasterImage, BinaryMask]:
    """Render one synthetic document and its exact glyph mask, seed-determined."""
    spec = spec or SynthSpec()
    rng = np.random.default_rng(seed)
    w, h = spec.size
    canvas = np.empty((h, w, 3), dtype=np.float64)

    if spec.bg_color is not None:
        canvas[:] = np.asarray(spec.bg_color)
    else:
        dark = np.array([
            rng.uniform(0.0, 0.06),
            rng.uniform(0.08, 0.2),
            rng.uniform(0.0, 0.1),
        ])
        bright = np.array([
            rng.uniform(0.55, 0.7),
            rng.uniform(0.75, 0.95),
            rng.uniform(0.6, 0.9),
        ])
        split = rng.uniform(0.35, 0.65)
        if rng.random() < 0.5:
            cut = int(split * w)
            canvas[:, :cut] = dark
            canvas[:, cut:] = bright
        else:
            cut = int(split * h)
            canvas[:cut, :] = dark
            canvas[cut:, :] = bright

        if spec.contaminants and rng.random() < 0.8:
            yy, xx = np.mgrid[0:h, 0:w]
            for _ in range(int(rng.integers(1, 4))):
                cx = rng.uniform(0.1 * w, 0.9 * w)
                cy = rng.uniform(0.1 * h, 0.9 * h)
                rx = rng.uniform(0.06, 0.16) * w
                ry = rng.uniform(0.06, 0.16) * h
                blob = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
                color = np.array([
                    rng.uniform(0.0, 0.1),
                    rng.uniform(0.4, 0.6),
                    rng.uniform(0.75, 0.95),
                ])
                canvas[blob] = color

    gt = _draw_glyphs(rng, w, h, spec)
    if spec.text_color is not None:
        text = np.asarray(spec.text_color, dtype=np.float64)
    else:
        text = np.array([
            rng.uniform(0.75, 0.95),
            rng.uniform(0.02, 0.12),
            rng.uniform(0.02, 0.12),
        ])
    canvas[gt] = text

    if spec.noise > 0:
        canvas = canvas + rng.normal(0.0, spec.noise, canvas.shape)
    return RasterImage(np.clip(canvas, 0.0, 1.0)), BinaryMask(gt)


def synth_manifest(out_dir: str | Path, count: int, seed: int, spec: SynthSpec | None = None) -> Path:
    """Write `count` synthetic pairs plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "inputs").mkdir(parents=True, exist_ok=True)
    (out_dir / "gt").mkdir(parents=True, exist_ok=True)
    pairs = []
    for i in range(count):
        doc_id = f"synth_{i:04d}"
        img, gt = gen_synthetic_doc(derive_seed(seed, "doc", i), spec)
        input_path = out_dir / "inputs" / f"{doc_id}.png"
        gt_path = out_dir / "gt" / f"{doc_id}_GT.png"
        write_image(img, input_path)
        write_mask(gt, gt_path)
        pairs.append(SamplePair(id=doc_id, input_path=input_path, gt_path=gt_path))
    manifest_path = out_dir / "manifest.json"
    write_manifest(manifest_path, pairs)
    return manifest_path
