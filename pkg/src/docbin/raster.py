"""Value-semantic raster and mask primitives.

Images hold normalized float64 intensities in [0, 1] with shape (h, w, c),
c in {1, 3}; masks hold booleans with text = True. All operations are pure
functions on immutable inputs and are safe to call concurrently.

PNG I/O converts 8-bit at the boundary. Masks are serialized with the
document-GT convention (text = black = 0, background = white = 255), the
inverse of the internal text=True encoding.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

# ITU-R BT.601 luma weights.
GRAY_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class RasterImage:
    """W x H x C raster with intensities in [0, 1], C in {1, 3}."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"expected (h, w, c) with c in {{1, 3}}, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image dimensions must be positive, got {arr.shape[:2]}")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("intensities must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def plane(self) -> np.ndarray:
        """2-D view of a single-channel image."""
        if self.channels != 1:
            raise ValueError("plane() requires a single-channel image")
        return self.data[:, :, 0]


@dataclass(frozen=True)
class BinaryMask:
    """W x H boolean foreground map, text = True."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"expected 2-D mask, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask dimensions must be positive, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class StructuringElement:
    """Square structuring element with odd side 2 * radius + 1."""

    radius: int = 1

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("radius must be >= 1")

    @property
    def side(self) -> int:
        return 2 * self.radius + 1


def split_channels(img: RasterImage) -> tuple[RasterImage, RasterImage, RasterImage]:
    """Split a 3-channel image into its (r, g, b) planes."""
    if img.channels != 3:
        raise ValueError("split_channels requires a 3-channel image")
    return tuple(RasterImage(img.data[:, :, k]) for k in range(3))


def merge_channels(r: RasterImage, g: RasterImage, b: RasterImage) -> RasterImage:
    """Inverse of split_channels; planes must share dimensions."""
    for p in (r, g, b):
        if p.channels != 1:
            raise ValueError("merge_channels requires single-channel planes")
    if not (r.data.shape == g.data.shape == b.data.shape):
        raise ValueError("merge_channels requires equal plane dimensions")
    return RasterImage(np.dstack([r.plane(), g.plane(), b.plane()]))


def to_grayscale(img: RasterImage) -> RasterImage:
    """BT.601 luma: 0.299 r + 0.587 g + 0.114 b."""
    if img.channels != 3:
        raise ValueError("to_grayscale requires a 3-channel image")
    wr, wg, wb = GRAY_WEIGHTS
    gray = wr * img.data[:, :, 0] + wg * img.data[:, :, 1] + wb * img.data[:, :, 2]
    # Weights sum to 1 but guard against float dust above 1.0.
    return RasterImage(np.clip(gray, 0.0, 1.0))


def threshold(img: RasterImage, t: float) -> BinaryMask:
    """Fixed threshold; img(p) >= t counts as foreground."""
    if img.channels != 1:
        raise ValueError("threshold requires a single-channel image")
    return BinaryMask(img.plane() >= t)


def logical_and(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    """Pointwise conjunction of two masks of equal dimensions."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"mask dimensions differ: {a.data.shape} vs {b.data.shape}")
    return BinaryMask(a.data & b.data)


def dilate(m: BinaryMask, se: StructuringElement | None = None) -> BinaryMask:
    """Morphological dilation with a square structuring element.

    Pixels outside the image are background; foreground never shrinks.
    """
    se = se or StructuringElement()
    out = ndimage.binary_dilation(m.data, structure=np.ones((se.side, se.side), dtype=bool))
    return BinaryMask(out)


def _src_positions(n_dst: int, n_src: int) -> np.ndarray:
    # Half-pixel-center mapping; identical dimensions map to themselves exactly.
    return (np.arange(n_dst, dtype=np.float64) + 0.5) * (n_src / n_dst) - 0.5


def resize(img: RasterImage, w: int, h: int, mode: str = "bilinear") -> RasterImage:
    """Resize to (w, h) with half-pixel-center sampling and edge clamping."""
    if w < 1 or h < 1:
        raise ValueError("target dimensions must be positive")
    if mode not in ("bilinear", "nearest"):
        raise ValueError(f"unknown resize mode {mode!r}")
    src = img.data
    if mode == "nearest":
        ys = np.clip(np.floor((np.arange(h) + 0.5) * (img.height / h)).astype(int), 0, img.height - 1)
        xs = np.clip(np.floor((np.arange(w) + 0.5) * (img.width / w)).astype(int), 0, img.width - 1)
        return RasterImage(src[np.ix_(ys, xs)])
    ys = np.clip(_src_positions(h, img.height), 0.0, img.height - 1)
    xs = np.clip(_src_positions(w, img.width), 0.0, img.width - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, img.height - 1)
    x1 = np.minimum(x0 + 1, img.width - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    top = (1.0 - fx) * src[np.ix_(y0, x0)] + fx * src[np.ix_(y0, x1)]
    bot = (1.0 - fx) * src[np.ix_(y1, x0)] + fx * src[np.ix_(y1, x1)]
    out = (1.0 - fy) * top + fy * bot
    return RasterImage(np.clip(out, 0.0, 1.0))


def mask_resize(m: BinaryMask, w: int, h: int) -> BinaryMask:
    """Nearest-neighbor mask resize; output stays strictly binary."""
    if w < 1 or h < 1:
        raise ValueError("target dimensions must be positive")
    ys = np.clip(np.floor((np.arange(h) + 0.5) * (m.height / h)).astype(int), 0, m.height - 1)
    xs = np.clip(np.floor((np.arange(w) + 0.5) * (m.width / w)).astype(int), 0, m.width - 1)
    return BinaryMask(m.data[np.ix_(ys, xs)])


def _lower_median(values: np.ndarray) -> float:
    # Lower of the two middle values for even counts; deterministic and
    # always an actual pixel value.
    s = np.sort(values, axis=None)
    return float(s[(s.size - 1) // 2])


def pad_to_square_median(img: RasterImage) -> RasterImage:
    """Pad to max(w, h) square, content centered, per-channel median fill."""
    h, w = img.height, img.width
    if h == w:
        return img
    side = max(h, w)
    out = np.empty((side, side, img.channels), dtype=np.float64)
    for c in range(img.channels):
        out[:, :, c] = _lower_median(img.data[:, :, c])
    top = (side - h) // 2
    left = (side - w) // 2
    out[top:top + h, left:left + w, :] = img.data
    return RasterImage(out)


def unpad_from_square(m: BinaryMask, w: int, h: int) -> BinaryMask:
    """Recover the centered (w, h) region from a pad_to_square_median layout."""
    side = max(w, h)
    if m.data.shape != (side, side):
        raise ValueError(f"expected a {side}x{side} mask, got {m.data.shape}")
    top = (side - h) // 2
    left = (side - w) // 2
    return BinaryMask(m.data[top:top + h, left:left + w])


def pixelwise_blend(a: RasterImage, b: RasterImage, w: float) -> RasterImage:
    """Convex blend w * a + (1 - w) * b, clamped to [0, 1]."""
    if not 0.0 <= w <= 1.0:
        raise ValueError("blend weight must lie in [0, 1]")
    if a.data.shape != b.data.shape:
        raise ValueError(f"image shapes differ: {a.data.shape} vs {b.data.shape}")
    return RasterImage(np.clip(w * a.data + (1.0 - w) * b.data, 0.0, 1.0))


def read_image(path: str | Path) -> RasterImage:
    """Read an 8-bit PNG (or similar) as a normalized 1- or 3-channel image."""
    with Image.open(path) as im:
        if im.mode in ("1", "L", "I", "I;16", "F"):
            arr = np.asarray(im.convert("L"), dtype=np.float64)
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return RasterImage(arr / 255.0)


def write_image(img: RasterImage, path: str | Path) -> None:
    """Write as 8-bit grayscale or RGB PNG."""
    arr = np.round(img.data * 255.0).astype(np.uint8)
    if img.channels == 1:
        Image.fromarray(arr[:, :, 0], mode="L").save(path)
    else:
        Image.fromarray(arr, mode="RGB").save(path)


def read_mask(path: str | Path) -> BinaryMask:
    """Read a GT-convention PNG (text black, background white)."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return BinaryMask(arr < 128)


def write_mask(mask: BinaryMask, path: str | Path) -> None:
    """Write in GT convention: text = 0 (black), background = 255 (white)."""
    arr = np.where(mask.data, 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)
