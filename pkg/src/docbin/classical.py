"""Classical global and local-adaptive thresholding baselines.

All three methods use the document polarity convention: text pixels are the
ones on the dark side of the computed threshold, stored as True. Local window
statistics run on integral images with edge-inclusive mirror padding; results
match a naive sliding-window evaluation to well under 1e-9.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from docbin.raster import BinaryMask, RasterImage


@dataclass(frozen=True)
class LocalThresholdConfig:
    """Window size and coefficients for Niblack / Sauvola thresholds.

    R is the dynamic-range constant and only Sauvola reads it.
    """

    window: int = 25
    k: float = -0.2
    R: float = 0.5

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be an odd integer >= 3")
        if self.R <= 0.0:
            raise ValueError("R must be positive")


NIBLACK_DEFAULTS = LocalThresholdConfig(window=25, k=-0.2)
SAUVOLA_DEFAULTS = LocalThresholdConfig(window=25, k=0.34, R=0.5)

_BINS = 256


def _histogram(plane: np.ndarray) -> np.ndarray:
    levels = np.round(plane * (_BINS - 1)).astype(np.int64)
    return np.bincount(levels.ravel(), minlength=_BINS).astype(np.float64)


def otsu(img: RasterImage) -> tuple[float, BinaryMask]:
    """Global threshold maximizing between-class variance on a 256-bin histogram.

    Returns (t, mask) where mask marks the dark class as text. Ties pick the
    lowest maximizing bin. A single-bin (constant) image degenerates to t just
    above the constant and an all-background mask.
    """
    if img.channels != 1:
        raise ValueError("otsu requires a single-channel image")
    plane = img.plane()
    hist = _histogram(plane)
    occupied = np.nonzero(hist)[0]
    if occupied.size < 2:
        t = (occupied[0] + 0.5) / (_BINS - 1)
        return t, BinaryMask(np.zeros(plane.shape, dtype=bool))

    total = hist.sum()
    p = hist / total
    w0 = np.cumsum(p)
    cum_mean = np.cumsum(p * np.arange(_BINS))
    mu_total = cum_mean[-1]
    w1 = 1.0 - w0
    valid = (w0 > 0) & (w1 > 0)
    var_between = np.zeros(_BINS)
    var_between[valid] = (mu_total * w0[valid] - cum_mean[valid]) ** 2 / (w0[valid] * w1[valid])
    cut = int(np.argmax(var_between))  # argmax returns the first (lowest) tie
    t = (cut + 0.5) / (_BINS - 1)
    return t, BinaryMask(plane < t)


def _window_stats(plane: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Local mean and population std over a window x window neighborhood.

    Borders use edge-inclusive mirror reflection, shared with the naive
    reference path in the test suite.
    """
    pad = window // 2
    padded = np.pad(plane, pad, mode="symmetric")
    n = float(window * window)

    zrow = np.zeros((1, padded.shape[1] + 1))
    s1 = np.vstack([zrow, np.hstack([np.zeros((padded.shape[0], 1)), np.cumsum(np.cumsum(padded, 0), 1)])])
    s2 = np.vstack([zrow, np.hstack([np.zeros((padded.shape[0], 1)), np.cumsum(np.cumsum(padded * padded, 0), 1)])])

    h, w = plane.shape
    y0 = np.arange(h)
    x0 = np.arange(w)
    y1 = y0 + window
    x1 = x0 + window
    win1 = s1[np.ix_(y1, x1)] - s1[np.ix_(y0, x1)] - s1[np.ix_(y1, x0)] + s1[np.ix_(y0, x0)]
    win2 = s2[np.ix_(y1, x1)] - s2[np.ix_(y0, x1)] - s2[np.ix_(y1, x0)] + s2[np.ix_(y0, x0)]
    mean = win1 / n
    var = np.maximum(win2 / n - mean * mean, 0.0)
    return mean, np.sqrt(var)


def niblack(img: RasterImage, cfg: LocalThresholdConfig | None = None) -> BinaryMask:
    """Local threshold T = m + k * s; pixels below T are text."""
    if img.channels != 1:
        raise ValueError("niblack requires a single-channel image")
    cfg = cfg or NIBLACK_DEFAULTS
    mean, std = _window_stats(img.plane(), cfg.window)
    t_map = mean + cfg.k * std
    return BinaryMask(img.plane() < t_map)


def sauvola(img: RasterImage, cfg: LocalThresholdConfig | None = None) -> BinaryMask:
    """Local threshold T = m * (1 + k * (s / R - 1)); pixels below T are text."""
    if img.channels != 1:
        raise ValueError("sauvola requires a single-channel image")
    cfg = cfg or SAUVOLA_DEFAULTS
    mean, std = _window_stats(img.plane(), cfg.window)
    t_map = mean * (1.0 + cfg.k * (std / cfg.R - 1.0))
    return BinaryMask(img.plane() < t_map)
