"""Document-binarization evaluation metrics and report emission.

Pixel metrics (F-measure, pseudo F-measure, PSNR, DRD) follow the standard
competition definitions with text = True as the positive class. Levenshtein
percent scores OCR transcripts. Reports can be aggregated and written as CSV
or JSON, one row per image plus a mean row.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from docbin.raster import BinaryMask

# 5x5 reciprocal-distance weights, zero at the center. Kept unnormalized next
# to their linear-order sum so that a flip against a uniformly disagreeing
# neighborhood scores exactly 1.0.
_DRD_OFFSETS: list[tuple[int, int]] = [
    (di, dj) for di in range(-2, 3) for dj in range(-2, 3) if (di, dj) != (0, 0)
]
_DRD_WEIGHTS: list[float] = [1.0 / math.hypot(di, dj) for di, dj in _DRD_OFFSETS]
_DRD_NORM = 0.0
for _w in _DRD_WEIGHTS:
    _DRD_NORM += _w


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")


@dataclass
class MetricReport:
    """Per-image or aggregated metric values.

    fm and p_fm are percentages, psnr is in dB (math.inf for identical
    masks), drd is unitless, lev is a percentage or None when no transcript
    was scored. psnr_inf_count records how many infinite PSNR entries an
    aggregate excluded from its mean.
    """

    fm: float
    p_fm: float
    psnr: float
    drd: float
    lev: float | None = None
    psnr_inf_count: int = 0


def confusion(pred: BinaryMask, gt: BinaryMask) -> ConfusionCounts:
    """Pixel confusion counts with text = True as the positive class."""
    if pred.data.shape != gt.data.shape:
        raise ValueError(f"mask dimensions differ: {pred.data.shape} vs {gt.data.shape}")
    p = pred.data
    g = gt.data
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = int(np.count_nonzero(~p & ~g))
    return ConfusionCounts(tp, fp, fn, tn)


def f_measure(c: ConfusionCounts) -> float:
    """F-measure in percent: 100 * 2PR / (P + R); 0.0 when nothing overlaps."""
    if c.tp + c.fn == 0:
        raise ValueError("ground truth has no text pixels; recall undefined")
    if c.tp == 0:
        return 0.0
    precision = c.tp / (c.tp + c.fp)
    recall = c.tp / (c.tp + c.fn)
    return 100.0 * 2.0 * precision * recall / (precision + recall)


def skeletonize(gt: BinaryMask) -> BinaryMask:
    """Zhang-Suen thinning to a one-pixel-wide skeleton (subset of the input)."""
    img = gt.data.astype(np.uint8)
    changed = True
    while changed:
        changed = False
        for phase in (0, 1):
            p = np.pad(img, 1)
            p2 = p[:-2, 1:-1]
            p3 = p[:-2, 2:]
            p4 = p[1:-1, 2:]
            p5 = p[2:, 2:]
            p6 = p[2:, 1:-1]
            p7 = p[2:, :-2]
            p8 = p[1:-1, :-2]
            p9 = p[:-2, :-2]
            ring = [p2, p3, p4, p5, p6, p7, p8, p9]
            b = sum(ring)
            a = sum(((ring[i] == 0) & (ring[(i + 1) % 8] == 1)).astype(np.uint8) for i in range(8))
            if phase == 0:
                c1 = p2 * p4 * p6
                c2 = p4 * p6 * p8
            else:
                c1 = p2 * p4 * p8
                c2 = p2 * p6 * p8
            remove = (img == 1) & (b >= 2) & (b <= 6) & (a == 1) & (c1 == 0) & (c2 == 0)
            if remove.any():
                img[remove] = 0
                changed = True
    return BinaryMask(img.astype(bool))


def pseudo_f_measure(pred: BinaryMask, gt: BinaryMask) -> float:
    """F-measure with recall replaced by coverage of the skeletonized GT."""
    c = confusion(pred, gt)
    if c.tp + c.fn == 0:
        raise ValueError("ground truth has no text pixels; pseudo-recall undefined")
    skel = skeletonize(gt).data
    if not skel.any():
        # Thinning can erase tiny blobs (e.g. 2x2 squares) entirely.
        skel = gt.data
    p_recall = np.count_nonzero(pred.data & skel) / np.count_nonzero(skel)
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) > 0 else 0.0
    if precision + p_recall == 0.0:
        return 0.0
    return 100.0 * 2.0 * p_recall * precision / (p_recall + precision)


def psnr(pred: BinaryMask, gt: BinaryMask, c: float = 1.0) -> float:
    """10 * log10(C^2 / MSE) over the 0/1 masks; math.inf when identical."""
    if pred.data.shape != gt.data.shape:
        raise ValueError(f"mask dimensions differ: {pred.data.shape} vs {gt.data.shape}")
    mse = np.count_nonzero(pred.data != gt.data) / pred.data.size
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(c * c / mse)


def nubn(gt: BinaryMask) -> int:
    """Count of non-uniform 8x8 grid blocks; partial edge blocks participate."""
    g = gt.data
    count = 0
    for r0 in range(0, g.shape[0], 8):
        for c0 in range(0, g.shape[1], 8):
            block = g[r0:r0 + 8, c0:c0 + 8]
            n = np.count_nonzero(block)
            if 0 < n < block.size:
                count += 1
    return count


def drd(pred: BinaryMask, gt: BinaryMask) -> float:
    """Distance reciprocal distortion, normalized by the NUBN block count.

    Each flipped pixel is charged the reciprocal-distance weighted sum of its
    disagreements with the 5x5 GT neighborhood (GT edge-replicated at the
    borders).
    """
    if pred.data.shape != gt.data.shape:
        raise ValueError(f"mask dimensions differ: {pred.data.shape} vs {gt.data.shape}")
    blocks = nubn(gt)
    if blocks == 0:
        raise ValueError("DRD undefined: ground truth has no non-uniform 8x8 block")

    g = np.pad(gt.data.astype(np.float64), 2, mode="edge")
    p = pred.data.astype(np.float64)
    h, w = pred.data.shape
    acc = np.zeros((h, w), dtype=np.float64)
    for (di, dj), wgt in zip(_DRD_OFFSETS, _DRD_WEIGHTS):
        acc += wgt * np.abs(g[2 + di:2 + di + h, 2 + dj:2 + dj + w] - p)
    flipped = pred.data != gt.data
    return float(np.sum(acc[flipped] / _DRD_NORM)) / blocks


def levenshtein_percent(s1: str, s2: str) -> float:
    """(1 - editdistance / max length) * 100 over Unicode scalar values."""
    n = max(len(s1), len(s2))
    if n == 0:
        raise ValueError("both strings are empty; similarity undefined")
    prev = list(range(len(s2) + 1))
    for i, ch1 in enumerate(s1, start=1):
        cur = [i] + [0] * len(s2)
        for j, ch2 in enumerate(s2, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ch1 != ch2))
        prev = cur
    return (1.0 - prev[len(s2)] / n) * 100.0


def aggregate(reports: list[MetricReport]) -> MetricReport:
    """Arithmetic field means; infinite PSNR entries are excluded and counted."""
    if not reports:
        raise ValueError("cannot aggregate an empty report list")
    finite_psnr = [r.psnr for r in reports if math.isfinite(r.psnr)]
    inf_count = len(reports) - len(finite_psnr)
    levs = [r.lev for r in reports if r.lev is not None]
    return MetricReport(
        fm=sum(r.fm for r in reports) / len(reports),
        p_fm=sum(r.p_fm for r in reports) / len(reports),
        psnr=sum(finite_psnr) / len(finite_psnr) if finite_psnr else math.inf,
        drd=sum(r.drd for r in reports) / len(reports),
        lev=sum(levs) / len(levs) if levs else None,
        psnr_inf_count=inf_count,
    )


def evaluate_masks(pred: BinaryMask, gt: BinaryMask, lev: float | None = None) -> MetricReport:
    """All pixel metrics for one prediction/GT pair."""
    c = confusion(pred, gt)
    return MetricReport(
        fm=f_measure(c),
        p_fm=pseudo_f_measure(pred, gt),
        psnr=psnr(pred, gt),
        drd=drd(pred, gt),
        lev=lev,
    )


_CSV_HEADER = ["id", "fm", "pfm", "psnr", "drd", "lev"]


def write_report_csv(path: str | Path, rows: list[tuple[str, MetricReport]], mean: MetricReport) -> None:
    """One row per image ordered as given, then a 'mean' row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for image_id, r in rows:
            writer.writerow([image_id, r.fm, r.p_fm, r.psnr, r.drd, "" if r.lev is None else r.lev])
        writer.writerow(["mean", mean.fm, mean.p_fm, mean.psnr, mean.drd, "" if mean.lev is None else mean.lev])


def write_report_json(path: str | Path, rows: list[tuple[str, MetricReport]], mean: MetricReport) -> None:
    def as_dict(r: MetricReport) -> dict:
        return {
            "fm": r.fm,
            "pfm": r.p_fm,
            "psnr": "inf" if math.isinf(r.psnr) else r.psnr,
            "drd": r.drd,
            "lev": r.lev,
        }

    doc = {
        "images": {image_id: as_dict(r) for image_id, r in rows},
        "mean": {**as_dict(mean), "psnr_inf_excluded": mean.psnr_inf_count},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
