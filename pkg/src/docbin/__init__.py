"""Document image enhancement and binarization toolkit.

Two-stage adversarial pipeline (color-channel enhancement, then multi-scale
local/global binarization with dilate-and-AND fusion), classical thresholding
baselines, and the standard document-binarization metric suite.
"""

from docbin.raster import RasterImage, BinaryMask, StructuringElement

__all__ = ["RasterImage", "BinaryMask", "StructuringElement"]
__version__ = "0.1.0"
