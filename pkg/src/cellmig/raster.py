"""Core raster containers and label-mask primitives.

Everything downstream (sampling, registration, morphometry, metrics) works on
the four container types defined here. All containers freeze their pixel data
at construction, so instances can be shared freely across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

__all__ = [
    "GrayFrame",
    "NormalizedFrame",
    "LabelMask",
    "BinaryMask",
    "normalize_percentile",
    "connected_components",
    "region_pixels",
    "quantize",
]

# Default physical calibration of the supported microscopy setup (um/pixel).
DEFAULT_PIXEL_SIZE = 0.802


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _check_grid(arr: np.ndarray, what: str) -> None:
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{what} must be a non-empty 2-D grid, got shape {arr.shape}")


@dataclass(frozen=True)
class GrayFrame:
    """Single-channel intensity raster with physical pixel size in um/pixel."""

    pixels: np.ndarray
    pixel_size: float = DEFAULT_PIXEL_SIZE

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        _check_grid(arr, "frame")
        if arr.dtype not in (np.uint8, np.uint16):
            raise ValueError(f"unsupported intensity dtype {arr.dtype}, want uint8 or uint16")
        if not (self.pixel_size > 0):
            raise ValueError(f"pixel_size must be positive, got {self.pixel_size}")
        object.__setattr__(self, "pixels", _frozen(arr, arr.dtype))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def bit_depth(self) -> int:
        return 8 if self.pixels.dtype == np.uint8 else 16


@dataclass(frozen=True)
class NormalizedFrame:
    """Real-valued raster with every value in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        _check_grid(arr, "normalized frame")
        if not np.all((arr >= 0.0) & (arr <= 1.0)):
            raise ValueError("normalized values must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(arr, np.float64))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabelMask:
    """Per-pixel non-negative integer instance labels; 0 is background."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        _check_grid(arr, "label mask")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"labels must be integers, got dtype {arr.dtype}")
        if arr.size and arr.min() < 0:
            raise ValueError("labels must be non-negative")
        object.__setattr__(self, "labels", _frozen(arr, np.int32))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def labels_present(self) -> list[int]:
        """Sorted positive labels that actually occur in the mask."""
        vals = np.unique(self.labels)
        return [int(v) for v in vals if v > 0]

    def binary(self) -> "BinaryMask":
        return BinaryMask(self.labels > 0)


@dataclass(frozen=True)
class BinaryMask:
    """Foreground/background mask; boolean per pixel."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        _check_grid(arr, "binary mask")
        object.__setattr__(self, "bits", _frozen(arr != 0, bool))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def foreground_count(self) -> int:
        return int(self.bits.sum())


def _nearest_rank(sorted_vals: np.ndarray, p: float) -> float:
    """Nearest-rank percentile: value at rank ceil(p*n/100) of the sorted multiset."""
    n = sorted_vals.size
    # round() snaps float fuzz when p*n/100 is mathematically an integer
    rank = math.ceil(round(p * n / 100.0, 9))
    rank = min(max(rank, 1), n)
    return float(sorted_vals[rank - 1])


def normalize_percentile(frame: GrayFrame, p_lo: float = 0.1, p_hi: float = 99.1) -> NormalizedFrame:
    """Rescale intensities so the p_lo..p_hi percentile range maps onto [0, 1].

    Percentiles use the nearest-rank convention on the sorted pixel multiset.
    Values outside the range are clamped. A constant frame (both percentiles
    equal) maps to all zeros.
    """
    if not (0.0 <= p_lo < p_hi <= 100.0):
        raise ValueError(f"need 0 <= p_lo < p_hi <= 100, got ({p_lo}, {p_hi})")
    pixels = frame.pixels
    if pixels.size == 0:
        raise ValueError("cannot normalize an empty frame")
    flat = np.sort(pixels, axis=None)
    a = _nearest_rank(flat, p_lo)
    b = _nearest_rank(flat, p_hi)
    if a == b:
        return NormalizedFrame(np.zeros(pixels.shape, dtype=np.float64))
    out = (pixels.astype(np.float64) - a) / (b - a)
    np.clip(out, 0.0, 1.0, out=out)
    return NormalizedFrame(out)


def quantize(frame: NormalizedFrame, bit_depth: int = 16,
             pixel_size: float = DEFAULT_PIXEL_SIZE) -> GrayFrame:
    """Map [0,1] values onto the full integer range of an 8- or 16-bit frame."""
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    top = (1 << bit_depth) - 1
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    scaled = np.rint(frame.values * top).astype(dtype)
    return GrayFrame(scaled, pixel_size=pixel_size)


_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


def connected_components(mask: BinaryMask, connectivity: int = 8) -> LabelMask:
    """Label maximal connected foreground sets 1..n in raster-scan order.

    Raster order means: components are numbered by the position of their first
    pixel when scanning rows top to bottom, columns left to right. This keeps
    labelings reproducible across runs and platforms.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    structure = _STRUCT_8 if connectivity == 8 else _STRUCT_4
    labeled, count = ndimage.label(mask.bits, structure=structure)
    if count == 0:
        return LabelMask(labeled)
    # scipy's numbering is an implementation detail; renumber by first pixel.
    flat = labeled.ravel()
    values, first_index = np.unique(flat, return_index=True)
    positive = values > 0
    values = values[positive]
    first_index = first_index[positive]
    remap = np.zeros(count + 1, dtype=np.int32)
    for new_label, old_label in enumerate(values[np.argsort(first_index)], start=1):
        remap[old_label] = new_label
    return LabelMask(remap[labeled])


def region_pixels(mask: LabelMask, label: int) -> set[tuple[int, int]]:
    """Set of (row, col) pixels carrying `label`; empty set if absent."""
    if label <= 0:
        raise ValueError(f"label must be positive, got {label}")
    rows, cols = np.nonzero(mask.labels == label)
    return {(int(r), int(c)) for r, c in zip(rows, cols)}
