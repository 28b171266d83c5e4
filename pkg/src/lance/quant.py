"""Uniform linear (affine) quantization.

A value ``x`` of a reference set ``T`` is mapped to an unsigned ``b``-bit code

    code = round((x - min(T)) * (2**b - 1) / (max(T) - min(T)))

and recovered as ``code * scale + min(T)`` with
``scale = (max(T) - min(T)) / (2**b - 1)``. Rounding is half away from zero;
codes are clamped to ``[0, 2**b - 1]``. A degenerate set (``max == min``)
has scale 0, every code 0, and de-quantizes to ``min(T)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from lance.exceptions import InvalidArgumentError
from lance.utils.validation import check_bits


class Granularity(str, Enum):
    """Scope over which one set of quantization parameters is fit.

    Values are laid out with the Winograd-domain position ``(i, j)`` on the
    last two axes.
    """

    PER_TILE = "tile"
    PER_POSITION = "position"
    PER_TENSOR = "tensor"


@dataclass(frozen=True)
class QuantParams:
    """Bit-width and reference range of one quantizer."""

    bits: int
    t_min: float
    t_max: float

    def __post_init__(self):
        check_bits(self.bits)
        if not self.t_max >= self.t_min:
            raise InvalidArgumentError(
                f"t_max ({self.t_max}) must be >= t_min ({self.t_min})"
            )

    @property
    def levels(self):
        return (1 << self.bits) - 1

    @property
    def scale(self):
        return (self.t_max - self.t_min) / self.levels


def fit_params(values, bits):
    """Fit quantization parameters to the range of ``values``."""
    bits = check_bits(bits)
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise InvalidArgumentError("cannot fit quantization parameters to an empty set")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("values contain NaN or infinity")
    return QuantParams(bits, float(arr.min()), float(arr.max()))


def quantize_array(x, t_min, t_max, bits):
    """Vectorized quantizer; ``t_min``/``t_max`` broadcast against ``x``.

    Returns uint8 codes.
    """
    levels = (1 << bits) - 1
    x = np.asarray(x, dtype=np.float64)
    t_min = np.asarray(t_min, dtype=np.float64)
    span = np.asarray(t_max, dtype=np.float64) - t_min
    degenerate = span == 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        y = (x - t_min) * levels / np.where(degenerate, 1.0, span)
    y = np.where(degenerate, 0.0, y)
    # after clamping y >= 0, so floor(y + 0.5) is round-half-away-from-zero
    y = np.clip(y, 0.0, levels)
    return np.floor(y + 0.5).astype(np.uint8)


def dequantize_array(codes, t_min, t_max, bits):
    """Vectorized de-quantizer; returns float64 values."""
    levels = (1 << bits) - 1
    t_min = np.asarray(t_min, dtype=np.float64)
    scale = (np.asarray(t_max, dtype=np.float64) - t_min) / levels
    return np.asarray(codes, dtype=np.float64) * scale + t_min


def quantize(x, p):
    """Quantize a scalar or array with parameters ``p``.

    Values outside ``[t_min, t_max]`` are clamped to the end codes.
    """
    codes = quantize_array(x, p.t_min, p.t_max, p.bits)
    if codes.ndim == 0:
        return int(codes)
    return codes


def dequantize(code, p):
    """Recover the floating value of ``code`` under parameters ``p``."""
    arr = np.asarray(code)
    if arr.size and (arr.min() < 0 or arr.max() > p.levels):
        raise InvalidArgumentError(f"code out of range [0, {p.levels}] for {p.bits}-bit params")
    out = dequantize_array(arr, p.t_min, p.t_max, p.bits)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class QuantizedBlock:
    """Codes together with the (broadcastable) range they were fit to.

    ``t_min`` and ``t_max`` have the same number of dimensions as ``codes``,
    with size-1 axes wherever the parameters are shared.
    """

    codes: np.ndarray
    bits: int
    t_min: np.ndarray
    t_max: np.ndarray

    @property
    def levels(self):
        return (1 << self.bits) - 1

    @property
    def scale(self):
        return (self.t_max - self.t_min) / self.levels

    @property
    def shape(self):
        return self.codes.shape

    def params_at(self, index):
        """QuantParams governing ``codes[index]``."""
        sel = tuple(0 if n == 1 else i for i, n in zip(index, self.t_min.shape))
        return QuantParams(self.bits, float(self.t_min[sel]), float(self.t_max[sel]))

    def dequantize(self):
        return dequantize_array(self.codes, self.t_min, self.t_max, self.bits)


def _reduce_axes(ndim, granularity):
    granularity = Granularity(granularity)
    if ndim < 2:
        raise InvalidArgumentError("block values need at least two (position) axes")
    if granularity is Granularity.PER_TILE:
        return (ndim - 2, ndim - 1)
    if granularity is Granularity.PER_POSITION:
        return tuple(range(ndim - 2))
    return tuple(range(ndim))


def quantize_block(values, bits, granularity):
    """Quantize ``values`` (position on the last two axes) at ``granularity``.

    PER_TILE fits one range per trailing 2-D tile, PER_POSITION one range per
    ``(i, j)`` position shared by all leading indices, PER_TENSOR a single
    range for everything.
    """
    bits = check_bits(bits)
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise InvalidArgumentError("cannot quantize an empty block")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("values contain NaN or infinity")
    axes = _reduce_axes(arr.ndim, granularity)
    if axes:
        t_min = arr.min(axis=axes, keepdims=True)
        t_max = arr.max(axis=axes, keepdims=True)
    else:
        t_min, t_max = arr.copy(), arr.copy()
    codes = quantize_array(arr, t_min, t_max, bits)
    return QuantizedBlock(codes, bits, t_min, t_max)
