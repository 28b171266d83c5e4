"""Low-precision integer GEMM with affine (zero-point) correction.

Operands are unsigned 8-bit codes that de-quantize as ``code * scale + offset``.
The integer product is accumulated in int32, and the float result of
multiplying the de-quantized matrices is recovered from it with row/column
sums of the codes::

    A~ @ B~ = sa*sb*(A^ @ B^) + sa*ob*rowsum(A^) + sb*oa*colsum(B^) + K*oa*ob

The module also keeps a process-wide counter of scalar multiplies executed in
the element-wise/GEMM stage of the engines.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from lance.exceptions import InvalidArgumentError
from lance.quant import QuantParams

# K * 255**2 must stay below 2**31
MAX_DEPTH = 32768


class MultiplyCounter:
    """Thread-safe tally of scalar multiplications."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n):
        with self._lock:
            self._count += int(n)

    def reset(self):
        with self._lock:
            self._count = 0

    @property
    def count(self):
        with self._lock:
            return self._count


COUNTER = MultiplyCounter()


def multiply_counter():
    """Multiplies recorded since the last :func:`reset_multiply_counter`."""
    return COUNTER.count


def reset_multiply_counter():
    COUNTER.reset()


@contextmanager
def counting():
    """Reset the counter and yield a callable returning the running count."""
    COUNTER.reset()
    yield multiply_counter


@dataclass(frozen=True)
class CodeMatrix:
    """A 2-D matrix of quantized codes and the parameters they decode with."""

    codes: np.ndarray
    params: QuantParams

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 2:
            raise InvalidArgumentError(f"codes must be 2-D, got shape {codes.shape}")
        if codes.size and (codes.min() < 0 or codes.max() > self.params.levels):
            raise InvalidArgumentError(
                f"codes exceed the {self.params.bits}-bit range [0, {self.params.levels}]"
            )
        object.__setattr__(self, "codes", codes.astype(np.uint8, copy=False))

    @property
    def shape(self):
        return self.codes.shape

    def dequantize(self):
        return self.codes.astype(np.float64) * self.params.scale + self.params.t_min


def _codes(m):
    return m.codes if isinstance(m, CodeMatrix) else np.asarray(m)


def _check_dims(a, b):
    if a.ndim != 2 or b.ndim != 2:
        raise InvalidArgumentError("GEMM operands must be 2-D")
    if a.shape[1] != b.shape[0]:
        raise InvalidArgumentError(f"inner dimensions differ: {a.shape} @ {b.shape}")
    if a.shape[1] > MAX_DEPTH:
        raise InvalidArgumentError(
            f"inner dimension {a.shape[1]} exceeds the int32-safe bound {MAX_DEPTH}"
        )


def gemm_codes(a, b):
    """Exact integer product of two code matrices, accumulated in int32."""
    a, b = _codes(a), _codes(b)
    _check_dims(a, b)
    if a.size and (a.min() < 0 or a.max() > 255) or b.size and (b.min() < 0 or b.max() > 255):
        raise InvalidArgumentError("codes must fit in 8 unsigned bits")
    COUNTER.add(a.shape[0] * a.shape[1] * b.shape[1])
    return np.matmul(a.astype(np.int32), b.astype(np.int32))


def affine_correction(sums, row_sums, col_sums, depth, a_scale, a_offset, b_scale, b_offset):
    """De-quantize an accumulated code product.

    ``sums`` holds ``sum_k a[., k] * b[k, .]``, ``row_sums`` the matching
    ``sum_k a[., k]`` and ``col_sums`` ``sum_k b[k, .]``; all arguments
    broadcast. The evaluation order is fixed so that identical inputs give
    bitwise identical outputs wherever this is called from.
    """
    return (
        (a_scale * b_scale) * sums
        + (a_scale * b_offset) * row_sums
        + (b_scale * a_offset) * col_sums
        + (depth * a_offset) * b_offset
    )


def affine_gemm(a, b):
    """Float product of the de-quantized operands, computed via integer GEMM."""
    if not isinstance(a, CodeMatrix) or not isinstance(b, CodeMatrix):
        raise InvalidArgumentError("affine_gemm needs CodeMatrix operands")
    sums = gemm_codes(a, b)
    row_sums = a.codes.sum(axis=1, dtype=np.int64)[:, None]
    col_sums = b.codes.sum(axis=0, dtype=np.int64)[None, :]
    return affine_correction(
        sums.astype(np.float64),
        row_sums.astype(np.float64),
        col_sums.astype(np.float64),
        float(a.shape[1]),
        a.params.scale,
        a.params.t_min,
        b.params.scale,
        b.params.t_min,
    )
