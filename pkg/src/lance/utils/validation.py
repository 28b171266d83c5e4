"""Input validation helpers shared by the engines, estimators and CLI.

Tensors are plain numpy arrays. A ``Tensor4`` is a float32 array of shape
``(N, H, W, C)`` (channels innermost) and a ``FilterBank`` is a float32 array
of shape ``(K, R, S, C)``.
"""

from __future__ import annotations

import numpy as np

from lance.exceptions import InvalidArgumentError

SUPPORTED_BITS = tuple(range(2, 9))
PASSTHROUGH_BITS = 32


def check_tensor4(x, name="x"):
    """Return ``x`` as a C-contiguous float32 NHWC array.

    Raises
    ------
    InvalidArgumentError
        If ``x`` is not 4-D or has a zero-sized dimension.
    """
    arr = np.asarray(x)
    if arr.ndim != 4:
        raise InvalidArgumentError(
            f"{name} must be a 4-D NHWC tensor, got shape {arr.shape}"
        )
    if min(arr.shape) < 1:
        raise InvalidArgumentError(f"{name} has an empty dimension: {arr.shape}")
    if not np.issubdtype(arr.dtype, np.number):
        raise InvalidArgumentError(f"{name} must be numeric, got {arr.dtype}")
    return np.ascontiguousarray(arr, dtype=np.float32)


def check_filter_bank(w, name="w", winograd=False):
    """Return ``w`` as a C-contiguous float32 KRSC array.

    With ``winograd=True`` the filters must be 3x3.
    """
    arr = np.asarray(w)
    if arr.ndim != 4:
        raise InvalidArgumentError(
            f"{name} must be a 4-D KRSC filter bank, got shape {arr.shape}"
        )
    if min(arr.shape) < 1:
        raise InvalidArgumentError(f"{name} has an empty dimension: {arr.shape}")
    if winograd and arr.shape[1:3] != (3, 3):
        raise InvalidArgumentError(
            f"Winograd engines support 3x3 filters only, got {arr.shape[1]}x{arr.shape[2]}"
        )
    return np.ascontiguousarray(arr, dtype=np.float32)


def check_pad(pad):
    if pad not in (0, 1) or isinstance(pad, bool):
        raise InvalidArgumentError(f"pad must be 0 or 1, got {pad!r}")
    return int(pad)


def check_bits(bits, name="bits", allow_passthrough=False):
    """Validate a quantization bit-width.

    ``32`` is accepted only when ``allow_passthrough`` is set and means the
    operand is left in floating point.
    """
    if isinstance(bits, bool) or not isinstance(bits, (int, np.integer)):
        raise InvalidArgumentError(f"{name} must be an integer, got {bits!r}")
    bits = int(bits)
    if bits in SUPPORTED_BITS:
        return bits
    if allow_passthrough and bits == PASSTHROUGH_BITS:
        return bits
    allowed = "2..8" + (" or 32" if allow_passthrough else "")
    raise InvalidArgumentError(f"{name} must be in {allowed}, got {bits}")


def check_consistent(x, w):
    """Check that input channels of ``x`` match filter channels of ``w``."""
    if x.shape[3] != w.shape[3]:
        raise InvalidArgumentError(
            f"channel mismatch: input has {x.shape[3]}, filters have {w.shape[3]}"
        )
