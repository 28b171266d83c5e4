"""NHWC tiles and the LTEN tensor file format.

Images are split into overlapping ``alpha x alpha`` tiles (``alpha = m + r - 1``)
taken with stride ``m``; every tile produces one ``m x m`` output block.
Border tiles that run past the (zero padded) image are filled with zeros and
the surplus output they produce is dropped again by :func:`merge_tiles`.
"""

from __future__ import annotations

import io
import math
import os
import struct
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from lance.exceptions import FormatError, InvalidArgumentError
from lance.utils.validation import check_pad, check_tensor4

MAGIC = b"LTEN"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 0
HEADER = struct.Struct("<4sHB4Q")
HEADER_SIZE = HEADER.size

_MAX_ELEMENTS = (1 << 62) // 4


def output_size(size, r, pad):
    """Unit-stride output extent of a correlation with zero padding."""
    return size + 2 * pad - r + 1


@dataclass(frozen=True)
class TileSet:
    """Tiles cut from a batch of images.

    Attributes
    ----------
    tiles : ndarray of shape (n, ph * pw, alpha, alpha, c)
        Tile values, tiles ordered row-major over the tile grid.
    ph, pw : int
        Tile grid height and width.
    m, r : int
        Output tile side and filter side.
    out_h, out_w : int
        Size of the convolution output the tiles cover.
    """

    tiles: np.ndarray
    ph: int
    pw: int
    m: int
    r: int
    out_h: int
    out_w: int

    @property
    def p(self):
        return self.ph * self.pw

    @property
    def tile_size(self):
        return self.m + self.r - 1


def tile_grid(out_h, out_w, m=2):
    """Return ``(ph, pw)`` needed to cover an ``out_h x out_w`` output."""
    return math.ceil(out_h / m), math.ceil(out_w / m)


def extract_tiles(x, m=2, r=3, pad=0):
    """Cut ``x`` into overlapping Winograd input tiles.

    Tile ``(ti, tj)`` covers input rows ``[ti*m - pad, ti*m - pad + m + r - 1)``
    (and likewise for columns); pixels outside the image read as 0.
    """
    if m != 2 or r != 3:
        raise InvalidArgumentError(f"only F(2x2, 3x3) tiling is supported, got m={m}, r={r}")
    pad = check_pad(pad)
    x = check_tensor4(x)
    n, h, w, c = x.shape
    if h + 2 * pad < r or w + 2 * pad < r:
        raise InvalidArgumentError(
            f"padded input {h + 2 * pad}x{w + 2 * pad} is smaller than the {r}x{r} filter"
        )
    alpha = m + r - 1
    out_h, out_w = output_size(h, r, pad), output_size(w, r, pad)
    ph, pw = tile_grid(out_h, out_w, m)

    padded = np.zeros((n, (ph - 1) * m + alpha, (pw - 1) * m + alpha, c), dtype=x.dtype)
    padded[:, pad : pad + h, pad : pad + w, :] = x
    # (n, ph, pw, c, alpha, alpha) view with stride m between tiles
    windows = sliding_window_view(padded, (alpha, alpha), axis=(1, 2))[:, ::m, ::m]
    tiles = windows.transpose(0, 1, 2, 4, 5, 3).reshape(n, ph * pw, alpha, alpha, c)
    return TileSet(np.ascontiguousarray(tiles), ph, pw, m, r, out_h, out_w)


def merge_tiles(s_tiles, out_h, out_w):
    """Place per-tile ``m x m`` outputs into an NHWC output tensor.

    ``s_tiles`` is indexed ``[image, tile, row, col, filter]``. Tile ``(ti, tj)``
    element ``(a, b)`` lands at output ``(ti*m + a, tj*m + b)``; anything past
    ``out_h``/``out_w`` is discarded.
    """
    s_tiles = np.asarray(s_tiles)
    if s_tiles.ndim != 5 or s_tiles.shape[2] != s_tiles.shape[3]:
        raise InvalidArgumentError(
            f"expected tiles indexed [image, tile, row, col, filter], got shape {s_tiles.shape}"
        )
    if out_h < 1 or out_w < 1:
        raise InvalidArgumentError(f"output size must be positive, got {out_h}x{out_w}")
    n, p, m, _, k = s_tiles.shape
    ph, pw = tile_grid(out_h, out_w, m)
    if p != ph * pw:
        raise InvalidArgumentError(
            f"{p} tiles do not form the {ph}x{pw} grid required for a {out_h}x{out_w} output"
        )
    grid = s_tiles.reshape(n, ph, pw, m, m, k).transpose(0, 1, 3, 2, 4, 5)
    full = grid.reshape(n, ph * m, pw * m, k)
    return np.ascontiguousarray(full[:, :out_h, :out_w, :])


def _open(target, mode):
    if isinstance(target, (str, os.PathLike)):
        return open(target, mode), True
    return target, False


def write_tensor(t, sink):
    """Write an NHWC float32 tensor in LTEN format to a path or binary file."""
    t = check_tensor4(t, name="t")
    header = HEADER.pack(MAGIC, FORMAT_VERSION, DTYPE_FLOAT32, *t.shape)
    fh, owned = _open(sink, "wb")
    try:
        fh.write(header)
        fh.write(t.astype("<f4", copy=False).tobytes(order="C"))
    finally:
        if owned:
            fh.close()


def read_tensor(source):
    """Read an LTEN tensor from a path, binary file or ``bytes``.

    Raises
    ------
    FormatError
        On a bad magic, unknown version or dtype, bad dimensions, or a
        payload whose length does not match the header.
    """
    if isinstance(source, (bytes, bytearray, memoryview)):
        source = io.BytesIO(source)
    fh, owned = _open(source, "rb")
    try:
        raw = fh.read()
    finally:
        if owned:
            fh.close()

    if len(raw) < HEADER_SIZE:
        raise FormatError(f"truncated header: {len(raw)} of {HEADER_SIZE} bytes")
    magic, version, dtype, *dims = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    if dtype != DTYPE_FLOAT32:
        raise FormatError(f"unsupported dtype code {dtype}")
    if min(dims) < 1:
        raise FormatError(f"dimensions must be positive, got {tuple(dims)}")
    count = math.prod(dims)
    if count > _MAX_ELEMENTS:
        raise FormatError(f"dimensions {tuple(dims)} overflow the addressable size")
    payload = len(raw) - HEADER_SIZE
    if payload != 4 * count:
        kind = "truncated" if payload < 4 * count else "oversized"
        raise FormatError(f"{kind} payload: {payload} bytes for {count} float32 values")
    data = np.frombuffer(raw, dtype="<f4", count=count, offset=HEADER_SIZE)
    return data.astype(np.float32).reshape(dims)
