"""Convolution engines.

* :func:`direct_conv` -- reference correlation, the oracle for everything else.
* :func:`quantized_direct_conv` -- per-channel quantized correlation.
* :func:`winograd_conv_fp` -- full-precision F(2x2, 3x3).
* :func:`lance_faithful` -- quantization inside the Winograd domain, one
  channel at a time (element-wise integer product, de-quantize, accumulate).
* :func:`lance_gemm` -- the same computation batched as 16 integer GEMMs, one
  per Winograd-domain position, with de-quantization fused into the affine
  correction.

All engines take an NHWC input ``x`` and a KRSC filter bank ``w``, use unit
stride and zero padding ``pad``, accumulate channels in ascending order and
return a float32 NHWC tensor.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from lance import lowpgemm
from lance.exceptions import InvalidArgumentError
from lance.lowpgemm import CodeMatrix, affine_correction, affine_gemm
from lance.quant import Granularity, QuantParams, quantize_block
from lance.tensor import extract_tiles, merge_tiles, output_size, tile_grid
from lance.utils.validation import (
    PASSTHROUGH_BITS,
    check_bits,
    check_filter_bank,
    check_pad,
    check_tensor4,
)
from lance.winograd import basis_f2x2_3x3, transform_filter, transform_input, transform_output

ALPHA = 4
POSITIONS = ALPHA * ALPHA


class Mode(str, Enum):
    FAITHFUL = "faithful"
    GEMM = "gemm"


@dataclass(frozen=True)
class ConvSpec:
    """Shape of one convolution layer (unit stride)."""

    n: int
    c: int
    h: int
    w: int
    k: int
    r: int = 3
    s: int = 3
    pad: int = 0
    stride: int = 1

    def __post_init__(self):
        if self.stride != 1:
            raise InvalidArgumentError(f"only unit stride is supported, got {self.stride}")
        check_pad(self.pad)
        for name in ("n", "c", "h", "w", "k", "r", "s"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")
        if self.out_h < 1 or self.out_w < 1:
            raise InvalidArgumentError(
                f"{self.h}x{self.w} input with pad {self.pad} is too small for a "
                f"{self.r}x{self.s} filter"
            )

    @classmethod
    def from_arrays(cls, x, w, pad=0):
        n, h, wd, c = np.shape(x)
        k, r, s, _ = np.shape(w)
        return cls(n=n, c=c, h=h, w=wd, k=k, r=r, s=s, pad=pad)

    @property
    def out_h(self):
        return output_size(self.h, self.r, self.pad)

    @property
    def out_w(self):
        return output_size(self.w, self.s, self.pad)

    @property
    def tiles(self):
        """Winograd tiles per image (``ph * pw``)."""
        ph, pw = tile_grid(self.out_h, self.out_w, 2)
        return ph * pw

    @property
    def input_shape(self):
        return (self.n, self.h, self.w, self.c)

    @property
    def filter_shape(self):
        return (self.k, self.r, self.s, self.c)


@dataclass(frozen=True)
class LanceConfig:
    """Quantization settings for the LANCE engines.

    ``bits_w``/``bits_i`` are the weight and input bit-widths; 32 leaves that
    operand unquantized.
    """

    bits_w: int = 8
    bits_i: int = 8
    granularity: Granularity = Granularity.PER_TILE
    mode: Mode = Mode.FAITHFUL

    def __post_init__(self):
        check_bits(self.bits_w, "bits_w", allow_passthrough=True)
        check_bits(self.bits_i, "bits_i", allow_passthrough=True)
        try:
            object.__setattr__(self, "granularity", Granularity(self.granularity))
            object.__setattr__(self, "mode", Mode(self.mode))
        except ValueError as exc:
            raise InvalidArgumentError(str(exc)) from None
        if self.mode is Mode.GEMM and self.granularity is Granularity.PER_TILE:
            raise InvalidArgumentError(
                "GEMM mode needs position or tensor granularity; per-tile scales "
                "cannot be shared across the channel accumulation"
            )


@dataclass(frozen=True, eq=False)
class DomainTensor:
    """A Winograd-domain operand with positions on the last two axes.

    Inputs are laid out ``[image, tile, channel, i, j]`` and weights
    ``[filter, channel, i, j]``. ``t_min``/``t_max`` are broadcast to the full
    shape of ``codes``. Unquantized operands (``bits == 32``) keep their float
    values in ``codes`` with scale 1 and offset 0.
    """

    codes: np.ndarray
    t_min: np.ndarray
    t_max: np.ndarray
    bits: int

    @property
    def quantized(self):
        return self.bits != PASSTHROUGH_BITS

    @property
    def scale(self):
        if not self.quantized:
            return np.ones_like(self.t_min)
        return (self.t_max - self.t_min) / ((1 << self.bits) - 1)

    @property
    def offset(self):
        return self.t_min

    def values(self):
        return self.codes * self.scale + self.offset

    def position_major(self):
        """Codes reshaped to ``[position, rows, channels]`` (inputs) or
        ``[position, channels, filters]`` (weights)."""
        codes = np.moveaxis(self.codes, (-2, -1), (0, 1)).reshape(POSITIONS, *self.codes.shape[:-2])
        if codes.ndim == 4:
            return codes.reshape(POSITIONS, -1, codes.shape[-1])
        return codes.transpose(0, 2, 1)


def to_domain(values, bits, granularity):
    """Quantize Winograd-domain ``values`` (or pass them through at 32 bits)."""
    values = np.asarray(values, dtype=np.float64)
    if bits == PASSTHROUGH_BITS:
        zeros = np.zeros_like(values)
        return DomainTensor(values, zeros, zeros, bits)
    block = quantize_block(values, bits, granularity)
    return DomainTensor(
        block.codes,
        np.broadcast_to(block.t_min, values.shape),
        np.broadcast_to(block.t_max, values.shape),
        bits,
    )


@dataclass(frozen=True, eq=False)
class DomainWeights:
    """Filters transformed (and quantized) once, reusable across inputs."""

    domain: DomainTensor
    bits: int
    granularity: Granularity

    @property
    def k(self):
        return self.domain.codes.shape[0]

    @property
    def c(self):
        return self.domain.codes.shape[1]


def prepare_weights(w, cfg):
    """Transform and quantize filters for the LANCE engines."""
    w = check_filter_bank(w, winograd=True)
    u = transform_filter(w.transpose(0, 3, 1, 2), basis_f2x2_3x3())
    return DomainWeights(to_domain(u, cfg.bits_w, cfg.granularity), cfg.bits_w, cfg.granularity)


def _resolve(x, w, pad, spec, winograd):
    x = check_tensor4(x)
    pad = check_pad(spec.pad if spec is not None else pad)
    if isinstance(w, DomainWeights):
        if not winograd:
            raise InvalidArgumentError("prepared Winograd weights need a LANCE engine")
        shape = (w.k, 3, 3, w.c)
    else:
        w = check_filter_bank(w, winograd=winograd)
        shape = w.shape
    if x.shape[3] != shape[3]:
        raise InvalidArgumentError(
            f"channel mismatch: input has {x.shape[3]}, filters have {shape[3]}"
        )
    n, h, wd, c = x.shape
    actual = ConvSpec(n=n, c=c, h=h, w=wd, k=shape[0], r=shape[1], s=shape[2], pad=pad)
    if spec is not None and spec != actual:
        raise InvalidArgumentError(f"arrays do not match {spec}")
    return x, w, actual


def _domain_inputs(x, pad):
    tiles = extract_tiles(x, m=2, r=3, pad=pad)
    v = transform_input(tiles.tiles.transpose(0, 1, 4, 2, 3), basis_f2x2_3x3())
    return tiles, v


def _finish(m_dom, tiles):
    s = transform_output(m_dom, basis_f2x2_3x3())
    y = merge_tiles(s.transpose(0, 1, 3, 4, 2), tiles.out_h, tiles.out_w)
    return y.astype(np.float32)


def direct_conv(x, w, pad=0, spec=None):
    """Reference zero-padded correlation of ``x`` with every filter in ``w``."""
    x, w, spec = _resolve(x, w, pad, spec, winograd=False)
    xp = np.pad(x.astype(np.float64), ((0, 0), (spec.pad,) * 2, (spec.pad,) * 2, (0, 0)))
    windows = sliding_window_view(xp, (spec.r, spec.s), axis=(1, 2))
    wf = w.astype(np.float64)
    y = np.zeros((spec.n, spec.out_h, spec.out_w, spec.k))
    for c in range(spec.c):
        y += np.tensordot(windows[:, :, :, c], wf[..., c], axes=([3, 4], [1, 2]))
    lowpgemm.COUNTER.add(spec.n * spec.out_h * spec.out_w * spec.r * spec.s * spec.c * spec.k)
    return y.astype(np.float32)


def quantized_direct_conv(x, w, pad=0, spec=None, cfg=None):
    """Direct correlation on quantized image and filter channels.

    Each zero-padded image channel and each filter channel gets its own
    range; the integer correlation of the codes is de-quantized with the
    affine correction and the channels are summed.
    """
    cfg = cfg or LanceConfig()
    x, w, spec = _resolve(x, w, pad, spec, winograd=False)
    xp = np.pad(x.astype(np.float64), ((0, 0), (spec.pad,) * 2, (spec.pad,) * 2, (0, 0)))
    taps = spec.r * spec.s
    y = np.zeros((spec.n, spec.out_h, spec.out_w, spec.k))
    for c in range(spec.c):
        xq = to_domain(xp[..., c], cfg.bits_i, Granularity.PER_TILE)
        wq = to_domain(w[..., c].astype(np.float64), cfg.bits_w, Granularity.PER_TILE)
        xc = xq.codes if not xq.quantized else xq.codes.astype(np.int32)
        wc = wq.codes if not wq.quantized else wq.codes.astype(np.int32)
        windows = sliding_window_view(xc, (spec.r, spec.s), axis=(1, 2))
        sums = np.tensordot(windows, wc, axes=([3, 4], [1, 2]))
        row_sums = windows.sum(axis=(3, 4))[..., None]
        col_sums = wc.sum(axis=(1, 2))
        y += affine_correction(
            sums.astype(np.float64),
            row_sums.astype(np.float64),
            col_sums.astype(np.float64),
            float(taps),
            xq.scale[:, :1, :1, None],
            xq.offset[:, :1, :1, None],
            wq.scale[:, 0, 0],
            wq.offset[:, 0, 0],
        )
        lowpgemm.COUNTER.add(spec.n * spec.out_h * spec.out_w * taps * spec.k)
    return y.astype(np.float32)


def winograd_conv_fp(x, w, pad=0, spec=None):
    """Full-precision F(2x2, 3x3) Winograd convolution."""
    x, w, spec = _resolve(x, w, pad, spec, winograd=True)
    tiles, v = _domain_inputs(x, spec.pad)
    u = transform_filter(w.transpose(0, 3, 1, 2), basis_f2x2_3x3())
    m_dom = np.zeros((spec.n, tiles.p, spec.k, ALPHA, ALPHA))
    for c in range(spec.c):
        m_dom += v[:, :, None, c] * u[None, None, :, c]
    lowpgemm.COUNTER.add(POSITIONS * spec.n * tiles.p * spec.c * spec.k)
    return _finish(m_dom, tiles)


def _weights_for(w, cfg):
    if isinstance(w, DomainWeights):
        if w.bits != cfg.bits_w or w.granularity is not cfg.granularity:
            raise InvalidArgumentError("prepared weights were built for a different config")
        return w
    return prepare_weights(w, cfg)


def _as_operand(codes, quantized):
    return codes.astype(np.int32) if quantized else codes


def lance_faithful(x, w, pad=0, spec=None, cfg=None):
    """Quantized Winograd convolution, one channel at a time.

    For every channel the transformed filter and transformed tile are
    quantized, multiplied element-wise in integers, de-quantized and added to
    the running Winograd-domain sum, which is finally transformed back.
    """
    cfg = cfg or LanceConfig()
    x, w, spec = _resolve(x, w, pad, spec, winograd=True)
    weights = _weights_for(w, cfg)
    tiles, v = _domain_inputs(x, spec.pad)
    vq = to_domain(v, cfg.bits_i, cfg.granularity)
    uq = weights.domain
    u_scale, u_offset = uq.scale, uq.offset
    v_scale, v_offset = vq.scale, vq.offset

    m_dom = np.zeros((spec.n, tiles.p, spec.k, ALPHA, ALPHA))
    for c in range(spec.c):
        vc = _as_operand(vq.codes[:, :, None, c], vq.quantized)
        uc = _as_operand(uq.codes[None, None, :, c], uq.quantized)
        product = vc * uc
        lowpgemm.COUNTER.add(product.size)
        m_dom += affine_correction(
            product.astype(np.float64),
            vc.astype(np.float64),
            uc.astype(np.float64),
            1.0,
            v_scale[:, :, None, c],
            v_offset[:, :, None, c],
            u_scale[None, None, :, c],
            u_offset[None, None, :, c],
        )
    return _finish(m_dom, tiles)


def _shared_params(dt, i, j):
    """Scale/offset of position (i, j); uniform across rows and channels."""
    index = (0,) * (dt.codes.ndim - 2) + (i, j)
    return float(dt.t_min[index]), float(dt.t_max[index]), float(dt.scale[index])


def lance_gemm(x, w, pad=0, spec=None, cfg=None):
    """Quantized Winograd convolution as one integer GEMM per position.

    Position ``(i, j)`` multiplies the ``[images*tiles x C]`` input codes by the
    ``[C x K]`` weight codes; the affine correction of the GEMM performs the
    de-quantization and the channel sum in one step.
    """
    cfg = cfg or LanceConfig(granularity=Granularity.PER_POSITION, mode=Mode.GEMM)
    if cfg.granularity is Granularity.PER_TILE:
        raise InvalidArgumentError("lance_gemm does not support per-tile granularity")
    x, w, spec = _resolve(x, w, pad, spec, winograd=True)
    weights = _weights_for(w, cfg)
    tiles, v = _domain_inputs(x, spec.pad)
    vq = to_domain(v, cfg.bits_i, cfg.granularity)
    uq = weights.domain

    a_all = vq.position_major()  # (16, rows, C)
    b_all = uq.position_major()  # (16, C, K)
    m_dom = np.empty((spec.n, tiles.p, spec.k, ALPHA, ALPHA))
    for pos in range(POSITIONS):
        i, j = divmod(pos, ALPHA)
        a_min, a_max, a_scale = _shared_params(vq, i, j)
        b_min, b_max, b_scale = _shared_params(uq, i, j)
        if vq.quantized and uq.quantized:
            result = affine_gemm(
                CodeMatrix(a_all[pos], QuantParams(cfg.bits_i, a_min, a_max)),
                CodeMatrix(b_all[pos], QuantParams(cfg.bits_w, b_min, b_max)),
            )
        else:
            a = a_all[pos].astype(np.float64)
            b = b_all[pos].astype(np.float64)
            lowpgemm.COUNTER.add(a.shape[0] * a.shape[1] * b.shape[1])
            result = affine_correction(
                a @ b,
                a.sum(axis=1)[:, None],
                b.sum(axis=0)[None, :],
                float(spec.c),
                a_scale,
                a_min,
                b_scale,
                b_min,
            )
        m_dom[..., i, j] = result.reshape(spec.n, tiles.p, spec.k)
    return _finish(m_dom, tiles)


def lance_conv(x, w, pad=0, spec=None, cfg=None):
    """Dispatch to the faithful or GEMM LANCE engine according to ``cfg.mode``."""
    cfg = cfg or LanceConfig()
    if cfg.mode is Mode.GEMM:
        return lance_gemm(x, w, pad=pad, spec=spec, cfg=cfg)
    return lance_faithful(x, w, pad=pad, spec=spec, cfg=cfg)


ENGINES = {
    "direct": direct_conv,
    "quantized-direct": quantized_direct_conv,
    "winograd": winograd_conv_fp,
    "lance-faithful": lance_faithful,
    "lance-gemm": lance_gemm,
}
QUANTIZED_ENGINES = {"quantized-direct", "lance-faithful", "lance-gemm"}
WINOGRAD_ENGINES = {"winograd", "lance-faithful", "lance-gemm"}


def run_engine(name, x, w, pad=0, cfg=None):
    """Run engine ``name`` with a uniform signature."""
    try:
        engine = ENGINES[name]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown engine {name!r}; choose from {', '.join(ENGINES)}"
        ) from None
    if name in QUANTIZED_ENGINES:
        return engine(x, w, pad=pad, cfg=cfg)
    return engine(x, w, pad=pad)


@dataclass(frozen=True)
class ArithmeticReport:
    """Multiply counts of one engine on one layer.

    ``ratio_vs_direct`` is the effective ratio ``direct / engine``; for
    Winograd engines ``per_tile_ratio`` is the ideal ``m*m*r*r / alpha**2``
    and ``waste`` flags a ragged output edge whose border tiles compute
    discarded values. Additions are not counted.
    """

    engine: str
    multiplies: int
    direct_multiplies: int
    ratio_vs_direct: float
    per_tile_ratio: float
    waste: bool
    adds_ignored: bool = True


def direct_multiplies(spec):
    return spec.n * spec.out_h * spec.out_w * spec.r * spec.s * spec.c * spec.k


def arithmetic_report(spec, engine):
    """Element-wise/GEMM stage multiply count of ``engine`` on ``spec``."""
    if engine not in ENGINES:
        raise InvalidArgumentError(f"unknown engine {engine!r}")
    direct = direct_multiplies(spec)
    if engine in WINOGRAD_ENGINES:
        if (spec.r, spec.s) != (3, 3):
            raise InvalidArgumentError("Winograd engines need 3x3 filters")
        mults = POSITIONS * spec.tiles * spec.n * spec.c * spec.k
        per_tile = (2 * 2 * spec.r * spec.s) / POSITIONS
        waste = spec.out_h % 2 != 0 or spec.out_w % 2 != 0
    else:
        mults, per_tile, waste = direct, 1.0, False
    return ArithmeticReport(engine, mults, direct, direct / mults, per_tile, waste)
