"""Self-check suite behind ``lance verify``.

Every check is a small, seeded, self-contained experiment returning
``(passed, detail)``. Checks that exercise the transform matrices take the
basis as an argument so that a corrupted basis can be fed in on purpose.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable

import numpy as np

from lance import lowpgemm
from lance.engines import (
    ConvSpec,
    LanceConfig,
    arithmetic_report,
    direct_conv,
    lance_faithful,
    lance_gemm,
    winograd_conv_fp,
)
from lance.lowpgemm import CodeMatrix, affine_gemm, gemm_codes
from lance.quant import QuantParams, dequantize_array, fit_params, quantize_array
from lance.tensor import extract_tiles, merge_tiles, read_tensor, write_tensor
from lance.winograd import (
    basis_f2x2_3x3,
    correlate_valid,
    transform_filter,
    transform_input,
    transform_output,
)

# 2-bit codes of the 4x4 ramp 0..15 and their input transform, as printed
# in the LANCE motivating example.
GOLDEN_CODES = np.array(
    [[0, 1, 1, 1], [1, 1, 2, 2], [2, 2, 2, 3], [3, 3, 3, 3]], dtype=np.float64
)
GOLDEN_TRANSFORMED = np.array(
    [[-1, -2, 0, 1], [-1, 7, 1, -2], [1, 1, -1, 0], [-1, -3, 1, -1]], dtype=np.float64
)


@dataclass(frozen=True)
class Check:
    name: str
    formula: str
    run: Callable[..., tuple]


@dataclass(frozen=True)
class CheckResult:
    name: str
    formula: str
    passed: bool
    detail: str


def rel_fro(y, ref):
    ref = np.asarray(ref, dtype=np.float64)
    num = np.linalg.norm(np.asarray(y, dtype=np.float64) - ref)
    den = np.linalg.norm(ref)
    return num / den if den else num


def check_golden_vector(basis):
    got = transform_input(GOLDEN_CODES, basis)
    ok = np.array_equal(got, GOLDEN_TRANSFORMED)
    return ok, "exact" if ok else f"got {got.tolist()}"


def check_correlation_identity(basis, trials=200, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        d = rng.uniform(-1, 1, (4, 4))
        g = rng.uniform(-1, 1, (3, 3))
        s = transform_output(transform_filter(g, basis) * transform_input(d, basis), basis)
        worst = max(worst, float(np.abs(s - correlate_valid(d, g)).max()))
    return worst <= 1e-5, f"max abs error {worst:.3g} over {trials} tiles"


def check_quantizer(basis=None, seed=1):
    rng = np.random.default_rng(seed)
    for bits in range(2, 9):
        values = rng.normal(0, 3, 10_000)
        p = fit_params(values, bits)
        codes = quantize_array(values, p.t_min, p.t_max, bits)
        back = dequantize_array(codes, p.t_min, p.t_max, bits)
        if codes.max() > p.levels:
            return False, f"{bits}-bit code out of range"
        err = np.abs(back - values).max()
        if err > p.scale / 2 + 1e-6 * p.scale:
            return False, f"{bits}-bit round-trip error {err:.3g} > scale/2"
        order = np.argsort(values)
        if np.any(np.diff(codes[order].astype(int)) < 0):
            return False, f"{bits}-bit codes not monotone"
        ends = quantize_array(np.array([p.t_min, p.t_max]), p.t_min, p.t_max, bits)
        if ends.tolist() != [0, p.levels]:
            return False, f"{bits}-bit endpoints map to {ends.tolist()}"
    return True, "b=2..8: range, scale/2 bound, endpoints, monotone"


def check_tiling(basis=None, seed=2):
    rng = np.random.default_rng(seed)
    for h, w, pad in [(4, 4, 0), (5, 7, 1), (6, 6, 0), (9, 4, 1)]:
        x = rng.standard_normal((1, h, w, 2)).astype(np.float32)
        g = rng.standard_normal((1, 3, 3, 2)).astype(np.float32)
        tiles = extract_tiles(x, pad=pad)
        out = np.zeros((1, tiles.p, 2, 2, 1))
        for t in range(tiles.p):
            for c in range(2):
                out[0, t, :, :, 0] += correlate_valid(tiles.tiles[0, t, :, :, c], g[0, :, :, c])
        y = merge_tiles(out, tiles.out_h, tiles.out_w)
        err = np.abs(y - direct_conv(x, g, pad=pad)).max()
        if err > 1e-5:
            return False, f"{h}x{w} pad {pad}: tiled correlation differs by {err:.3g}"
    return True, "tiled correlation == whole-image correlation"


def check_winograd_engine(basis=None, seed=3):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for h, c, k, pad in [(4, 1, 1, 0), (6, 3, 8, 1), (8, 16, 8, 0), (7, 3, 2, 1)]:
        x = rng.standard_normal((2, h, h, c)).astype(np.float32)
        w = rng.standard_normal((k, 3, 3, c)).astype(np.float32)
        worst = max(worst, rel_fro(winograd_conv_fp(x, w, pad=pad), direct_conv(x, w, pad=pad)))
    return worst <= 1e-4, f"max relative Frobenius error {worst:.3g}"


def check_gemm_exact(basis=None, seed=4):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        m, k, n = rng.integers(1, 33, 3)
        a = rng.integers(0, 256, (m, k))
        b = rng.integers(0, 256, (k, n))
        ref = np.zeros((m, n), dtype=np.int64)
        for i in range(m):
            for j in range(n):
                ref[i, j] = sum(int(a[i, t]) * int(b[t, j]) for t in range(k))
        if not np.array_equal(gemm_codes(a, b), ref):
            return False, f"{m}x{k}x{n} integer GEMM differs from scalar loop"
    pa, pb = QuantParams(8, -1.5, 2.0), QuantParams(8, 0.25, 3.0)
    a = CodeMatrix(rng.integers(0, 256, (12, 9)), pa)
    b = CodeMatrix(rng.integers(0, 256, (9, 5)), pb)
    err = rel_fro(affine_gemm(a, b), a.dequantize() @ b.dequantize())
    return err <= 1e-4, f"exact integer GEMM; affine correction error {err:.3g}"


def check_mode_equivalence(basis=None, seed=5):
    rng = np.random.default_rng(seed)
    worst = 0.0
    cfg = LanceConfig(8, 8, "position")
    for h, c, k, pad in [(6, 3, 4, 1), (8, 16, 8, 0), (5, 2, 3, 1)]:
        x = rng.standard_normal((2, h, h, c)).astype(np.float32)
        w = rng.standard_normal((k, 3, 3, c)).astype(np.float32)
        diff = np.abs(lance_faithful(x, w, pad=pad, cfg=cfg) - lance_gemm(x, w, pad=pad, cfg=cfg))
        worst = max(worst, float(diff.max()))
    return worst <= 1e-3, f"max abs difference {worst:.3g}"


def check_lance_accuracy(basis=None, seed=6):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((1, 8, 8, 4)).astype(np.float32)
    w = rng.standard_normal((2, 3, 3, 4)).astype(np.float32)
    err = rel_fro(lance_faithful(x, w, pad=1, cfg=LanceConfig(8, 8, "tile")), direct_conv(x, w, pad=1))
    return err <= 5e-2, f"8-8 per-tile relative Frobenius error {err:.3g}"


def check_multiply_counts(basis=None, seed=7):
    rng = np.random.default_rng(seed)
    spec = ConvSpec(n=2, c=3, h=7, w=6, k=4, pad=1)
    x = rng.standard_normal(spec.input_shape).astype(np.float32)
    w = rng.standard_normal(spec.filter_shape).astype(np.float32)
    runs = {
        "direct": lambda: direct_conv(x, w, pad=1),
        "winograd": lambda: winograd_conv_fp(x, w, pad=1),
        "lance-faithful": lambda: lance_faithful(x, w, pad=1),
        "lance-gemm": lambda: lance_gemm(x, w, pad=1),
    }
    for name, fn in runs.items():
        lowpgemm.reset_multiply_counter()
        fn()
        expected = arithmetic_report(spec, name).multiplies
        if lowpgemm.multiply_counter() != expected:
            return False, f"{name}: counted {lowpgemm.multiply_counter()}, expected {expected}"
    even = arithmetic_report(ConvSpec(n=1, c=2, h=10, w=10, k=3), "winograd")
    ok = even.ratio_vs_direct == 36 / 16
    return ok, f"counters match; even-output ratio {even.ratio_vs_direct}"


def check_file_roundtrip(basis=None, seed=8):
    rng = np.random.default_rng(seed)
    t = rng.standard_normal((2, 3, 4, 5)).astype(np.float32)
    t.view(np.uint32)[0, 0, 0, 0] = 0x7FC01234  # NaN with payload
    buf = io.BytesIO()
    write_tensor(t, buf)
    back = read_tensor(buf.getvalue())
    ok = back.shape == t.shape and back.tobytes() == t.tobytes()
    return ok, "bitwise" if ok else "payload changed"


CHECKS = [
    Check("input transform golden vector", "Bt d^ B of 2-bit ramp codes", check_golden_vector),
    Check("minimal filtering identity", "At[(G g Gt) . (Bt d B)]A == d * g", check_correlation_identity),
    Check("quantizer contract", "Q(x) / Q'(x^) uniform linear quantization", check_quantizer),
    Check("tile extraction and merge", "Y = sum_c X_c * W_c via tiles", check_tiling),
    Check("winograd engine vs direct", "Y = sum_c At[(G g Gt) . (Bt d B)]A", check_winograd_engine),
    Check("integer GEMM", "int32 sum a^ b^ + zero-point correction", check_gemm_exact),
    Check("LANCE accuracy", "At Q'[Q(G g Gt) . Q(Bt d B)] A", check_lance_accuracy),
    Check("GEMM mode == faithful mode", "per-position GEMM vs per-channel loop", check_mode_equivalence),
    Check("multiply counts", "(m+r-1)^2 vs m^2 r^2 multiplies", check_multiply_counts),
    Check("tensor file round-trip", "LTEN read(write(t)) == t", check_file_roundtrip),
]


def run_checks(basis=None):
    """Run every check; returns a list of :class:`CheckResult`."""
    basis = basis or basis_f2x2_3x3()
    results = []
    for check in CHECKS:
        try:
            passed, detail = check.run(basis)
        except Exception as exc:  # a crashing check is a failed check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(check.name, check.formula, bool(passed), detail))
    return results


def format_results(results):
    width = max(len(r.name) for r in results)
    lines = [
        f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  [{r.formula}]  {r.detail}"
        for r in results
    ]
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    return "\n".join(lines)

