import threading

import numpy as np
import pytest

from lance import lowpgemm
from lance.exceptions import InvalidArgumentError
from lance.lowpgemm import CodeMatrix, affine_gemm, counting, gemm_codes
from lance.quant import QuantParams

from oracles import matmul_loop

UNIT = QuantParams(8, 0.0, 255.0)  # scale 1, offset 0


def test_identity_codes_widen():
    rng = np.random.default_rng(0)
    b = rng.integers(0, 256, (4, 6)).astype(np.uint8)
    out = gemm_codes(np.eye(4, dtype=np.uint8), b)
    assert out.dtype == np.int32
    np.testing.assert_array_equal(out, b.astype(np.int32))


def test_one_by_one():
    assert gemm_codes(np.array([[3]]), np.array([[3]])).tolist() == [[9]]


def test_random_against_scalar_loop():
    rng = np.random.default_rng(1)
    a = rng.integers(0, 256, (4, 5))
    b = rng.integers(0, 256, (5, 3))
    assert gemm_codes(a, b).tolist() == matmul_loop(a.tolist(), b.tolist())


def test_exactness_200_trials():
    rng = np.random.default_rng(2)
    for _ in range(200):
        m, k, n = rng.integers(1, 33, 3)
        a = rng.integers(0, 256, (m, k))
        b = rng.integers(0, 256, (k, n))
        ref = a.astype(np.int64) @ b.astype(np.int64)
        np.testing.assert_array_equal(gemm_codes(a, b), ref)


def test_worst_case_depth_does_not_overflow():
    k = lowpgemm.MAX_DEPTH
    a = np.full((1, k), 255, np.uint8)
    b = np.full((k, 1), 255, np.uint8)
    assert int(gemm_codes(a, b)[0, 0]) == k * 255 * 255 < 2**31


def test_depth_bound_enforced():
    k = lowpgemm.MAX_DEPTH + 1
    with pytest.raises(InvalidArgumentError):
        gemm_codes(np.zeros((1, k), np.uint8), np.zeros((k, 1), np.uint8))


def test_dim_mismatch():
    with pytest.raises(InvalidArgumentError):
        gemm_codes(np.zeros((2, 3), np.uint8), np.zeros((4, 2), np.uint8))


def test_codes_must_fit_in_a_byte():
    with pytest.raises(InvalidArgumentError):
        gemm_codes(np.array([[256]]), np.array([[1]]))


def test_code_matrix_validates_range():
    with pytest.raises(InvalidArgumentError):
        CodeMatrix(np.array([[0, 4]]), QuantParams(2, 0.0, 1.0))


def test_affine_unit_params_equal_integer_product():
    rng = np.random.default_rng(3)
    a = CodeMatrix(rng.integers(0, 256, (3, 7)), UNIT)
    b = CodeMatrix(rng.integers(0, 256, (7, 2)), UNIT)
    np.testing.assert_array_equal(affine_gemm(a, b), gemm_codes(a, b).astype(float))


def test_affine_pure_scaling():
    half = QuantParams(8, 0.0, 127.5)  # scale 0.5
    rng = np.random.default_rng(4)
    a = CodeMatrix(rng.integers(0, 256, (5, 4)), half)
    b = CodeMatrix(rng.integers(0, 256, (4, 3)), half)
    np.testing.assert_array_equal(affine_gemm(a, b), 0.25 * gemm_codes(a, b))


@pytest.mark.parametrize("seed", range(20))
def test_affine_matches_float_gemm_of_dequantized(seed):
    rng = np.random.default_rng(seed)
    m, k, n = rng.integers(1, 33, 3)
    lo_a, lo_b = rng.normal(0, 2, 2)
    pa = QuantParams(int(rng.integers(2, 9)), lo_a, lo_a + rng.uniform(0.1, 5))
    pb = QuantParams(int(rng.integers(2, 9)), lo_b, lo_b + rng.uniform(0.1, 5))
    a = CodeMatrix(rng.integers(0, pa.levels + 1, (m, k)), pa)
    b = CodeMatrix(rng.integers(0, pb.levels + 1, (k, n)), pb)
    ref = a.dequantize() @ b.dequantize()
    err = np.linalg.norm(affine_gemm(a, b) - ref) / max(np.linalg.norm(ref), 1e-30)
    assert err <= 1e-4


def test_affine_requires_code_matrices():
    with pytest.raises(InvalidArgumentError):
        affine_gemm(np.zeros((2, 2)), np.zeros((2, 2)))


def test_counter_records_gemm_work():
    with counting() as count:
        assert count() == 0
        gemm_codes(np.ones((4, 5), np.uint8), np.ones((5, 3), np.uint8))
        assert count() == 4 * 5 * 3
    lowpgemm.reset_multiply_counter()
    assert lowpgemm.multiply_counter() == 0


def test_counter_is_thread_safe():
    counter = lowpgemm.MultiplyCounter()

    def work():
        for _ in range(1000):
            counter.add(3)

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert counter.count == 8 * 1000 * 3


def test_row_parallel_gemm_is_bitwise_identical():
    rng = np.random.default_rng(9)
    a = rng.integers(0, 256, (64, 40))
    b = rng.integers(0, 256, (40, 16))
    full = gemm_codes(a, b)
    parts = np.vstack([gemm_codes(a[i : i + 8], b) for i in range(0, 64, 8)])
    assert full.tobytes() == parts.tobytes()
