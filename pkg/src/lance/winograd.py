"""F(2x2, 3x3) minimal filtering transforms.

A 4x4 input tile ``d`` and a 3x3 filter ``g`` give the 2x2 valid correlation

    S = At [(G g Gt) * (Bt d B)] A

where ``*`` is the element-wise product. All transform functions accept
stacks of matrices on the last two axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from lance.exceptions import InvalidArgumentError


@dataclass(frozen=True, eq=False)
class WinogradBasis:
    """Transform matrices for F(m x m, r x r) with ``alpha = m + r - 1``."""

    m: int
    r: int
    g_mat: np.ndarray
    bt_mat: np.ndarray
    at_mat: np.ndarray

    @property
    def alpha(self):
        return self.m + self.r - 1

    def __post_init__(self):
        a = self.alpha
        if (
            self.g_mat.shape != (a, self.r)
            or self.bt_mat.shape != (a, a)
            or self.at_mat.shape != (self.m, a)
        ):
            raise InvalidArgumentError("transform matrix shapes do not match (m, r)")


def _frozen(rows):
    arr = np.array(rows, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def basis_f2x2_3x3():
    """The F(2x2, 3x3) basis."""
    return WinogradBasis(
        m=2,
        r=3,
        g_mat=_frozen(
            [
                [1.0, 0.0, 0.0],
                [0.5, 0.5, 0.5],
                [0.5, -0.5, 0.5],
                [0.0, 0.0, 1.0],
            ]
        ),
        bt_mat=_frozen(
            [
                [1, 0, -1, 0],
                [0, 1, 1, 0],
                [0, -1, 1, 0],
                [0, 1, 0, -1],
            ]
        ),
        at_mat=_frozen(
            [
                [1, 1, 1, 0],
                [0, 1, -1, -1],
            ]
        ),
    )


def _check_trailing(arr, shape, what):
    if arr.ndim < 2 or arr.shape[-2:] != shape:
        raise InvalidArgumentError(
            f"{what} must end in a {shape[0]}x{shape[1]} matrix, got shape {arr.shape}"
        )


def transform_input(d, basis=None):
    """Return ``Bt d B`` for each 4x4 tile in ``d``."""
    basis = basis or basis_f2x2_3x3()
    d = np.asarray(d, dtype=np.float64)
    _check_trailing(d, (basis.alpha, basis.alpha), "input tile")
    return basis.bt_mat @ d @ basis.bt_mat.T


def transform_filter(g, basis=None):
    """Return ``G g Gt`` for each 3x3 filter in ``g``."""
    basis = basis or basis_f2x2_3x3()
    g = np.asarray(g, dtype=np.float64)
    _check_trailing(g, (basis.r, basis.r), "filter")
    return basis.g_mat @ g @ basis.g_mat.T


def transform_output(m_dom, basis=None):
    """Return ``At m A`` for each 4x4 Winograd-domain matrix in ``m_dom``."""
    basis = basis or basis_f2x2_3x3()
    m_dom = np.ascontiguousarray(m_dom, dtype=np.float64)
    _check_trailing(m_dom, (basis.alpha, basis.alpha), "domain matrix")
    return basis.at_mat @ m_dom @ basis.at_mat.T


def correlate_valid(d, g):
    """Plain 2-D valid correlation of one tile with one filter (reference)."""
    d = np.asarray(d, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    r, s = g.shape
    out = np.zeros((d.shape[0] - r + 1, d.shape[1] - s + 1))
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            out[i, j] = np.sum(d[i : i + r, j : j + s] * g)
    return out
