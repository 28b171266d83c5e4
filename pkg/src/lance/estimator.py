"""scikit-learn style wrapper around the convolution engines."""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from lance.engines import (
    ENGINES,
    QUANTIZED_ENGINES,
    LanceConfig,
    Mode,
    direct_conv,
    lance_faithful,
    lance_gemm,
    prepare_weights,
    quantized_direct_conv,
    winograd_conv_fp,
)
from lance.exceptions import InvalidArgumentError
from lance.utils.validation import check_filter_bank, check_pad, check_tensor4


class Conv2D(TransformerMixin, BaseEstimator):
    """Fixed-weight convolution layer as a transformer.

    ``fit`` validates the filters and, for the LANCE engines, transforms and
    quantizes them once; ``transform`` convolves NHWC batches with them.

    Parameters
    ----------
    filters : array-like of shape (K, R, S, C)
        Filter bank.
    engine : str, default="lance-faithful"
        One of ``direct``, ``quantized-direct``, ``winograd``,
        ``lance-faithful`` or ``lance-gemm``.
    bits_w, bits_i : int, default=8
        Weight/input bit-widths for quantized engines (32 = unquantized).
    granularity : {"tile", "position", "tensor"}, default="tile"
        Quantization scope in the Winograd domain. ``lance-gemm`` needs
        ``position`` or ``tensor``.
    pad : {0, 1}, default=0
        Zero padding on every side.

    Examples
    --------
    >>> import numpy as np
    >>> w = np.zeros((1, 3, 3, 1), np.float32); w[0, 1, 1, 0] = 1
    >>> x = np.arange(16, dtype=np.float32).reshape(1, 4, 4, 1)
    >>> y = Conv2D(w, engine="winograd", pad=1).fit(x).transform(x)
    >>> bool(np.allclose(y, x))
    True
    """

    def __init__(self, filters=None, engine="lance-faithful", bits_w=8, bits_i=8,
                 granularity="tile", pad=0):
        self.filters = filters
        self.engine = engine
        self.bits_w = bits_w
        self.bits_i = bits_i
        self.granularity = granularity
        self.pad = pad

    def _config(self):
        mode = Mode.GEMM if self.engine == "lance-gemm" else Mode.FAITHFUL
        return LanceConfig(self.bits_w, self.bits_i, self.granularity, mode)

    def fit(self, X=None, y=None):
        """Validate parameters and precompute the filter transform.

        ``X`` is optional; when given its channel count is checked against
        the filters.
        """
        if self.engine not in ENGINES:
            raise InvalidArgumentError(f"unknown engine {self.engine!r}")
        if self.filters is None:
            raise InvalidArgumentError("Conv2D needs a filter bank")
        check_pad(self.pad)
        winograd = self.engine in ("winograd", "lance-faithful", "lance-gemm")
        w = check_filter_bank(self.filters, winograd=winograd)
        self.config_ = self._config() if self.engine in QUANTIZED_ENGINES else None
        if X is not None:
            X = check_tensor4(X, name="X")
            if X.shape[3] != w.shape[3]:
                raise InvalidArgumentError(
                    f"X has {X.shape[3]} channels, filters expect {w.shape[3]}"
                )
        self.filters_ = w
        self.weights_ = (
            prepare_weights(w, self.config_)
            if self.engine in ("lance-faithful", "lance-gemm")
            else w
        )
        self.n_filters_, self.kernel_size_ = w.shape[0], w.shape[1:3]
        self.n_channels_ = w.shape[3]
        return self

    def transform(self, X):
        """Convolve an NHWC batch; returns an NHWC float32 array."""
        check_is_fitted(self, "weights_")
        X = check_tensor4(X, name="X")
        if self.engine == "direct":
            return direct_conv(X, self.weights_, pad=self.pad)
        if self.engine == "winograd":
            return winograd_conv_fp(X, self.weights_, pad=self.pad)
        if self.engine == "quantized-direct":
            return quantized_direct_conv(X, self.weights_, pad=self.pad, cfg=self.config_)
        if self.engine == "lance-gemm":
            return lance_gemm(X, self.weights_, pad=self.pad, cfg=self.config_)
        return lance_faithful(X, self.weights_, pad=self.pad, cfg=self.config_)

    def output_shape(self, input_shape):
        check_is_fitted(self, "weights_")
        n, h, w, _ = input_shape
        r, s = self.kernel_size_
        return (n, h + 2 * self.pad - r + 1, w + 2 * self.pad - s + 1, self.n_filters_)
