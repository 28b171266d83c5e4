"""Quantized Winograd convolution (LANCE) with direct-convolution oracles."""

from lance.engines import (
    ArithmeticReport,
    ConvSpec,
    DomainTensor,
    DomainWeights,
    LanceConfig,
    Mode,
    arithmetic_report,
    direct_conv,
    lance_conv,
    lance_faithful,
    lance_gemm,
    prepare_weights,
    quantized_direct_conv,
    run_engine,
    winograd_conv_fp,
)
from lance.estimator import Conv2D
from lance.exceptions import FormatError, InvalidArgumentError, LanceError
from lance.quant import Granularity, QuantParams, dequantize, fit_params, quantize
from lance.tensor import extract_tiles, merge_tiles, read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "ArithmeticReport",
    "Conv2D",
    "ConvSpec",
    "DomainTensor",
    "DomainWeights",
    "FormatError",
    "Granularity",
    "InvalidArgumentError",
    "LanceConfig",
    "LanceError",
    "Mode",
    "QuantParams",
    "arithmetic_report",
    "dequantize",
    "direct_conv",
    "extract_tiles",
    "fit_params",
    "lance_conv",
    "lance_faithful",
    "lance_gemm",
    "merge_tiles",
    "prepare_weights",
    "quantize",
    "quantized_direct_conv",
    "read_tensor",
    "run_engine",
    "winograd_conv_fp",
    "write_tensor",
]
