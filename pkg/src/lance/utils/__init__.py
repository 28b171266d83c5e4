from lance.utils.validation import (
    check_bits,
    check_consistent,
    check_filter_bank,
    check_pad,
    check_tensor4,
)

__all__ = [
    "check_bits",
    "check_consistent",
    "check_filter_bank",
    "check_pad",
    "check_tensor4",
]
