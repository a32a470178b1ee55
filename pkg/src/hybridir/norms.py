"""Lossy one-byte document length encoding.

Keeps the four most significant bits of a length. Values below 8 are stored
verbatim; larger values store a 3-bit mantissa (the leading 1 is implicit)
and a shift field of ``bit_length - 3``. Decoding is exact up to 15 and
otherwise truncates toward zero, so ``decode_len(encode_len(x)) <= x``.
"""

from __future__ import annotations

import numpy as np

MAX_LEN = 2**31 - 1


def encode_len(length: int) -> int:
    if length < 0 or length > MAX_LEN:
        raise ValueError(f"length out of range: {length}")
    if length < 8:
        return length
    shift = length.bit_length() - 4
    mantissa = (length >> shift) & 0b111
    return ((shift + 1) << 3) | mantissa


def decode_len(code: int) -> int:
    if code < 8:
        return code
    shift = (code >> 3) - 1
    return ((code & 0b111) | 0b1000) << shift


# code -> decoded length for every byte value the encoder can produce
DECODE_TABLE = np.array([decode_len(c) for c in range(256)], dtype=np.float64)
