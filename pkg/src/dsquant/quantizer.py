"""Per-sample linear symmetric quantization and variable-width packing.

A sample is quantized with a single positive scale s derived from its
maximum absolute value m: s = (m + 1e-12) / (2^(b-1) - 1). Codes are
signed integers in [-Q, Q] with Q = 2^(b-1) - 1; reconstruction is
s * code. Rounding is half-away-from-zero. Bit-width 0 means the sample
is dropped; bit-width 1 is rejected (its code range would collapse to
{0}).

Packed layout (normative for the QDS container): each code c is written
as the unsigned offset c + Q in exactly b bits, MSB-first within each
byte, zero-padded to a byte boundary. Offsets occupy [0, 2Q]; the value
2^b - 1 is a reserved sentinel never produced by the encoder.

Packing/unpacking runs on a compiled kernel when the extension built;
``USING_NATIVE_KERNEL`` reports which implementation is active.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:
    from . import _bitpack as _kernel
    USING_NATIVE_KERNEL = True
except ImportError:  # extension not built; NumPy fallback
    from . import _bitpack_py as _kernel
    USING_NATIVE_KERNEL = False

EPSILON = 1e-12
MIN_BIT_WIDTH = 2
MAX_BIT_WIDTH = 16


def is_valid_bit_width(b: int) -> bool:
    """True for widths a sample may be stored at (0 = dropped)."""
    return b == 0 or MIN_BIT_WIDTH <= b <= MAX_BIT_WIDTH


def max_code(bit_width: int) -> int:
    """Q = 2^(b-1) - 1, the symmetric code range bound."""
    _require_storable(bit_width)
    return (1 << (bit_width - 1)) - 1


def _require_storable(bit_width: int) -> None:
    if not MIN_BIT_WIDTH <= bit_width <= MAX_BIT_WIDTH:
        raise ValueError(f"bit width must be in [{MIN_BIT_WIDTH}, {MAX_BIT_WIDTH}], got {bit_width}")


@dataclass(frozen=True)
class QuantizedSample:
    codes: np.ndarray  # int32, |code| <= Q
    scale: np.float32
    bit_width: int
    label: int


@dataclass(frozen=True)
class PackedCodes:
    payload: bytes
    count: int
    bit_width: int


def compute_scale(values, bit_width: int) -> np.float32:
    """Scale factor (m + eps) / Q, computed in float64, stored float32."""
    _require_storable(bit_width)
    v = np.asarray(values, dtype=np.float64)
    if not np.isfinite(v).all():
        raise ValueError("sample values must be finite")
    m = float(np.abs(v).max()) if v.size else 0.0
    return np.float32((m + EPSILON) / max_code(bit_width))


def quantize_sample(values, bit_width: int, label: int = 0) -> QuantizedSample:
    """Quantize one flattened sample at the given bit-width."""
    scale = compute_scale(values, bit_width)
    q = max_code(bit_width)
    scaled = np.asarray(values, dtype=np.float64) / float(scale)
    # round half away from zero, symmetric about 0
    rounded = np.copysign(np.floor(np.abs(scaled) + 0.5), scaled)
    codes = np.clip(rounded, -q, q).astype(np.int32)
    return QuantizedSample(codes, scale, bit_width, label)


def dequantize_sample(q: QuantizedSample) -> np.ndarray:
    """Reconstruct float32 values as scale * code."""
    if q.bit_width == 0:
        raise ValueError("cannot dequantize a dropped (0-bit) sample")
    return (float(q.scale) * q.codes.astype(np.float64)).astype(np.float32)


def pack_codes(q: QuantizedSample) -> PackedCodes:
    """Pack signed codes into the offset-binary bit stream."""
    bound = max_code(q.bit_width)
    codes = np.asarray(q.codes)
    if codes.size and (codes.min() < -bound or codes.max() > bound):
        raise ValueError(f"code outside [-{bound}, {bound}]")
    offsets = (codes.astype(np.int64) + bound).astype(np.uint32)
    payload = _kernel.pack_offsets(offsets, q.bit_width)
    return PackedCodes(payload, int(codes.size), q.bit_width)


def unpack_codes(p: PackedCodes) -> np.ndarray:
    """Inverse of pack_codes; exact for every valid code sequence."""
    bound = max_code(p.bit_width)
    expected = (p.count * p.bit_width + 7) // 8
    if len(p.payload) != expected:
        raise ValueError(
            f"payload is {len(p.payload)} bytes, expected {expected} "
            f"for {p.count} codes at {p.bit_width} bits"
        )
    pad_bits = expected * 8 - p.count * p.bit_width
    if pad_bits and p.payload and p.payload[-1] & ((1 << pad_bits) - 1):
        raise ValueError("nonzero trailing pad bits")
    offsets = _kernel.unpack_offsets(p.payload, p.count, p.bit_width)
    sentinel = (1 << p.bit_width) - 1
    if offsets.size and int(offsets.max()) >= sentinel:
        raise ValueError(f"reserved offset {sentinel} in payload")
    return (offsets.astype(np.int64) - bound).astype(np.int32)
