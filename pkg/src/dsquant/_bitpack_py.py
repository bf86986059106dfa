"""Pure NumPy fallback for the bit-packing kernels.

Same contract as the compiled ``dsquant._bitpack`` extension: offsets
are written MSB-first within each byte, final byte zero-padded.
"""

import numpy as np


def pack_offsets(offsets, bit_width):
    """Pack unsigned offsets into a bytes object, bit_width bits each."""
    offsets = np.ascontiguousarray(offsets, dtype=np.uint32)
    if offsets.size == 0:
        return b""
    shifts = np.arange(bit_width - 1, -1, -1, dtype=np.uint32)
    bits = ((offsets[:, None] >> shifts) & 1).astype(np.uint8)
    return np.packbits(bits.ravel()).tobytes()


def unpack_offsets(payload, count, bit_width):
    """Inverse of pack_offsets; returns a uint32 array of length count."""
    if count == 0:
        return np.zeros(0, dtype=np.uint32)
    raw = np.frombuffer(payload, dtype=np.uint8)
    bits = np.unpackbits(raw, count=count * bit_width)
    weights = np.uint32(1) << np.arange(bit_width - 1, -1, -1, dtype=np.uint32)
    grouped = bits.reshape(count, bit_width).astype(np.uint32)
    return (grouped * weights).sum(axis=1, dtype=np.uint32)
