# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bit-packing kernels.

Codes are stored MSB-first within each byte; the final byte is padded
with zero bits. ``dsquant._bitpack_py`` provides the equivalent pure
NumPy implementation used when this extension is unavailable.
"""

import numpy as np


def pack_offsets(offsets, int bit_width):
    """Pack unsigned offsets into a bytes object, bit_width bits each."""
    arr = np.ascontiguousarray(offsets, dtype=np.uint32)
    cdef unsigned int[::1] off = arr
    cdef Py_ssize_t n = off.shape[0]
    cdef Py_ssize_t nbytes = (n * bit_width + 7) // 8
    out = np.zeros(nbytes, dtype=np.uint8)
    cdef unsigned char[::1] buf = out
    cdef unsigned long long acc = 0
    cdef int nbits = 0
    cdef Py_ssize_t i, j = 0
    for i in range(n):
        acc = (acc << bit_width) | off[i]
        nbits += bit_width
        while nbits >= 8:
            nbits -= 8
            buf[j] = <unsigned char>((acc >> nbits) & 0xFF)
            j += 1
    if nbits > 0:
        buf[j] = <unsigned char>((acc << (8 - nbits)) & 0xFF)
    return out.tobytes()


def unpack_offsets(payload, Py_ssize_t count, int bit_width):
    """Inverse of pack_offsets; returns a uint32 array of length count."""
    src_arr = np.frombuffer(payload, dtype=np.uint8)
    cdef const unsigned char[::1] src = src_arr
    out = np.zeros(count, dtype=np.uint32)
    cdef unsigned int[::1] dst = out
    cdef unsigned long long acc = 0
    cdef int nbits = 0
    cdef unsigned int mask = ((<unsigned int>1) << bit_width) - 1
    cdef Py_ssize_t i, j = 0
    for i in range(count):
        while nbits < bit_width:
            acc = (acc << 8) | src[j]
            j += 1
            nbits += 8
        nbits -= bit_width
        dst[i] = <unsigned int>((acc >> nbits) & mask)
    return out
