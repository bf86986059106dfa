"""QDS v1: bit-exact container for quantized datasets.

Layout (all little-endian):

    header, 34 bytes:
        magic        4s   "QDS1"
        version      u16  1
        sample_count u64
        height       u32
        width        u32
        channels     u32
        num_classes  u32
        flags        u32  bit 0: labels present

    record, one per sample in dataset order:
        bit_width    u8   0 (dropped) or 2..16
        label        u32
        scale        f32  present iff bit_width >= 2
        payload      ceil(n*b/8) bytes, iff bit_width >= 2
                     (offset-binary codes, MSB-first; see quantizer)

Dropped samples keep a 5-byte tombstone so the record index stays
aligned with score and plan files. Identical (dataset, plan) inputs
produce byte-identical files.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .allocator import ORIGINAL_BITS, AllocationPlan, compression_ratio
from .dataset import Dataset, SampleShape
from .quantizer import (
    PackedCodes,
    QuantizedSample,
    dequantize_sample,
    is_valid_bit_width,
    pack_codes,
    quantize_sample,
    unpack_codes,
)

QDS_MAGIC = b"QDS1"
QDS_VERSION = 1
FLAG_LABELS = 1

_HEADER = struct.Struct("<4sHQIIIII")
HEADER_BYTES = _HEADER.size  # 34

_RECORD_PREFIX = struct.Struct("<BI")  # bit_width, label
_SCALE = struct.Struct("<f")


class QdsFormatError(ValueError):
    """Structurally invalid QDS data (bad magic, truncation, bad widths)."""


@dataclass(frozen=True)
class QdsHeader:
    sample_count: int
    shape: SampleShape
    num_classes: int
    flags: int = FLAG_LABELS


@dataclass(frozen=True)
class StorageReport:
    payload_bits: int
    scale_bits: int
    metadata_bits: int  # per-record bit_width + label fields
    total_bytes: int    # includes the 34-byte header
    nominal_ratio: float
    realized_ratio: float

    def as_lines(self):
        return [f"{k}={getattr(self, k)}" for k in (
            "payload_bits", "scale_bits", "metadata_bits", "total_bytes",
            "nominal_ratio", "realized_ratio")]


def _payload_bytes(element_count: int, bit_width: int) -> int:
    return (element_count * bit_width + 7) // 8


def _build_report(shape: SampleShape, assignments) -> StorageReport:
    assignments = np.asarray(assignments)
    n = assignments.size
    elems = shape.element_count
    surviving = assignments[assignments > 0]
    payload_bits = int(8 * sum(_payload_bytes(elems, int(b)) for b in surviving))
    scale_bits = 32 * surviving.size
    metadata_bits = (8 + 32) * n
    total_bits = HEADER_BYTES * 8 + payload_bits + scale_bits + metadata_bits
    total_bytes = (total_bits + 7) // 8
    b_avg = int(assignments.sum()) / n if n else 0.0
    original_bits = n * elems * ORIGINAL_BITS
    realized = 1.0 - total_bits / original_bits if original_bits else 0.0
    return StorageReport(payload_bits, scale_bits, metadata_bits, total_bytes,
                         compression_ratio(b_avg), realized)


def write_qds(dataset: Dataset, plan: AllocationPlan, path) -> StorageReport:
    """Quantize per the plan and write the container atomically."""
    if len(plan) != len(dataset):
        raise ValueError(
            f"plan covers {len(plan)} samples, dataset has {len(dataset)}"
        )
    header = _HEADER.pack(
        QDS_MAGIC, QDS_VERSION, len(dataset),
        dataset.shape.height, dataset.shape.width, dataset.shape.channels,
        dataset.num_classes, FLAG_LABELS,
    )
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        for i in range(len(dataset)):
            values, label = dataset.sample(i)
            bits = int(plan.assignments[i])
            fh.write(_RECORD_PREFIX.pack(bits, label))
            if bits:
                q = quantize_sample(values, bits, label)
                fh.write(_SCALE.pack(q.scale))
                fh.write(pack_codes(q).payload)
    os.replace(tmp, path)
    return _build_report(dataset.shape, plan.assignments)


def _read_exact(fh, n: int, what: str):
    data = fh.read(n)
    if len(data) != n:
        raise QdsFormatError(f"truncated file: {what}")
    return data


def read_qds(path):
    """Read a container; returns (records, header) where a record is a
    QuantizedSample or None for a dropped sample."""
    with open(path, "rb") as fh:
        raw = _read_exact(fh, HEADER_BYTES, "header")
        magic, version, count, h, w, c, num_classes, flags = _HEADER.unpack(raw)
        if magic != QDS_MAGIC:
            raise QdsFormatError(f"bad magic {magic!r}, expected {QDS_MAGIC!r}")
        if version != QDS_VERSION:
            raise QdsFormatError(f"unsupported version {version}")
        shape = SampleShape(h, w, c)
        header = QdsHeader(count, shape, num_classes, flags)
        records = []
        for i in range(count):
            prefix = _read_exact(fh, _RECORD_PREFIX.size, f"record {i}")
            bits, label = _RECORD_PREFIX.unpack(prefix)
            if bits == 0:
                records.append(None)
                continue
            if not is_valid_bit_width(bits):
                raise QdsFormatError(f"record {i}: invalid bit width {bits}")
            (scale,) = _SCALE.unpack(_read_exact(fh, 4, f"record {i} scale"))
            payload = _read_exact(
                fh, _payload_bytes(shape.element_count, bits), f"record {i} payload"
            )
            codes = unpack_codes(PackedCodes(payload, shape.element_count, bits))
            records.append(QuantizedSample(codes, np.float32(scale), bits, label))
        if fh.read(1):
            raise QdsFormatError("trailing bytes after final record")
    return records, header


def storage_report(path) -> StorageReport:
    """Recompute the storage accounting from an existing file."""
    records, header = read_qds(path)
    assignments = np.array([0 if r is None else r.bit_width for r in records],
                           dtype=np.int32)
    return _build_report(header.shape, assignments)


def materialize_training_set(path) -> Dataset:
    """Dequantize all surviving records into an in-memory Dataset."""
    records, header = read_qds(path)
    kept = [r for r in records if r is not None]
    values = (
        np.stack([dequantize_sample(r) for r in kept])
        if kept else np.zeros((0, header.shape.element_count), dtype=np.float32)
    )
    labels = np.array([r.label for r in kept], dtype=np.int64)
    return Dataset(header.shape, header.num_classes, values, labels)
