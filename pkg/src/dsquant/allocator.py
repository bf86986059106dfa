"""Turn sensitivity scores into per-sample bit-width assignments.

Strategies:

* adaptive_two_group — split by score into two groups (highest scores
  first) and give the high group the larger bit-width.
* adaptive_k_group — same mechanism with any number of descending bit
  levels and group fractions.
* fixed_uniform — one bit-width for every surviving sample.

A random prune step (seeded) may drop a fraction of samples to 0 bits
before allocation, or an explicit keep-list can pin the survivors so an
external selector can be plugged in. The average bit-width b_avg counts
dropped samples as 0 and the nominal compression ratio is 1 - b_avg/32.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quantizer import is_valid_bit_width

STRATEGIES = ("adaptive_two_group", "adaptive_k_group", "fixed_uniform")

ORIGINAL_BITS = 32

_FRACTION_TOL = 1e-9


@dataclass(frozen=True)
class AllocationConfig:
    strategy: str
    bit_levels: tuple
    group_fractions: tuple = None
    prune_ratio: float = 0.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        levels = tuple(int(b) for b in self.bit_levels)
        if not levels:
            raise ValueError("bit_levels must be non-empty")
        for b in levels:
            if not is_valid_bit_width(b):
                raise ValueError(f"invalid bit width {b}")
        # (16, 16) style equal-level configs are legal, so ties are allowed
        if any(a < b for a, b in zip(levels, levels[1:])):
            raise ValueError("bit_levels must be non-increasing")
        if 0 in levels[:-1]:
            raise ValueError("0 bits only allowed as the last level")
        if self.strategy == "adaptive_two_group" and len(levels) != 2:
            raise ValueError("adaptive_two_group needs exactly two bit levels")
        fractions = self.group_fractions
        if fractions is None:
            fractions = tuple(1.0 / len(levels) for _ in levels)
        else:
            fractions = tuple(float(f) for f in fractions)
        if len(fractions) != len(levels):
            raise ValueError("group_fractions must match bit_levels")
        if any(f <= 0 for f in fractions):
            raise ValueError("group fractions must be positive")
        if abs(sum(fractions) - 1.0) > _FRACTION_TOL:
            raise ValueError("group fractions must sum to 1")
        if not 0.0 <= self.prune_ratio < 1.0:
            raise ValueError("prune_ratio must be in [0, 1)")
        object.__setattr__(self, "bit_levels", levels)
        object.__setattr__(self, "group_fractions", fractions)


@dataclass(frozen=True)
class AllocationPlan:
    assignments: np.ndarray  # int32 bit-width per sample
    b_avg: float
    compression_ratio: float

    @classmethod
    def from_assignments(cls, assignments) -> "AllocationPlan":
        assignments = np.ascontiguousarray(assignments, dtype=np.int32)
        if assignments.size == 0:
            raise ValueError("empty assignment list")
        b_avg = int(assignments.sum()) / assignments.size
        assignments.setflags(write=False)
        return cls(assignments, b_avg, compression_ratio(b_avg))

    def __len__(self) -> int:
        return self.assignments.size


def largest_remainder_sizes(fractions, total: int) -> list:
    """Integer group sizes summing to total, fractional shares rounded
    by largest remainder; remainder ties go to the earlier group."""
    quotas = [f * total for f in fractions]
    sizes = [math.floor(q) for q in quotas]
    leftover = total - sum(sizes)
    order = sorted(range(len(fractions)),
                   key=lambda g: (sizes[g] - quotas[g], g))
    for g in order[:leftover]:
        sizes[g] += 1
    return sizes


def split_by_score(scores, fractions, indices=None) -> list:
    """Partition sample indices into score-ordered groups.

    Samples sort by descending score, ties by ascending index; group g
    takes the next largest-remainder share. Highest-score group first.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if indices is None:
        indices = np.arange(scores.size, dtype=np.int64)
    else:
        indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("empty score list")
    # lexsort: primary key -score, secondary key index
    order = indices[np.lexsort((indices, -scores[indices]))]
    sizes = largest_remainder_sizes(fractions, indices.size)
    groups, start = [], 0
    for size in sizes:
        groups.append(order[start:start + size])
        start += size
    return groups


def solve_budget(group_sizes, bit_levels) -> float:
    """Average bits per sample for the given grouping (exact numerator)."""
    if len(group_sizes) != len(bit_levels) or not group_sizes:
        raise ValueError("group_sizes and bit_levels must be equal, non-empty")
    total = sum(int(s) * int(b) for s, b in zip(group_sizes, bit_levels))
    n = sum(int(s) for s in group_sizes)
    if n <= 0:
        raise ValueError("group sizes must sum to a positive count")
    return total / n


def compression_ratio(b_avg: float) -> float:
    """Nominal payload saving vs 32-bit storage: 1 - b_avg/32."""
    if not 0.0 <= b_avg <= ORIGINAL_BITS:
        raise ValueError(f"b_avg must be in [0, {ORIGINAL_BITS}]")
    return 1.0 - b_avg / ORIGINAL_BITS


def allocate(scores, config: AllocationConfig, seed: int = 0,
             keep_indices=None) -> AllocationPlan:
    """Build a per-sample bit-width plan under the configured budget."""
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.size
    if n == 0:
        raise ValueError("empty score list")

    if keep_indices is not None:
        survivors = np.unique(np.asarray(keep_indices, dtype=np.int64))
        if survivors.size and (survivors[0] < 0 or survivors[-1] >= n):
            raise ValueError("keep-list index out of range")
    elif config.prune_ratio > 0.0:
        n_drop = int(round(config.prune_ratio * n))
        rng = np.random.default_rng(seed)
        dropped = rng.choice(n, size=n_drop, replace=False)
        mask = np.ones(n, dtype=bool)
        mask[dropped] = False
        survivors = np.flatnonzero(mask)
    else:
        survivors = np.arange(n, dtype=np.int64)

    assignments = np.zeros(n, dtype=np.int32)
    if survivors.size:
        if config.strategy == "fixed_uniform":
            assignments[survivors] = config.bit_levels[0]
        else:
            groups = split_by_score(scores, config.group_fractions, survivors)
            for group, bits in zip(groups, config.bit_levels):
                assignments[group] = bits
    return AllocationPlan.from_assignments(assignments)


def write_plan(plan: AllocationPlan, path) -> None:
    """Header `N b_avg ratio`, then one `index<TAB>bits` line per sample."""
    with open(path, "w") as fh:
        fh.write(f"{len(plan)} {plan.b_avg:.9g} {plan.compression_ratio:.9g}\n")
        for i, b in enumerate(plan.assignments):
            fh.write(f"{i}\t{int(b)}\n")


def read_plan(path) -> AllocationPlan:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: malformed plan header")
        n = int(header[0])
        assignments = np.zeros(n, dtype=np.int32)
        seen = 0
        for line in fh:
            line = line.strip()
            if not line:
                continue
            idx, bits = line.split("\t")
            idx, bits = int(idx), int(bits)
            if idx != seen:
                raise ValueError(f"{path}: plan indices must be 0..N-1 in order")
            if not is_valid_bit_width(bits):
                raise ValueError(f"{path}: invalid bit width {bits}")
            assignments[idx] = bits
            seen += 1
    if seen != n:
        raise ValueError(f"{path}: expected {n} assignments, found {seen}")
    return AllocationPlan.from_assignments(assignments)


def read_keep_list(path) -> np.ndarray:
    """One surviving sample index per line."""
    with open(path) as fh:
        indices = [int(line) for line in fh if line.strip()]
    return np.unique(np.asarray(indices, dtype=np.int64))
