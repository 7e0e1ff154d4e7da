"""Edge-coverage maps, hit-count bucketing, and the global novelty accumulator."""

from __future__ import annotations

from collections import Counter

import numpy as np

MAP_SIZE = 65536

# Raw hit counts are coarsened into 8 buckets so that count-magnitude changes
# register as new behavior: {1, 2, 3, 4-7, 8-15, 16-31, 32-127, 128+}.
_BUCKET_LUT = np.zeros(256, dtype=np.uint8)
for _c in range(1, 256):
    if _c == 1:
        _b = 1
    elif _c == 2:
        _b = 2
    elif _c == 3:
        _b = 3
    elif _c < 8:
        _b = 4
    elif _c < 16:
        _b = 5
    elif _c < 32:
        _b = 6
    elif _c < 128:
        _b = 7
    else:
        _b = 8
    _BUCKET_LUT[_c] = _b


def bucket(count: int) -> int:
    """Map a raw edge hit count to its bucket id (0 = not hit)."""
    if not 0 <= count <= 255:
        raise ValueError(f"count out of range: {count}")
    return int(_BUCKET_LUT[count])


class CoverageMap:
    """Fixed-size array of 65536 one-byte edge hit counters."""

    __slots__ = ("counters", "_nz")

    def __init__(self, counters: np.ndarray, nz: np.ndarray | None = None):
        if counters.shape != (MAP_SIZE,) or counters.dtype != np.uint8:
            raise ValueError("coverage map must be 65536 uint8 counters")
        self.counters = counters
        self._nz = nz  # cached nonzero indices; maps are immutable once built

    @classmethod
    def empty(cls) -> "CoverageMap":
        return cls(np.zeros(MAP_SIZE, dtype=np.uint8))

    @classmethod
    def from_bytes(cls, raw: bytes) -> "CoverageMap":
        if len(raw) != MAP_SIZE:
            raise ValueError(f"expected {MAP_SIZE} bytes, got {len(raw)}")
        return cls(np.frombuffer(raw, dtype=np.uint8).copy())

    @classmethod
    def from_edges(cls, edges) -> "CoverageMap":
        """Build a map from an iterable of edge indices (repeats accumulate)."""
        counts = Counter(e & (MAP_SIZE - 1) for e in edges)
        counters = np.zeros(MAP_SIZE, dtype=np.uint8)
        idx = sorted(counts)
        counters[idx] = [min(counts[i], 255) for i in idx]
        return cls(counters, np.asarray(idx, dtype=np.intp))

    def nonzero(self) -> np.ndarray:
        if self._nz is None:
            self._nz = np.nonzero(self.counters)[0]
        return self._nz

    def signature(self) -> frozenset[tuple[int, int]]:
        """Set of (edge index, bucket) pairs; the behavior signature."""
        idx = self.nonzero()
        buckets = _BUCKET_LUT[self.counters[idx]]
        return frozenset(zip(idx.tolist(), buckets.tolist()))

    def __eq__(self, other) -> bool:
        return isinstance(other, CoverageMap) and np.array_equal(
            self.counters, other.counters
        )


class CoverageAccumulator:
    """Global (edge, bucket) set seen so far; grows monotonically.

    Internally one byte per edge holds a bitmask of observed buckets.
    """

    __slots__ = ("seen",)

    def __init__(self):
        self.seen = np.zeros(MAP_SIZE, dtype=np.uint8)

    def observe(self, cov: CoverageMap) -> bool:
        """True iff cov holds an unseen (edge, bucket); updates only then."""
        idx = cov.nonzero()
        if idx.size == 0:
            return False
        bits = np.left_shift(
            np.uint8(1), _BUCKET_LUT[cov.counters[idx]] - 1, dtype=np.uint8
        )
        novel = (bits & ~self.seen[idx]) != 0
        if not novel.any():
            return False
        self.seen[idx] |= bits
        return True

    def would_be_new(self, cov: CoverageMap) -> bool:
        """Pure check without updating."""
        idx = cov.nonzero()
        if idx.size == 0:
            return False
        bits = np.left_shift(
            np.uint8(1), _BUCKET_LUT[cov.counters[idx]] - 1, dtype=np.uint8
        )
        return bool(((bits & ~self.seen[idx]) != 0).any())

    def edges_covered(self) -> int:
        return int(np.count_nonzero(self.seen))

    def signature(self) -> frozenset[tuple[int, int]]:
        idx = np.nonzero(self.seen)[0]
        pairs = []
        for i in idx.tolist():
            mask = int(self.seen[i])
            for b in range(8):
                if mask & (1 << b):
                    pairs.append((i, b + 1))
        return frozenset(pairs)
