"""Non-parametric class-blocked memory with entropy-gated replacement.

Entries are (descriptor key, predicted class, prediction entropy) tuples
grouped into per-class blocks of capacity K.  A block under capacity
appends; a full block replaces its least confident (highest entropy)
entry only when the incoming entry is strictly more confident, otherwise
the update is rejected and the cache is left untouched.  Placement always
uses the predicted class: ground truth never reaches the cache.

SKCC snapshot format (little-endian): magic b"SKCC", u32 version=1,
u32 class_count, u32 capacity, u32 num_spatial, u32 num_temporal,
u32 channels, then per class block a u32 entry count followed by entries
of (u32 value_class, f32 entropy, descriptor_count*channels x f32 key).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

SNAPSHOT_MAGIC = b"SKCC"
SNAPSHOT_VERSION = 1
_SNAP_HEADER = struct.Struct("<4sIIIIII")
_SNAP_COUNT = struct.Struct("<I")
_SNAP_ENTRY_HEAD = struct.Struct("<If")

# per-class prototype budget used throughout unless overridden
DEFAULT_CAPACITY = 8

# slack for entropy-vs-ln(C) checks on float32-derived values
_ENTROPY_EPS = 1e-5


class CacheError(ValueError):
    """Geometry mismatch or invalid cache parameter/entry."""


class SnapshotError(ValueError):
    """Snapshot file is malformed or inconsistent with its own header."""


@dataclass
class CacheEntry:
    """One cached tuple: descriptor key, predicted class, prediction entropy.

    Both key and entropy are held at 32-bit precision, matching the SKCC
    snapshot layout, so serialisation is lossless.
    """

    key: np.ndarray  # (descriptor_count, channels) float32
    value_class: int
    entropy: float

    def __post_init__(self):
        key = np.asarray(self.key, dtype=np.float32)
        if key.ndim != 2:
            raise CacheError(f"cache key must be 2-d (descriptors, channels), got shape {key.shape}")
        if not np.isfinite(key).all():
            raise CacheError("cache key contains NaN/Inf")
        self.key = key
        self.value_class = int(self.value_class)
        self.entropy = float(np.float32(self.entropy))
        if not math.isfinite(self.entropy) or self.entropy < 0:
            raise CacheError(f"entropy must be finite and >= 0, got {self.entropy}")


@dataclass(frozen=True)
class UpdateOutcome:
    """Result of one cache update: 'inserted', 'replaced' or 'rejected'."""

    kind: str
    evicted_entropy: float | None = None

    @property
    def mutated(self) -> bool:
        return self.kind != "rejected"


class SkeletonCache:
    """Class-blocked descriptor memory (single writer, shared readers)."""

    def __init__(self, class_count: int, capacity: int, num_spatial: int, num_temporal: int, channels: int):
        for name, value in (
            ("class_count", class_count),
            ("capacity", capacity),
            ("num_spatial", num_spatial),
            ("num_temporal", num_temporal),
            ("channels", channels),
        ):
            if int(value) < 1:
                raise CacheError(f"{name} must be >= 1, got {value}")
        self.class_count = int(class_count)
        self.capacity = int(capacity)
        self.num_spatial = int(num_spatial)
        self.num_temporal = int(num_temporal)
        self.channels = int(channels)
        self.blocks: list[list[CacheEntry]] = [[] for _ in range(self.class_count)]
        # insertion sequence numbers, parallel to blocks; oldest = smallest
        self._seq: list[list[int]] = [[] for _ in range(self.class_count)]
        self._counter = 0

    @property
    def descriptor_count(self) -> int:
        return self.num_spatial + self.num_temporal + 1

    @property
    def key_shape(self) -> tuple[int, int]:
        return (self.descriptor_count, self.channels)

    def total_entries(self) -> int:
        return sum(len(b) for b in self.blocks)

    def _check_entry(self, entry: CacheEntry) -> None:
        if not 0 <= entry.value_class < self.class_count:
            raise CacheError(f"value_class {entry.value_class} out of range [0, {self.class_count})")
        if entry.key.shape != self.key_shape:
            raise CacheError(f"key shape {entry.key.shape} != cache key shape {self.key_shape}")
        if entry.entropy > math.log(self.class_count) + _ENTROPY_EPS:
            raise CacheError(
                f"entropy {entry.entropy} exceeds ln(class_count) = {math.log(self.class_count):.6f}"
            )

    def update(self, entry: CacheEntry) -> UpdateOutcome:
        """Apply the append / replace-worst / reject rule for *entry*.

        Replacement requires the new entropy to be strictly lower than the
        block's maximum; ties reject.  Among several entries sharing the
        maximum entropy, the oldest one is replaced.  A rejected update
        leaves the cache bit-identical.
        """
        self._check_entry(entry)
        block = self.blocks[entry.value_class]
        seqs = self._seq[entry.value_class]
        if len(block) < self.capacity:
            block.append(entry)
            seqs.append(self._counter)
            self._counter += 1
            return UpdateOutcome("inserted")
        worst = max(
            range(len(block)),
            key=lambda i: (block[i].entropy, -seqs[i]),  # max entropy, oldest on ties
        )
        if entry.entropy < block[worst].entropy:
            evicted = block[worst].entropy
            block[worst] = entry
            seqs[worst] = self._counter
            self._counter += 1
            return UpdateOutcome("replaced", evicted_entropy=evicted)
        return UpdateOutcome("rejected")

    def max_entropy(self, value_class: int) -> float | None:
        block = self.blocks[value_class]
        return max(e.entropy for e in block) if block else None

    def key_bytes(self) -> int:
        """Key storage in bytes: entries x descriptor_count x channels x 4."""
        return self.total_entries() * self.descriptor_count * self.channels * 4

    def snapshot(self, path) -> None:
        """Serialize the cache state to *path* in SKCC format."""
        buf = bytearray()
        buf += _SNAP_HEADER.pack(
            SNAPSHOT_MAGIC, SNAPSHOT_VERSION, self.class_count, self.capacity,
            self.num_spatial, self.num_temporal, self.channels,
        )
        for block in self.blocks:
            buf += _SNAP_COUNT.pack(len(block))
            for entry in block:
                buf += _SNAP_ENTRY_HEAD.pack(entry.value_class, entry.entropy)
                buf += np.ascontiguousarray(entry.key, dtype="<f4").tobytes()
        with open(path, "wb") as fh:
            fh.write(bytes(buf))

    @classmethod
    def restore(cls, path) -> "SkeletonCache":
        """Rebuild a cache from an SKCC snapshot, validating the layout."""
        with open(path, "rb") as fh:
            blob = fh.read()
        if len(blob) < _SNAP_HEADER.size:
            raise SnapshotError("snapshot shorter than its header")
        magic, version, c, k, p, z, n = _SNAP_HEADER.unpack_from(blob, 0)
        if magic != SNAPSHOT_MAGIC:
            raise SnapshotError(f"bad snapshot magic {magic!r}")
        if version != SNAPSHOT_VERSION:
            raise SnapshotError(f"unsupported snapshot version {version}")
        if min(c, k, p, z, n) < 1:
            raise SnapshotError("snapshot header has a non-positive parameter")
        cache = cls(c, k, p, z, n)
        key_floats = cache.descriptor_count * n
        pos = _SNAP_HEADER.size
        for j in range(c):
            if pos + _SNAP_COUNT.size > len(blob):
                raise SnapshotError(f"snapshot truncated at block {j} count")
            (count,) = _SNAP_COUNT.unpack_from(blob, pos)
            pos += _SNAP_COUNT.size
            if count > k:
                raise SnapshotError(f"block {j} declares {count} entries, capacity is {k}")
            for i in range(count):
                need = _SNAP_ENTRY_HEAD.size + key_floats * 4
                if pos + need > len(blob):
                    raise SnapshotError(
                        f"snapshot geometry mismatch: block {j} entry {i} needs {need} bytes, "
                        f"{len(blob) - pos} remain"
                    )
                value_class, entropy = _SNAP_ENTRY_HEAD.unpack_from(blob, pos)
                pos += _SNAP_ENTRY_HEAD.size
                if value_class != j:
                    raise SnapshotError(f"block {j} holds an entry labelled {value_class}")
                key = np.frombuffer(blob, dtype="<f4", count=key_floats, offset=pos).copy()
                pos += key_floats * 4
                outcome = cache.update(CacheEntry(key.reshape(cache.key_shape), value_class, entropy))
                if outcome.kind != "inserted":
                    raise SnapshotError(f"block {j} entry {i} could not be re-inserted")
        if pos != len(blob):
            raise SnapshotError(f"{len(blob) - pos} trailing bytes after last block")
        return cache

    def state_equal(self, other: "SkeletonCache") -> bool:
        """Bit-level equality of the stored tuples (ignores insertion ages)."""
        if (self.class_count, self.capacity, self.key_shape) != (other.class_count, other.capacity, other.key_shape):
            return False
        for mine, theirs in zip(self.blocks, other.blocks):
            if len(mine) != len(theirs):
                return False
            for a, b in zip(mine, theirs):
                if a.value_class != b.value_class or a.entropy != b.entropy:
                    return False
                if a.key.tobytes() != b.key.tobytes():
                    return False
        return True


def new_cache(class_count: int, capacity: int, num_spatial: int, num_temporal: int, channels: int) -> SkeletonCache:
    """Construct an empty cache (convenience alias for the constructor)."""
    return SkeletonCache(class_count, capacity, num_spatial, num_temporal, channels)
