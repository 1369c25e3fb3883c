"""Sample data model, the SKC1 binary stream container, and synthetic streams.

A stream is an ordered sequence of records, each holding a per-sample
feature tensor of shape (channels, frames, joints), the zero-shot logits
of a frozen backbone, and the ground-truth label (used only by the
evaluation harness, never by the cache).  One container carries one
class vocabulary and one homogeneous feature geometry.

SKC1 wire format (all integers little-endian):

    header:        magic b"SKC1", u32 version=1, u32 class_count,
                   u32 sample_count, u32 channels, u32 frames, u32 joints
    class names:   class_count x (u16 byte-length, UTF-8 bytes)
    records:       sample_count x (u32 true_label, u8 seen_flag,
                   class_count x f32 logits, channels*frames*joints x f32
                   features in row-major channel/frame/joint order)

Any deviation from the layout above is a parse error.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"SKC1"
VERSION = 1

# magic, version, C, sample_count, channels, frames, joints -> 28 bytes
_HEADER = struct.Struct("<4sIIIIII")
_NAME_LEN = struct.Struct("<H")
_REC_HEAD = struct.Struct("<IB")

HEADER_BYTES = _HEADER.size


class ContainerError(ValueError):
    """Container contents violate an invariant (on write or after read)."""


class BadMagicError(ContainerError):
    """File does not start with the SKC1 magic / unsupported version."""


class TruncatedError(ContainerError):
    """File ends in the middle of a declared structure."""


class PayloadError(ContainerError):
    """Stored values are invalid (non-finite floats, label overflow, ...)."""


@dataclass
class FeatureTensor:
    """Per-sample latent tensor, shape (channels, frames, joints), float32.

    Stored 32-bit; downstream pooling accumulates in 64-bit.  All values
    must be finite and every dimension >= 1.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise ContainerError(f"feature tensor must be 3-d (channels, frames, joints), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ContainerError(f"feature tensor dims must all be >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise PayloadError("feature tensor contains NaN/Inf")
        self.data = arr

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def frames(self) -> int:
        return self.data.shape[1]

    @property
    def joints(self) -> int:
        return self.data.shape[2]

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]


@dataclass
class SampleRecord:
    """One streamed test sample: features + zero-shot logits + ground truth."""

    features: FeatureTensor
    zero_shot_logits: np.ndarray  # (class_count,) float32
    true_label: int
    seen_flag: bool = False

    def __post_init__(self):
        self.zero_shot_logits = np.asarray(self.zero_shot_logits, dtype=np.float32).reshape(-1)
        self.true_label = int(self.true_label)
        self.seen_flag = bool(self.seen_flag)


@dataclass
class StreamContainer:
    """An ordered stream of samples sharing one vocabulary and geometry."""

    class_names: list[str]
    dims: tuple[int, int, int]  # (channels, frames, joints), fixed per container
    records: list[SampleRecord] = field(default_factory=list)

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @property
    def sample_count(self) -> int:
        return len(self.records)

    def validate(self) -> None:
        if self.class_count < 1:
            raise ContainerError("container needs at least one class")
        if len(set(self.class_names)) != self.class_count:
            raise ContainerError("class names must be unique")
        if any(not isinstance(n, str) or n == "" for n in self.class_names):
            raise ContainerError("class names must be non-empty strings")
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ContainerError(f"container dims must be three positive ints, got {self.dims}")
        self.dims = dims
        for i, rec in enumerate(self.records):
            if rec.features.dims != dims:
                raise ContainerError(
                    f"record {i}: feature dims {rec.features.dims} != container dims {dims}"
                )
            if rec.zero_shot_logits.shape != (self.class_count,):
                raise ContainerError(
                    f"record {i}: logits length {rec.zero_shot_logits.shape[0]} != class count {self.class_count}"
                )
            if not np.isfinite(rec.zero_shot_logits).all():
                raise PayloadError(f"record {i}: logits contain NaN/Inf")
            if not 0 <= rec.true_label < self.class_count:
                raise ContainerError(f"record {i}: true_label {rec.true_label} out of range [0, {self.class_count})")


def write_container(path, container: StreamContainer) -> None:
    """Write *container* to *path* in SKC1 format (byte-deterministic)."""
    container.validate()
    n, t, v = container.dims
    buf = bytearray()
    buf += _HEADER.pack(MAGIC, VERSION, container.class_count, container.sample_count, n, t, v)
    for name in container.class_names:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ContainerError(f"class name too long for u16 length prefix: {name[:32]}...")
        buf += _NAME_LEN.pack(len(raw))
        buf += raw
    for rec in container.records:
        buf += _REC_HEAD.pack(rec.true_label, 1 if rec.seen_flag else 0)
        buf += np.ascontiguousarray(rec.zero_shot_logits, dtype="<f4").tobytes()
        buf += np.ascontiguousarray(rec.features.data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(buf))


class _Cursor:
    """Byte cursor that raises TruncatedError with context on underrun."""

    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0
        self.context = "header"

    def take(self, count: int) -> bytes:
        end = self.pos + count
        if end > len(self.blob):
            raise TruncatedError(
                f"file truncated while reading {self.context} "
                f"(needed {count} bytes at offset {self.pos}, have {len(self.blob) - self.pos})"
            )
        out = self.blob[self.pos:end]
        self.pos = end
        return out


def read_container(path) -> StreamContainer:
    """Parse an SKC1 file, validating every invariant; returns the container."""
    with open(path, "rb") as fh:
        blob = fh.read()
    cur = _Cursor(blob)

    magic, version, c, sample_count, n, t, v = _HEADER.unpack(cur.take(_HEADER.size))
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise BadMagicError(f"unsupported container version {version}")
    if c < 1:
        raise ContainerError("container declares zero classes")
    if min(n, t, v) < 1:
        raise ContainerError(f"container dims must all be >= 1, got ({n}, {t}, {v})")

    names = []
    for i in range(c):
        cur.context = f"class name {i}"
        (length,) = _NAME_LEN.unpack(cur.take(_NAME_LEN.size))
        try:
            names.append(cur.take(length).decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise PayloadError(f"class name {i} is not valid UTF-8") from exc
    if len(set(names)) != c:
        raise ContainerError("class names must be unique")

    logit_bytes = c * 4
    feat_bytes = n * t * v * 4
    records = []
    for i in range(sample_count):
        cur.context = f"record {i}"
        true_label, seen = _REC_HEAD.unpack(cur.take(_REC_HEAD.size))
        if true_label >= c:
            raise PayloadError(f"record {i}: true_label {true_label} >= class count {c}")
        if seen not in (0, 1):
            raise PayloadError(f"record {i}: seen_flag byte must be 0 or 1, got {seen}")
        logits = np.frombuffer(cur.take(logit_bytes), dtype="<f4").copy()
        if not np.isfinite(logits).all():
            raise PayloadError(f"record {i}: logits contain NaN/Inf")
        feats = np.frombuffer(cur.take(feat_bytes), dtype="<f4").copy().reshape(n, t, v)
        if not np.isfinite(feats).all():
            raise PayloadError(f"record {i}: features contain NaN/Inf")
        records.append(SampleRecord(FeatureTensor(feats), logits, int(true_label), bool(seen)))

    if cur.pos != len(blob):
        raise ContainerError(f"{len(blob) - cur.pos} trailing bytes after last record")

    out = StreamContainer(class_names=names, dims=(n, t, v), records=records)
    out.validate()
    return out


@dataclass
class SyntheticConfig:
    """Seeded generator settings for self-contained test streams.

    Per class a prototype tensor is drawn elementwise from
    N(0, sigma_proto^2); each sample adds N(0, sigma_noise^2) noise.
    Zero-shot logits are the negative per-element RMS distance to every
    class prototype plus N(0, sigma_logit^2) noise, so baseline accuracy
    is tunable through sigma_logit alone.  The whole stream is a pure
    function of this config.
    """

    class_count: int
    channels: int
    frames: int
    joints: int
    sigma_proto: float = 1.0
    sigma_noise: float = 0.1
    sigma_logit: float = 0.0
    seed: int = 0
    samples_per_class: int = 10
    seen_classes: tuple[int, ...] = ()  # optional GZSL bookkeeping: these classes get seen_flag=True

    def validate(self) -> None:
        if min(self.class_count, self.channels, self.frames, self.joints) < 1:
            raise ValueError("class_count and all dims must be >= 1")
        if self.samples_per_class < 0:
            raise ValueError("samples_per_class must be >= 0")
        if min(self.sigma_proto, self.sigma_noise, self.sigma_logit) < 0:
            raise ValueError("sigma values must be >= 0")
        if any(not 0 <= s < self.class_count for s in self.seen_classes):
            raise ValueError("seen_classes entries must be valid class indices")


def generate_synthetic(config: SyntheticConfig) -> StreamContainer:
    """Generate a deterministic synthetic stream from *config*."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    c = config.class_count
    shape = (config.channels, config.frames, config.joints)
    scale = math.sqrt(config.channels * config.frames * config.joints)
    seen = set(config.seen_classes)

    protos = rng.normal(0.0, config.sigma_proto, size=(c,) + shape)
    flat_protos = protos.reshape(c, -1)

    records = []
    for label in range(c):
        for _ in range(config.samples_per_class):
            feats = protos[label] + rng.normal(0.0, config.sigma_noise, size=shape)
            feats32 = feats.astype(np.float32)
            # logits from the stored 32-bit features, so readers can reproduce them
            dists = np.linalg.norm(flat_protos - feats32.reshape(-1).astype(np.float64), axis=1) / scale
            logits = -dists + rng.normal(0.0, config.sigma_logit, size=c)
            records.append(
                SampleRecord(FeatureTensor(feats32), logits.astype(np.float32), label, label in seen)
            )

    order = rng.permutation(len(records))
    names = [f"class_{i:02d}" for i in range(c)]
    out = StreamContainer(class_names=names, dims=shape, records=[records[i] for i in order])
    out.validate()
    return out
