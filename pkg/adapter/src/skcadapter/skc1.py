"""Standalone SKC1 reader/writer for the adapter.

This is deliberately a second, independent implementation of the SKC1
layout (the evaluation engine has its own): the adapter talks to the
engine only through files, and `validate` re-deriving the format from
the layout description below is what makes it a meaningful check.

Layout, all little-endian:

    magic b"SKC1" | u32 version=1 | u32 class_count | u32 sample_count
    u32 channels | u32 frames | u32 joints
    class_count x (u16 name_bytes, utf-8 name)
    sample_count x (u32 true_label, u8 seen_flag,
                    class_count f32 logits, channels*frames*joints f32 features)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"SKC1"
VERSION = 1


class Skc1Error(ValueError):
    """Any deviation from the SKC1 layout or its value constraints."""


@dataclass
class Skc1Stream:
    class_names: list[str]
    channels: int
    frames: int
    joints: int
    labels: list[int] = field(default_factory=list)
    seen_flags: list[bool] = field(default_factory=list)
    logits: list[np.ndarray] = field(default_factory=list)     # each (C,) float32
    features: list[np.ndarray] = field(default_factory=list)   # each (N, T, V) float32

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @property
    def sample_count(self) -> int:
        return len(self.labels)


def write(path, stream: Skc1Stream) -> None:
    c = stream.class_count
    if c < 1:
        raise Skc1Error("need at least one class")
    if len(set(stream.class_names)) != c:
        raise Skc1Error("class names must be unique")
    if min(stream.channels, stream.frames, stream.joints) < 1:
        raise Skc1Error("all feature dims must be >= 1")
    out = bytearray()
    out += struct.pack("<4sIIIIII", MAGIC, VERSION, c, stream.sample_count,
                       stream.channels, stream.frames, stream.joints)
    for name in stream.class_names:
        raw = name.encode("utf-8")
        if not raw or len(raw) > 0xFFFF:
            raise Skc1Error(f"class name length out of range: {name!r}")
        out += struct.pack("<H", len(raw)) + raw
    shape = (stream.channels, stream.frames, stream.joints)
    for i in range(stream.sample_count):
        label = int(stream.labels[i])
        if not 0 <= label < c:
            raise Skc1Error(f"sample {i}: label {label} out of range")
        logit = np.ascontiguousarray(stream.logits[i], dtype="<f4")
        feat = np.ascontiguousarray(stream.features[i], dtype="<f4")
        if logit.shape != (c,):
            raise Skc1Error(f"sample {i}: logits shape {logit.shape} != ({c},)")
        if feat.shape != shape:
            raise Skc1Error(f"sample {i}: feature shape {feat.shape} != {shape}")
        if not np.isfinite(logit).all() or not np.isfinite(feat).all():
            raise Skc1Error(f"sample {i}: non-finite values")
        out += struct.pack("<IB", label, 1 if stream.seen_flags[i] else 0)
        out += logit.tobytes()
        out += feat.tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(out))


def read(path) -> Skc1Stream:
    with open(path, "rb") as fh:
        blob = fh.read()

    def need(count, what):
        if offset + count > len(blob):
            raise Skc1Error(f"truncated while reading {what} at offset {offset}")

    offset = 0
    need(28, "header")
    magic, version, c, samples, n, t, v = struct.unpack_from("<4sIIIIII", blob, 0)
    offset = 28
    if magic != MAGIC:
        raise Skc1Error(f"bad magic {magic!r}")
    if version != VERSION:
        raise Skc1Error(f"unsupported version {version}")
    if c < 1:
        raise Skc1Error("zero classes declared")
    if min(n, t, v) < 1:
        raise Skc1Error(f"dim mismatch: non-positive dims ({n}, {t}, {v})")

    names = []
    for i in range(c):
        need(2, f"name {i} length")
        (length,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        need(length, f"name {i}")
        try:
            names.append(blob[offset:offset + length].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise Skc1Error(f"class name {i} not utf-8") from exc
        offset += length
    if len(set(names)) != c:
        raise Skc1Error("duplicate class names")

    stream = Skc1Stream(names, n, t, v)
    feat_count = n * t * v
    for i in range(samples):
        need(5, f"record {i} head")
        label, seen = struct.unpack_from("<IB", blob, offset)
        offset += 5
        if label >= c:
            raise Skc1Error(f"record {i}: label {label} overflows class count {c}")
        if seen not in (0, 1):
            raise Skc1Error(f"record {i}: seen flag {seen} not boolean")
        need(4 * c, f"record {i} logits")
        logits = np.frombuffer(blob, dtype="<f4", count=c, offset=offset).copy()
        offset += 4 * c
        need(4 * feat_count, f"record {i} features")
        feats = np.frombuffer(blob, dtype="<f4", count=feat_count, offset=offset).copy()
        offset += 4 * feat_count
        if not np.isfinite(logits).all():
            raise Skc1Error(f"record {i}: NaN/Inf in logits")
        if not np.isfinite(feats).all():
            raise Skc1Error(f"record {i}: NaN/Inf in features")
        stream.labels.append(int(label))
        stream.seen_flags.append(bool(seen))
        stream.logits.append(logits)
        stream.features.append(feats.reshape(n, t, v))
    if offset != len(blob):
        raise Skc1Error(f"{len(blob) - offset} trailing bytes")
    return stream
