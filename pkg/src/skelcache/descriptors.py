"""Partition schemes and descriptor pooling.

A feature tensor (channels, frames, joints) is summarised into a fixed
descriptor matrix of (num_spatial + num_temporal + 1) rows x channels
columns: row 0 is the global mean over all frames and joints, the next
rows are per-body-part means over all frames, and the final rows are
per-phase means over all joints.  Row order is fixed:

    [global, spatial_1..spatial_P, temporal_1..temporal_Z]

The descriptor count does not depend on the number of frames, which is
what keeps downstream retrieval cost independent of sequence length.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .tensorio import FeatureTensor

# guard against 1/3-style float error when resolving fraction boundaries
_FRAC_EPS = 1e-9


class SchemeError(ValueError):
    """Invalid partition scheme, or one that cannot apply to a tensor."""


@dataclass
class PartitionScheme:
    """Named joint groups plus temporal segments expressed as fractions.

    ``spatial_groups`` maps group name -> joint index list (groups may
    overlap; each must be non-empty).  ``temporal_segments`` maps segment
    name -> (start_fraction, end_fraction); consecutive segments must
    chain exactly from 0.0 to 1.0 so that, resolved against any frame
    count, they are disjoint and jointly cover the sequence.  Dict
    insertion order defines descriptor row order.
    """

    spatial_groups: dict[str, list[int]]
    temporal_segments: dict[str, tuple[float, float]]

    def __post_init__(self):
        self.spatial_groups = {str(k): [int(j) for j in v] for k, v in self.spatial_groups.items()}
        self.temporal_segments = {str(k): (float(a), float(b)) for k, (a, b) in self.temporal_segments.items()}
        self.validate()

    def validate(self) -> None:
        if not self.spatial_groups:
            raise SchemeError("scheme needs at least one spatial group")
        if not self.temporal_segments:
            raise SchemeError("scheme needs at least one temporal segment")
        for name, joints in self.spatial_groups.items():
            if len(joints) == 0:
                raise SchemeError(f"spatial group {name!r} is empty")
            if any(j < 0 for j in joints):
                raise SchemeError(f"spatial group {name!r} has a negative joint index")
        prev_end = 0.0
        for name, (a, b) in self.temporal_segments.items():
            if abs(a - prev_end) > _FRAC_EPS:
                raise SchemeError(f"segment {name!r} starts at {a}, expected {prev_end} (segments must chain)")
            if b <= a:
                raise SchemeError(f"segment {name!r} has non-positive span [{a}, {b})")
            prev_end = b
        if abs(prev_end - 1.0) > _FRAC_EPS:
            raise SchemeError(f"segments must end at 1.0, last ends at {prev_end}")

    @property
    def num_spatial(self) -> int:
        return len(self.spatial_groups)

    @property
    def num_temporal(self) -> int:
        return len(self.temporal_segments)

    @property
    def descriptor_count(self) -> int:
        return self.num_spatial + self.num_temporal + 1

    @property
    def labels(self) -> list[str]:
        """Row labels in descriptor order."""
        return ["global"] + list(self.spatial_groups) + list(self.temporal_segments)

    def max_joint(self) -> int:
        return max(max(j) for j in self.spatial_groups.values())

    def resolve_segments(self, frames: int) -> list[tuple[int, int]]:
        """Resolve fractions against *frames*; returns 0-based half-open ranges.

        A segment (a, b] in 1-based frame terms is [floor(frames*a)+1,
        floor(frames*b)], i.e. 0-based [floor(frames*a), floor(frames*b)).
        The final segment always ends at *frames*, absorbing remainder
        frames.  Raises if any resolved segment would be empty (happens
        when frames < number of segments).
        """
        if frames < 1:
            raise SchemeError("frames must be >= 1")
        out = []
        for name, (a, b) in self.temporal_segments.items():
            lo = int(math.floor(frames * a + _FRAC_EPS))
            hi = frames if b >= 1.0 - _FRAC_EPS else int(math.floor(frames * b + _FRAC_EPS))
            if hi <= lo:
                raise SchemeError(
                    f"segment {name!r} resolves empty for {frames} frames "
                    f"(need at least {self.num_temporal} frames)"
                )
            out.append((lo, hi))
        return out

    def to_json(self) -> str:
        doc = {
            "spatial_groups": self.spatial_groups,
            "temporal_segments": {k: [a, b] for k, (a, b) in self.temporal_segments.items()},
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PartitionScheme":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemeError(f"scheme is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict) or "spatial_groups" not in doc or "temporal_segments" not in doc:
            raise SchemeError("scheme JSON needs 'spatial_groups' and 'temporal_segments' keys")
        segments = {k: tuple(v) for k, v in doc["temporal_segments"].items()}
        for name, pair in segments.items():
            if len(pair) != 2:
                raise SchemeError(f"segment {name!r} must be a [start_fraction, end_fraction] pair")
        return cls(doc["spatial_groups"], segments)  # type: ignore[arg-type]


def save_scheme(path, scheme: PartitionScheme) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(scheme.to_json())
        fh.write("\n")


def load_scheme(path) -> PartitionScheme:
    with open(path, encoding="utf-8") as fh:
        return PartitionScheme.from_json(fh.read())


def default_scheme() -> PartitionScheme:
    """Kinect-v2 25-joint scheme: four body regions, three uniform phases."""
    groups = {
        "head": [2, 3, 4, 8, 20],
        "torso": [0, 1, 4, 8, 12, 16, 20],
        "arms": [4, 5, 6, 7, 8, 9, 10, 11, 21, 22, 23, 24],
        "feet": [0, 12, 13, 14, 15, 16, 17, 18, 19],
    }
    segments = {
        "begin": (0.0, 1.0 / 3.0),
        "middle": (1.0 / 3.0, 2.0 / 3.0),
        "end": (2.0 / 3.0, 1.0),
    }
    return PartitionScheme(groups, segments)


def extract_descriptors(features: FeatureTensor, scheme: PartitionScheme) -> np.ndarray:
    """Pool *features* into the (descriptor_count, channels) float32 matrix.

    Means accumulate in 64-bit and are stored 32-bit.  Raises SchemeError
    when a group references a joint the tensor does not have, or when a
    temporal segment resolves empty.
    """
    f = features.data.astype(np.float64)
    _, frames, joints = f.shape
    if scheme.max_joint() >= joints:
        raise SchemeError(
            f"scheme references joint {scheme.max_joint()} but tensor has only {joints} joints"
        )
    rows = [f.mean(axis=(1, 2))]
    for group in scheme.spatial_groups.values():
        rows.append(f[:, :, group].mean(axis=(1, 2)))
    for lo, hi in scheme.resolve_segments(frames):
        rows.append(f[:, lo:hi, :].mean(axis=(1, 2)))
    return np.stack(rows).astype(np.float32)
