"""Independent SKC1 validation: re-parse, dims, class histogram, NaN scan."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import skc1


@dataclass
class ValidationReport:
    path: str
    class_count: int
    sample_count: int
    channels: int
    frames: int
    joints: int
    class_histogram: dict[str, int] = field(default_factory=dict)
    seen_samples: int = 0
    nan_records: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.nan_records

    def lines(self) -> list[str]:
        out = [
            f"{'OK' if self.ok else 'FAIL'}: {self.path}",
            f"  classes: {self.class_count}, samples: {self.sample_count}",
            f"  feature dims (channels, frames, joints): "
            f"({self.channels}, {self.frames}, {self.joints})",
            f"  seen-flagged samples: {self.seen_samples}",
            "  class histogram:",
        ]
        for name, count in self.class_histogram.items():
            out.append(f"    {name}: {count}")
        if self.nan_records:
            out.append(f"  NaN/Inf found in record(s): {self.nan_records}")
        else:
            out.append("  NaN scan: clean")
        return out


def validate(path) -> ValidationReport:
    """Parse *path* with the adapter's own SKC1 reader and summarise it.

    The reader already rejects structural violations (magic, truncation,
    label overflow, dim mismatch, non-finite payloads) by raising
    Skc1Error; the extra NaN scan here double-checks the decoded arrays
    so the report stays meaningful if the reader's inline checks change.
    """
    stream = skc1.read(path)
    histogram = Counter(stream.class_names[label] for label in stream.labels)
    nan_records = [
        i for i in range(stream.sample_count)
        if not (np.isfinite(stream.features[i]).all() and np.isfinite(stream.logits[i]).all())
    ]
    return ValidationReport(
        path=str(path),
        class_count=stream.class_count,
        sample_count=stream.sample_count,
        channels=stream.channels,
        frames=stream.frames,
        joints=stream.joints,
        class_histogram={name: histogram.get(name, 0) for name in stream.class_names},
        seen_samples=sum(stream.seen_flags),
        nan_records=nan_records,
    )
