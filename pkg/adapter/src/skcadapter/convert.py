"""Manifest -> SKC1 conversion (floats cast to 32-bit on the way out)."""

from __future__ import annotations

import numpy as np

from . import skc1
from .manifest import ExportManifest, load


def convert(manifest: ExportManifest, out_path) -> skc1.Skc1Stream:
    """Write the manifest's samples as an SKC1 container at *out_path*.

    Features are person-averaged by the manifest loader; everything is
    cast to float32 exactly once here, so the file payload is the 32-bit
    image of the dump.
    """
    features, logits, labels, seen_flags, class_names = load(manifest)
    n, t, v = features[0].shape
    stream = skc1.Skc1Stream(
        class_names=class_names,
        channels=n,
        frames=t,
        joints=v,
        labels=labels,
        seen_flags=seen_flags,
        logits=[np.asarray(x, dtype=np.float32) for x in logits],
        features=[np.asarray(x, dtype=np.float32) for x in features],
    )
    skc1.write(out_path, stream)
    return stream
