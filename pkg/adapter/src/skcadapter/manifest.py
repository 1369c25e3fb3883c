"""Input manifest for backbone dumps and the loaders behind it.

Backbone codebases dump per-sample feature tensors and zero-shot logits
as NumPy archives; labels, class names and the seen/unseen split arrive
as sidecar files.  The manifest points at all of them and `load` turns
the lot into aligned in-memory arrays, refusing anything inconsistent.

Accepted shapes:
  features  .npy stacked (S, N, T, V) or (S, N, T, V, M); .npz with one
            array per sample (keys sorted), each (N, T, V) or (N, T, V, M).
            A trailing person axis M is averaged away.
  logits    .npy stacked (S, C); .npz per sample, each (C,).
  labels    .npy integer vector (S,); or text, one integer per line.
  classes   text, one name per line; or a JSON array of names.
  split     optional text file listing the *seen* classes, one name or
            index per line; samples of those classes get seen_flag=1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ManifestError(ValueError):
    """Missing, malformed or mutually inconsistent manifest inputs."""


@dataclass
class ExportManifest:
    features_path: str | Path
    logits_path: str | Path
    labels_path: str | Path
    classes_path: str | Path
    split_path: str | Path | None = None


def _load_archive(path, what):
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"{what} archive not found: {path}")
    loaded = np.load(path, allow_pickle=False)
    if isinstance(loaded, np.ndarray):
        return [loaded[i] for i in range(loaded.shape[0])] if loaded.ndim > 1 else _fail_rank(what, loaded)
    with loaded:  # NpzFile
        keys = sorted(loaded.files)
        if not keys:
            raise ManifestError(f"{what} archive {path} is empty")
        return [loaded[k] for k in keys]


def _fail_rank(what, arr):
    raise ManifestError(f"{what} archive must be stacked per sample, got shape {arr.shape}")


def _average_persons(sample, index):
    if sample.ndim == 4:  # (N, T, V, M)
        if sample.shape[3] < 1:
            raise ManifestError(f"feature sample {index} has an empty person axis")
        return sample.astype(np.float64).mean(axis=3)
    if sample.ndim == 3:
        return sample
    raise ManifestError(
        f"feature sample {index} must be (N, T, V) or (N, T, V, M), got shape {sample.shape}")


def _load_labels(path):
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"labels file not found: {path}")
    if path.suffix == ".npy":
        arr = np.load(path, allow_pickle=False)
        if arr.ndim != 1 or arr.dtype.kind not in "iu":
            raise ManifestError(f"labels array must be a 1-d integer vector, got {arr.shape} {arr.dtype}")
        return [int(x) for x in arr]
    try:
        return [int(line.strip()) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    except ValueError as exc:
        raise ManifestError(f"labels file {path} has a non-integer line: {exc}") from exc


def _load_classes(path):
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"class-names file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        names = json.loads(text)
        if not isinstance(names, list) or not all(isinstance(x, str) for x in names):
            raise ManifestError("class-names JSON must be an array of strings")
    else:
        names = [line.strip() for line in text.splitlines() if line.strip()]
    if not names:
        raise ManifestError(f"class-names file {path} is empty")
    if len(set(names)) != len(names):
        raise ManifestError("class names must be unique")
    return names


def _load_seen_classes(path, class_names):
    if path is None:
        return set()
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"split file not found: {path}")
    seen = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        token = line.strip()
        if not token:
            continue
        if token.isdigit():
            idx = int(token)
            if idx >= len(class_names):
                raise ManifestError(f"split lists class index {idx}, only {len(class_names)} classes")
        else:
            if token not in class_names:
                raise ManifestError(f"split lists unknown class {token!r}")
            idx = class_names.index(token)
        seen.add(idx)
    return seen


def load(manifest: ExportManifest):
    """Load and cross-check everything; returns (features, logits, labels,
    seen_flags, class_names) with features person-averaged, ready to cast."""
    features = [_average_persons(s, i) for i, s in enumerate(_load_archive(manifest.features_path, "features"))]
    logits = _load_archive(manifest.logits_path, "logits")
    labels = _load_labels(manifest.labels_path)
    class_names = _load_classes(manifest.classes_path)
    seen_classes = _load_seen_classes(manifest.split_path, class_names)

    counts = {"features": len(features), "logits": len(logits), "labels": len(labels)}
    if len(set(counts.values())) != 1:
        raise ManifestError(f"sample counts disagree across inputs: {counts}")

    c = len(class_names)
    dims = features[0].shape
    if len(dims) != 3 or min(dims) < 1:
        raise ManifestError(f"feature sample 0 must be 3-d with positive dims, got {dims}")
    for i, (feat, logit) in enumerate(zip(features, logits)):
        if feat.shape != dims:
            raise ManifestError(f"feature sample {i} shape {feat.shape} != {dims} (dims must be homogeneous)")
        if logit.shape != (c,):
            raise ManifestError(f"logits sample {i} has length {logit.shape}, expected ({c},)")
        if not 0 <= labels[i] < c:
            raise ManifestError(f"label {labels[i]} at sample {i} out of range [0, {c})")
        if not np.isfinite(feat).all() or not np.isfinite(np.asarray(logit, dtype=np.float64)).all():
            raise ManifestError(f"sample {i} contains NaN/Inf")
    seen_flags = [labels[i] in seen_classes for i in range(len(labels))]
    return features, logits, labels, seen_flags, class_names
