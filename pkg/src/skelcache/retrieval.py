"""Descriptor-wise affinity and logit retrieval from the cache.

For each descriptor row d and class j the retrieved logit is the sum of
exp(-beta * (1 - cos(query_d, key_d))) over the entries of block j.
This grouped per-block summation is the sparse evaluation of the
affinity-row-times-one-hot-label-matrix product; the dense construction
lives only in the test oracle.  Uneven block sizes are handled by simply
summing whatever each block holds; empty blocks contribute zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cache import SkeletonCache

DEFAULT_BETA = 3.0


@dataclass
class AffinityConfig:
    """Similarity sharpness; larger beta decays non-identical pairs faster."""

    beta: float = DEFAULT_BETA

    def __post_init__(self):
        self.beta = float(self.beta)
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")


def cosine(q: np.ndarray, k: np.ndarray) -> float:
    """Cosine similarity with the zero-vector guard cos := 0."""
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    k = np.asarray(k, dtype=np.float64).reshape(-1)
    if q.shape != k.shape:
        raise ValueError(f"vector lengths differ: {q.shape[0]} vs {k.shape[0]}")
    denom = np.linalg.norm(q) * np.linalg.norm(k)
    if denom == 0.0:
        return 0.0
    return float(np.clip(np.dot(q, k) / denom, -1.0, 1.0))


def affinity(q: np.ndarray, k: np.ndarray, beta: float = DEFAULT_BETA) -> float:
    """exp(-beta * (1 - cos(q, k))); always in (0, 1] for finite inputs."""
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    return float(np.exp(-beta * (1.0 - cosine(q, k))))


def retrieve(query: np.ndarray, cache: SkeletonCache, cfg: AffinityConfig | None = None) -> np.ndarray:
    """Descriptor-wise class logits for *query* against *cache*.

    Returns a (descriptor_count, class_count) float64 matrix whose (d, j)
    entry sums the affinities between query row d and the d-th key row of
    every entry in block j.  Entries are in [0, |block j|].
    """
    cfg = cfg or AffinityConfig()
    q = np.asarray(query, dtype=np.float64)
    if q.shape != cache.key_shape:
        raise ValueError(f"query shape {q.shape} != cache key shape {cache.key_shape}")
    q_norm = np.linalg.norm(q, axis=1)  # (D,)

    out = np.zeros((cache.descriptor_count, cache.class_count), dtype=np.float64)
    for j, block in enumerate(cache.blocks):
        if not block:
            continue
        keys = np.stack([e.key for e in block]).astype(np.float64)  # (m, D, N)
        k_norm = np.linalg.norm(keys, axis=2)  # (m, D)
        dots = np.einsum("mdn,dn->md", keys, q)
        denom = k_norm * q_norm[None, :]
        cos = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
        np.clip(cos, -1.0, 1.0, out=cos)
        out[:, j] = np.exp(-cfg.beta * (1.0 - cos)).sum(axis=0)
    return out
