"""Weighted fusion of descriptor logits and zero-shot logit enhancement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_ALPHA = 5.0

WEIGHT_MODES = ("llm", "uniform", "random")


@dataclass
class FusionConfig:
    alpha_s: float = DEFAULT_ALPHA
    weight_mode: str = "llm"
    seed: int = 0  # used only by weight_mode="random"

    def __post_init__(self):
        self.alpha_s = float(self.alpha_s)
        if self.alpha_s < 0:
            raise ValueError(f"alpha_s must be >= 0, got {self.alpha_s}")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}, got {self.weight_mode!r}")


@dataclass
class Prediction:
    """Adapted logits with their posterior, argmax and entropy."""

    adapted_logits: np.ndarray
    probabilities: np.ndarray
    predicted_class: int
    entropy: float


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max subtraction)."""
    x = np.asarray(logits, dtype=np.float64)
    x = x - x.max()
    e = np.exp(x)
    return e / e.sum()


def entropy(probabilities: np.ndarray) -> float:
    """Shannon entropy in nats, with 0*ln(0) = 0."""
    p = np.asarray(probabilities, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probabilities must be a non-empty 1-d vector")
    if np.any(p < 0) or not np.isfinite(p).all():
        raise ValueError("probabilities must be finite and non-negative")
    if abs(p.sum() - 1.0) > 1e-6:
        raise ValueError(f"probabilities must sum to 1 (+-1e-6), got {p.sum()}")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def fuse(descriptor_logits: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted fusion: scores_j = sum_d weights_d * logits[d, j]."""
    o = np.asarray(descriptor_logits, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if o.ndim != 2:
        raise ValueError(f"descriptor logits must be 2-d, got shape {o.shape}")
    if w.shape != (o.shape[0],):
        raise ValueError(f"weight length {w.shape} does not match {o.shape[0]} descriptor rows")
    return w @ o


def enhance(zero_shot_logits: np.ndarray, fused_scores: np.ndarray, cfg: FusionConfig) -> Prediction:
    """Adapted prediction: logits + alpha_s * fused scores, softmaxed.

    Argmax ties break to the lowest class index.  alpha_s = 0 reduces to
    the unmodified zero-shot prediction.
    """
    base = np.asarray(zero_shot_logits, dtype=np.float64)
    s = np.asarray(fused_scores, dtype=np.float64)
    if base.shape != s.shape:
        raise ValueError(f"logit length {base.shape} != fused score length {s.shape}")
    adapted = base + cfg.alpha_s * s
    rho = softmax(adapted)
    return Prediction(
        adapted_logits=adapted,
        probabilities=rho,
        predicted_class=int(np.argmax(rho)),
        entropy=entropy(rho),
    )
