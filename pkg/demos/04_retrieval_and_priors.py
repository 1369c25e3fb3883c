"""Affinity retrieval plus LLM-prior-weighted fusion on a toy cache.

Builds a small cache from two visually-close classes, shows the
descriptor-wise logits a query retrieves, and how class-specific weights
change the fused score compared to uniform averaging.
"""

import numpy as np

from skelcache import (
    AffinityConfig,
    CacheEntry,
    FusionConfig,
    RawPrior,
    assemble_weights,
    build_prompt,
    enhance,
    fuse,
    new_cache,
    parse_response,
    retrieve,
)

rng = np.random.default_rng(11)

print("=== the per-class prompt sent to the LLM ===")
print(build_prompt("waving"))

print("=== a canned response and its weight vector ===")
response = '{"spatial": [0.05, 0.10, 0.70, 0.15], "temporal": [0.15, 0.60, 0.25], "gamma": 0.30}'
raw = parse_response(response)
weights = assemble_weights(raw)
labels = ["global", "head", "torso", "arms", "feet", "begin", "middle", "end"]
for name, w in zip(labels, weights):
    print(f"  {name:6s} {w:.5f}")
print(f"  sum = {weights.sum():.9f}; global share = gamma/(2-gamma) = {raw.gamma / (2 - raw.gamma):.5f}")

# Two classes whose descriptors agree everywhere except the "arms" row.
cache = new_cache(class_count=2, capacity=4, num_spatial=4, num_temporal=3, channels=12)
shared = rng.normal(size=(8, 12))
arms_a = rng.normal(size=12)
arms_b = rng.normal(size=12)
for cls, arms in ((0, arms_a), (1, arms_b)):
    for _ in range(4):
        key = shared + 0.05 * rng.normal(size=(8, 12))
        key[3] = arms + 0.05 * rng.normal(size=12)
        cache.update(CacheEntry(key.astype(np.float32), cls, 0.2))

query = shared + 0.05 * rng.normal(size=(8, 12))
query[3] = arms_a + 0.05 * rng.normal(size=12)  # truly class 0

logits_matrix = retrieve(query, cache, AffinityConfig(beta=3.0))
print("\n=== descriptor-wise retrieved logits (rows x classes) ===")
for name, row in zip(labels, logits_matrix):
    print(f"  {name:6s} class0={row[0]:.3f}  class1={row[1]:.3f}")

uniform = np.full(8, 1 / 8)
print("\nfused under uniform weights:     ", np.round(fuse(logits_matrix, uniform), 4))
print("fused under arms-heavy LLM prior:", np.round(fuse(logits_matrix, weights), 4))

# The prior sharpens the margin; enhancement adds it onto weak logits.
ambiguous_logits = np.array([0.1, 0.2])  # the frozen model slightly prefers the wrong class
for name, w in (("uniform", uniform), ("llm", weights)):
    pred = enhance(ambiguous_logits, fuse(logits_matrix, w), FusionConfig(alpha_s=5.0))
    print(f"enhanced with {name:7s} weights -> predicted class {pred.predicted_class} "
          f"(p={pred.probabilities[pred.predicted_class]:.3f}, entropy={pred.entropy:.3f})")
