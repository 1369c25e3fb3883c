"""Entropy-gated cache updates, eviction, and memory accounting."""

import math

import numpy as np

from skelcache import CacheEntry, new_cache

rng = np.random.default_rng(3)
cache = new_cache(class_count=4, capacity=3, num_spatial=4, num_temporal=3, channels=16)


def push(cls, entropy):
    outcome = cache.update(CacheEntry(
        rng.normal(size=cache.key_shape).astype(np.float32), cls, entropy))
    evicted = f" (evicted entropy {outcome.evicted_entropy:.3f})" if outcome.evicted_entropy else ""
    print(f"  update(class={cls}, entropy={entropy:.3f}) -> {outcome.kind}{evicted}")


print("filling class 0 (capacity 3):")
for h in (0.9, 0.4, 0.7):
    push(0, h)

print("block 0 entropies:", [round(e.entropy, 3) for e in cache.blocks[0]])

print("\nfull block: only strictly more confident entries displace the worst")
push(0, 0.5)   # beats 0.9 -> replaces it
push(0, 0.7)   # ties the current max 0.7 -> rejected
push(0, 1.2)   # worse than everything -> rejected
print("block 0 entropies:", [round(e.entropy, 3) for e in cache.blocks[0]])
print("max entropy only ever moves down once the block is full")

print("\nmemory accounting (key storage only):")
print(f"  entries={cache.total_entries()}  key_bytes={cache.key_bytes()}")
full = new_cache(5, 8, 4, 3, 512)
for cls in range(5):
    for i in range(8):
        full.update(CacheEntry(np.ones(full.key_shape, dtype=np.float32), cls, i / 10))
print(f"  full blocks at channels=512, K=8: {full.key_bytes()} bytes total "
      f"= {full.key_bytes() / 5 / 1024:.1f} KB per class")

# a flood of random updates never overflows any block
flood = new_cache(5, 4, 1, 1, 8)
for _ in range(20000):
    flood.update(CacheEntry(
        rng.normal(size=flood.key_shape).astype(np.float32),
        int(rng.integers(5)),
        float(rng.uniform(0, math.log(5)))))
print("\nafter 20k random updates block sizes:", [len(b) for b in flood.blocks])
