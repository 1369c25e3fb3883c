"""Partition schemes and descriptor pooling.

Shows the default Kinect-25 scheme, how temporal fractions resolve for
awkward sequence lengths, and the descriptor matrix for a toy tensor.
"""

import numpy as np

from skelcache import FeatureTensor, default_scheme, extract_descriptors

scheme = default_scheme()
print("default scheme rows:", scheme.labels)
print("spatial groups:")
for name, joints in scheme.spatial_groups.items():
    print(f"  {name:6s} -> joints {joints}")

print("\ntemporal segments resolved per sequence length (0-based, half-open):")
for frames in (9, 10, 11, 60):
    print(f"  T={frames:3d}: {scheme.resolve_segments(frames)}")

# Pool a random tensor: eight rows, one per descriptor, channels wide.
rng = np.random.default_rng(0)
tensor = FeatureTensor(rng.normal(size=(16, 30, 25)).astype(np.float32))
matrix = extract_descriptors(tensor, scheme)
print(f"\ndescriptor matrix shape: {matrix.shape} (rows x channels)")
print("row means:", np.round(matrix.mean(axis=1), 4))

# Pooling is a mean, so scaling the tensor scales every descriptor.
double = extract_descriptors(FeatureTensor(2.0 * tensor.data), scheme)
print("linearity check max |2*d - d(2x)|:", float(np.max(np.abs(2 * matrix - double))))

# The row count never depends on T: that is what makes retrieval cost
# independent of sequence duration.
for frames in (6, 600):
    t = FeatureTensor(rng.normal(size=(16, frames, 25)).astype(np.float32))
    print(f"T={frames}: descriptor matrix {extract_descriptors(t, scheme).shape}")
