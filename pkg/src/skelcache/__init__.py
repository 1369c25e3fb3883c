"""Training-free test-time adaptation for zero-shot skeleton action classifiers.

The engine turns each streamed sample's feature tensor into a fixed set
of global/spatial/temporal descriptors, keeps the most confident ones in
an entropy-gated per-class cache, retrieves cosine-affinity class logits
per descriptor, fuses them under class-specific LLM-derived weights and
adds the result onto the frozen model's zero-shot logits.
"""

from .cache import DEFAULT_CAPACITY, CacheEntry, SkeletonCache, UpdateOutcome, new_cache
from .descriptors import PartitionScheme, default_scheme, extract_descriptors, load_scheme, save_scheme
from .fusion import DEFAULT_ALPHA, FusionConfig, Prediction, enhance, entropy, fuse, softmax
from .harness import (
    RunConfig,
    RunReport,
    bench_latency,
    emit_reports,
    gzsl_metrics,
    harmonic_mean,
    run_stream,
    sweep,
)
from .priors import (
    EndpointConfig,
    PriorMatrix,
    RawPrior,
    assemble_weights,
    build_prompt,
    fetch_priors,
    load_priors,
    parse_response,
    save_priors,
)
from .retrieval import DEFAULT_BETA, AffinityConfig, affinity, retrieve
from .tensorio import (
    FeatureTensor,
    SampleRecord,
    StreamContainer,
    SyntheticConfig,
    generate_synthetic,
    read_container,
    write_container,
)

__version__ = "0.1.0"

__all__ = [
    "AffinityConfig",
    "CacheEntry",
    "DEFAULT_ALPHA",
    "DEFAULT_BETA",
    "DEFAULT_CAPACITY",
    "EndpointConfig",
    "FeatureTensor",
    "FusionConfig",
    "PartitionScheme",
    "Prediction",
    "PriorMatrix",
    "RawPrior",
    "RunConfig",
    "RunReport",
    "SampleRecord",
    "SkeletonCache",
    "StreamContainer",
    "SyntheticConfig",
    "UpdateOutcome",
    "affinity",
    "assemble_weights",
    "bench_latency",
    "build_prompt",
    "default_scheme",
    "emit_reports",
    "enhance",
    "entropy",
    "extract_descriptors",
    "fetch_priors",
    "fuse",
    "generate_synthetic",
    "gzsl_metrics",
    "harmonic_mean",
    "load_priors",
    "load_scheme",
    "new_cache",
    "parse_response",
    "read_container",
    "retrieve",
    "run_stream",
    "save_priors",
    "save_scheme",
    "softmax",
    "sweep",
    "write_container",
]
