"""Streaming evaluation: the five-phase adaptation loop, metrics and reports.

One pass over a container, batch size 1, in container order:

    1. pool the sample's feature tensor into its descriptor matrix
    2. baseline prediction + entropy from the stored zero-shot logits
    3. cache update (by default before retrieval, so a sample may match
       its own fresh key; ``retrieve_before_update`` flips the order and
       ``gate_on_adapted`` gates the update on the adapted posterior
       instead of the zero-shot one, which forces retrieval first)
    4. descriptor-wise retrieval from the cache
    5. prior-weighted fusion and logit enhancement

The prior row used in phase 5 belongs to the sample's zero-shot predicted
class (``prior_select="predicted"``); ``prior_select="per_class_max"``
instead scores every class under its own row (diagonal selection).

Baseline metrics depend only on the container; everything the run writes
to metrics.json is a pure function of the config, so identical configs
reproduce byte-identical files.  Wall-clock numbers go to timing.json.
"""

from __future__ import annotations

import csv
import dataclasses
import gc
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import descriptors, fusion, priors, retrieval, tensorio
from .cache import DEFAULT_CAPACITY, CacheEntry, SkeletonCache

SWEEP_PARAMETERS = ("k", "alpha_s", "beta")
PRIOR_SELECT_MODES = ("predicted", "per_class_max")


@dataclass
class RunConfig:
    """Everything a streaming run depends on; CLI flags mirror these names.

    ``container`` may be a path or an in-memory stream; only the latency
    bench, which generates its own streams, leaves it as None.
    """

    container: str | Path | tensorio.StreamContainer | None = None
    priors: str | Path | None = None
    weight_mode: str = "llm"
    k: int = DEFAULT_CAPACITY
    beta: float = retrieval.DEFAULT_BETA
    alpha_s: float = fusion.DEFAULT_ALPHA
    retrieve_before_update: bool = False
    gate_on_adapted: bool = False
    gzsl: bool = False
    out_dir: str | Path | None = None
    seed: int = 0
    prior_select: str = "predicted"
    scheme: str | Path | None = None

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.alpha_s < 0:
            raise ValueError(f"alpha_s must be >= 0, got {self.alpha_s}")
        if self.weight_mode not in fusion.WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {fusion.WEIGHT_MODES}, got {self.weight_mode!r}")
        if self.prior_select not in PRIOR_SELECT_MODES:
            raise ValueError(f"prior_select must be one of {PRIOR_SELECT_MODES}, got {self.prior_select!r}")
        if self.weight_mode == "llm" and self.priors is None:
            raise ValueError("weight_mode 'llm' needs a prior-matrix path (or choose uniform/random)")

    def describe(self) -> dict:
        """JSON-able echo of the config (container objects by content id)."""
        d = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tensorio.StreamContainer):
                value = f"<in-memory stream: {value.sample_count} samples, {value.class_count} classes>"
            elif isinstance(value, Path):
                value = str(value)
            d[f.name] = value
        return d


@dataclass
class GzslSummary:
    seen_accuracy: float
    unseen_accuracy: float
    harmonic_mean: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RunReport:
    """Everything a run measured; emit_reports serialises it to files."""

    config: dict
    class_names: list[str]
    sample_count: int
    top1_baseline: float
    top1_adapted: float
    gzsl_baseline: GzslSummary | None
    gzsl_adapted: GzslSummary | None
    confusion_baseline: np.ndarray  # (C, C) int, rows = true class
    confusion_adapted: np.ndarray
    per_class_counts: np.ndarray
    per_class_baseline: np.ndarray
    per_class_adapted: np.ndarray
    top5_records: list[dict] = field(default_factory=list)
    memory_trace: list[int] = field(default_factory=list)
    timings_s: dict = field(default_factory=dict)

    @property
    def per_class_delta(self) -> np.ndarray:
        return self.per_class_adapted - self.per_class_baseline


def harmonic_mean(seen_accuracy: float, unseen_accuracy: float) -> float:
    """2SU/(S+U); defined as 0 when both accuracies are 0."""
    total = seen_accuracy + unseen_accuracy
    if total == 0:
        return 0.0
    return 2.0 * seen_accuracy * unseen_accuracy / total


def gzsl_metrics(correct_seen: int, total_seen: int, correct_unseen: int, total_unseen: int):
    """Per-group accuracies and their harmonic mean: returns (S, U, H)."""
    if total_seen <= 0 or total_unseen <= 0:
        raise ValueError("gzsl metrics need at least one seen and one unseen sample")
    s = correct_seen / total_seen
    u = correct_unseen / total_unseen
    return s, u, harmonic_mean(s, u)


def _load_container(cfg: RunConfig) -> tensorio.StreamContainer:
    if cfg.container is None:
        raise ValueError("run config has no container (path or in-memory stream)")
    if isinstance(cfg.container, tensorio.StreamContainer):
        cfg.container.validate()
        return cfg.container
    return tensorio.read_container(cfg.container)


def _weight_matrix(cfg: RunConfig, class_names: list[str], descriptor_count: int) -> np.ndarray:
    if cfg.weight_mode == "uniform":
        return np.tile(priors.uniform_row(descriptor_count), (len(class_names), 1))
    if cfg.weight_mode == "random":
        return priors.random_weight_matrix(len(class_names), descriptor_count, cfg.seed)
    matrix = priors.load_priors(cfg.priors)
    if matrix.class_count != len(class_names):
        raise ValueError(
            f"prior matrix has {matrix.class_count} classes, container has {len(class_names)}"
        )
    if matrix.class_names != list(class_names):
        raise ValueError("prior matrix class names do not match the container's")
    if matrix.descriptor_count != descriptor_count:
        raise ValueError(
            f"prior matrix is {matrix.descriptor_count} descriptors wide, scheme needs {descriptor_count}"
        )
    return matrix.weights


def _fused_scores(weight_matrix: np.ndarray, descriptor_logits: np.ndarray,
                  predicted_class: int, prior_select: str) -> np.ndarray:
    if prior_select == "predicted":
        return fusion.fuse(descriptor_logits, weight_matrix[predicted_class])
    # per_class_max: score class j under its own weight row
    return np.einsum("jd,dj->j", weight_matrix, descriptor_logits)


def run_stream(cfg: RunConfig) -> RunReport:
    """Stream the container through the adaptation loop and collect metrics."""
    cfg.validate()
    container = _load_container(cfg)
    scheme = descriptors.load_scheme(cfg.scheme) if cfg.scheme else descriptors.default_scheme()
    class_count = container.class_count
    weights = _weight_matrix(cfg, container.class_names, scheme.descriptor_count)

    cache = SkeletonCache(class_count, cfg.k, scheme.num_spatial, scheme.num_temporal, container.dims[0])
    affinity_cfg = retrieval.AffinityConfig(cfg.beta)
    fusion_cfg = fusion.FusionConfig(cfg.alpha_s, cfg.weight_mode, cfg.seed)

    confusion_baseline = np.zeros((class_count, class_count), dtype=np.int64)
    confusion_adapted = np.zeros((class_count, class_count), dtype=np.int64)
    seen_counts = np.zeros(2, dtype=np.int64)  # [unseen, seen] totals
    seen_correct_baseline = np.zeros(2, dtype=np.int64)
    seen_correct_adapted = np.zeros(2, dtype=np.int64)
    top5_records: list[dict] = []
    memory_trace: list[int] = []
    timers = {"extract": 0.0, "predict": 0.0, "update": 0.0, "retrieve": 0.0, "fuse": 0.0}
    top_k = min(5, class_count)

    def timed(phase, fn, *args):
        t0 = time.perf_counter()
        out = fn(*args)
        timers[phase] += time.perf_counter() - t0
        return out

    for index, rec in enumerate(container.records):
        query = timed("extract", descriptors.extract_descriptors, rec.features, scheme)

        t0 = time.perf_counter()
        base_logits = rec.zero_shot_logits.astype(np.float64)
        base_rho = fusion.softmax(base_logits)
        base_pred = int(np.argmax(base_rho))
        base_entropy = fusion.entropy(base_rho)
        timers["predict"] += time.perf_counter() - t0

        def do_retrieve_fuse():
            logits_matrix = timed("retrieve", retrieval.retrieve, query, cache, affinity_cfg)
            t1 = time.perf_counter()
            scores = _fused_scores(weights, logits_matrix, base_pred, cfg.prior_select)
            out = fusion.enhance(base_logits, scores, fusion_cfg)
            timers["fuse"] += time.perf_counter() - t1
            return out

        if cfg.gate_on_adapted:
            # adapted gating needs the adapted posterior, so retrieval comes first
            prediction = do_retrieve_fuse()
            timed("update", cache.update,
                  CacheEntry(query, prediction.predicted_class, prediction.entropy))
        elif cfg.retrieve_before_update:
            prediction = do_retrieve_fuse()
            timed("update", cache.update, CacheEntry(query, base_pred, base_entropy))
        else:
            timed("update", cache.update, CacheEntry(query, base_pred, base_entropy))
            prediction = do_retrieve_fuse()

        true = rec.true_label
        confusion_baseline[true, base_pred] += 1
        confusion_adapted[true, prediction.predicted_class] += 1
        group = 1 if rec.seen_flag else 0
        seen_counts[group] += 1
        seen_correct_baseline[group] += base_pred == true
        seen_correct_adapted[group] += prediction.predicted_class == true
        memory_trace.append(cache.key_bytes())

        base_top = np.argsort(-base_logits, kind="stable")[:top_k]
        adapted_top = np.argsort(-prediction.adapted_logits, kind="stable")[:top_k]
        top5_records.append({
            "index": index,
            "true_label": int(true),
            "baseline_top5": [[int(j), float(base_logits[j])] for j in base_top],
            "adapted_top5": [[int(j), float(prediction.adapted_logits[j])] for j in adapted_top],
        })

    total = container.sample_count
    gzsl_baseline = gzsl_adapted = None
    if cfg.gzsl:
        if seen_counts[1] == 0 or seen_counts[0] == 0:
            raise ValueError("gzsl run needs both seen and unseen samples in the container")
        gzsl_baseline = GzslSummary(*gzsl_metrics(
            int(seen_correct_baseline[1]), int(seen_counts[1]),
            int(seen_correct_baseline[0]), int(seen_counts[0])))
        gzsl_adapted = GzslSummary(*gzsl_metrics(
            int(seen_correct_adapted[1]), int(seen_counts[1]),
            int(seen_correct_adapted[0]), int(seen_counts[0])))

    per_class_counts = confusion_baseline.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class_baseline = np.where(per_class_counts > 0, np.diag(confusion_baseline) / per_class_counts, 0.0)
        per_class_adapted = np.where(per_class_counts > 0, np.diag(confusion_adapted) / per_class_counts, 0.0)

    return RunReport(
        config=cfg.describe(),
        class_names=list(container.class_names),
        sample_count=total,
        top1_baseline=float(seen_correct_baseline.sum() / total) if total else 0.0,
        top1_adapted=float(seen_correct_adapted.sum() / total) if total else 0.0,
        gzsl_baseline=gzsl_baseline,
        gzsl_adapted=gzsl_adapted,
        confusion_baseline=confusion_baseline,
        confusion_adapted=confusion_adapted,
        per_class_counts=per_class_counts,
        per_class_baseline=per_class_baseline,
        per_class_adapted=per_class_adapted,
        top5_records=top5_records,
        memory_trace=memory_trace,
        timings_s=timers,
    )


def emit_reports(report: RunReport, out_dir) -> None:
    """Write the report bundle; metrics.json is byte-deterministic per config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    metrics = {
        "config": report.config,
        "class_count": len(report.class_names),
        "class_names": report.class_names,
        "sample_count": report.sample_count,
        "top1_baseline": report.top1_baseline,
        "top1_adapted": report.top1_adapted,
        "gzsl_baseline": report.gzsl_baseline.as_dict() if report.gzsl_baseline else None,
        "gzsl_adapted": report.gzsl_adapted.as_dict() if report.gzsl_adapted else None,
        "cache_memory_bytes_final": report.memory_trace[-1] if report.memory_trace else 0,
        "cache_memory_bytes_peak": max(report.memory_trace, default=0),
        "cache_memory_trace": report.memory_trace,
    }
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    for name, matrix in (("confusion_baseline.csv", report.confusion_baseline),
                         ("confusion_adapted.csv", report.confusion_adapted)):
        with open(out / name, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["true_class"] + report.class_names)
            for label, row in zip(report.class_names, matrix):
                writer.writerow([label] + [int(x) for x in row])

    with open(out / "per_class_delta.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "samples", "top1_baseline", "top1_adapted", "delta"])
        for j, label in enumerate(report.class_names):
            writer.writerow([
                label,
                int(report.per_class_counts[j]),
                f"{report.per_class_baseline[j]:.6f}",
                f"{report.per_class_adapted[j]:.6f}",
                f"{report.per_class_delta[j]:.6f}",
            ])

    with open(out / "top5_changes.jsonl", "w", encoding="utf-8") as fh:
        for record in report.top5_records:
            fh.write(json.dumps(record, sort_keys=True))
            fh.write("\n")

    (out / "timing.json").write_text(
        json.dumps({"phase_seconds": report.timings_s, "sample_count": report.sample_count},
                   indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def save_report(report: RunReport, path) -> None:
    """Full report state as JSON so export-report can re-emit the bundle."""
    doc = {
        "config": report.config,
        "class_names": report.class_names,
        "sample_count": report.sample_count,
        "top1_baseline": report.top1_baseline,
        "top1_adapted": report.top1_adapted,
        "gzsl_baseline": report.gzsl_baseline.as_dict() if report.gzsl_baseline else None,
        "gzsl_adapted": report.gzsl_adapted.as_dict() if report.gzsl_adapted else None,
        "confusion_baseline": report.confusion_baseline.tolist(),
        "confusion_adapted": report.confusion_adapted.tolist(),
        "top5_records": report.top5_records,
        "memory_trace": report.memory_trace,
        "timings_s": report.timings_s,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_report(path) -> RunReport:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    confusion_baseline = np.asarray(doc["confusion_baseline"], dtype=np.int64)
    confusion_adapted = np.asarray(doc["confusion_adapted"], dtype=np.int64)
    counts = confusion_baseline.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_base = np.where(counts > 0, np.diag(confusion_baseline) / counts, 0.0)
        per_adapt = np.where(counts > 0, np.diag(confusion_adapted) / counts, 0.0)
    return RunReport(
        config=doc["config"],
        class_names=doc["class_names"],
        sample_count=doc["sample_count"],
        top1_baseline=doc["top1_baseline"],
        top1_adapted=doc["top1_adapted"],
        gzsl_baseline=GzslSummary(**doc["gzsl_baseline"]) if doc["gzsl_baseline"] else None,
        gzsl_adapted=GzslSummary(**doc["gzsl_adapted"]) if doc["gzsl_adapted"] else None,
        confusion_baseline=confusion_baseline,
        confusion_adapted=confusion_adapted,
        per_class_counts=counts,
        per_class_baseline=per_base,
        per_class_adapted=per_adapt,
        top5_records=doc["top5_records"],
        memory_trace=doc["memory_trace"],
        timings_s=doc["timings_s"],
    )


def sweep(cfg: RunConfig, parameter: str, values) -> list[dict]:
    """Re-run the stream once per value with a fresh cache; returns table rows."""
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMETERS}, got {parameter!r}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    caster = int if parameter == "k" else float
    rows = []
    for value in values:
        run_cfg = dataclasses.replace(cfg, **{parameter: caster(value)})
        t0 = time.perf_counter()
        report = run_stream(run_cfg)
        rows.append({
            "value": caster(value),
            "top1_adapted": report.top1_adapted,
            "runtime_s": time.perf_counter() - t0,
        })
    return rows


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "top1_adapted", "runtime_s"])
        for row in rows:
            writer.writerow([row["value"], f"{row['top1_adapted']:.6f}", f"{row['runtime_s']:.6f}"])


def bench_latency(cfg: RunConfig, t_values, samples_per_t: int = 500,
                  class_count: int = 10, channels: int = 64, joints: int = 25,
                  warm: bool = True, repeats: int = 3) -> list[dict]:
    """Mean per-sample retrieval+fusion seconds at each sequence length.

    Per sequence length a synthetic stream is generated and pooled into
    descriptors up front (descriptor extraction is excluded from the
    measurement), then retrieval+fusion runs over the pooled queries as
    one contiguous timed loop.  That isolates the part of the pipeline
    whose cost is structurally independent of frame count: the timed
    work touches only (descriptors x channels) matrices.  The cache is
    pre-filled to capacity per class ("warm") unless *warm* is false;
    baseline logits are cheap seeded noise since their content does not
    affect the timed path.  The loop runs *repeats* times with garbage
    collection paused and the fastest repetition is reported, which
    suppresses one-sided scheduler/allocator noise.
    """
    t_values = [int(t) for t in t_values]
    if not t_values:
        raise ValueError("bench needs at least one sequence length")
    if samples_per_t < 1:
        raise ValueError("samples_per_t must be >= 1")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    scheme = descriptors.load_scheme(cfg.scheme) if cfg.scheme else descriptors.default_scheme()
    weights = np.tile(priors.uniform_row(scheme.descriptor_count), (class_count, 1))
    affinity_cfg = retrieval.AffinityConfig(cfg.beta)
    fusion_cfg = fusion.FusionConfig(cfg.alpha_s, "uniform", cfg.seed)

    # stage 1: per T, build a warm cache and pool the stream up front;
    # tensors are generated one at a time so memory stays at a single
    # (channels, frames, joints) block, and prototypes are dropped once
    # the descriptors exist
    contexts = []
    for frames in t_values:
        rng = np.random.default_rng(cfg.seed)
        shape = (channels, frames, joints)
        protos = rng.normal(0.0, 1.0, size=(class_count,) + shape)
        cache = SkeletonCache(class_count, cfg.k, scheme.num_spatial, scheme.num_temporal, channels)
        if warm:
            for label in range(class_count):
                for _ in range(cfg.k):
                    feats = tensorio.FeatureTensor(
                        (protos[label] + rng.normal(0.0, 0.1, size=shape)).astype(np.float32))
                    key = descriptors.extract_descriptors(feats, scheme)
                    rho = fusion.softmax(rng.normal(0.0, 1.0, size=class_count))
                    cache.update(CacheEntry(key, label, fusion.entropy(rho)))
        queries, labels, logits = [], [], []
        for _ in range(samples_per_t):
            label = int(rng.integers(class_count))
            feats = tensorio.FeatureTensor(
                (protos[label] + rng.normal(0.0, 0.1, size=shape)).astype(np.float32))
            queries.append(descriptors.extract_descriptors(feats, scheme))
            labels.append(label)
            logits.append(rng.normal(0.0, 1.0, size=class_count))
        del protos
        contexts.append({"frames": frames, "cache": cache, "queries": queries,
                         "labels": labels, "logits": logits, "best": math.inf})

    # stage 2: timed loops, interleaved across T values so every length
    # samples the same noise environment; fastest repetition wins
    def timed_pass(ctx):
        cache = ctx["cache"]
        t0 = time.perf_counter()
        for query, label, base_logits in zip(ctx["queries"], ctx["labels"], ctx["logits"]):
            logits_matrix = retrieval.retrieve(query, cache, affinity_cfg)
            scores = fusion.fuse(logits_matrix, weights[label])
            fusion.enhance(base_logits, scores, fusion_cfg)
        return time.perf_counter() - t0

    gc_was_enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        for ctx in contexts:  # untimed warm-up of the timed code path
            timed_pass(ctx)
        for _ in range(repeats):
            for ctx in contexts:
                ctx["best"] = min(ctx["best"], timed_pass(ctx))
    finally:
        if gc_was_enabled:
            gc.enable()

    return [
        {"frames": ctx["frames"], "mean_retrieve_fuse_s": ctx["best"] / samples_per_t,
         "samples": samples_per_t}
        for ctx in contexts
    ]


def write_bench_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frames", "mean_retrieve_fuse_s", "samples"])
        for row in rows:
            writer.writerow([row["frames"], f"{row['mean_retrieve_fuse_s']:.9f}", row["samples"]])


def load_default_benchmark() -> dict:
    """The committed synthetic benchmark settings used by acceptance runs."""
    text = resources.files("skelcache.benchmarks").joinpath("default_synthetic.json").read_text("utf-8")
    return json.loads(text)


def benchmark_config(seed: int, overrides: dict | None = None) -> tuple[tensorio.SyntheticConfig, RunConfig]:
    """Materialise (synthetic config, run config) for one benchmark seed."""
    spec = dict(load_default_benchmark())
    if overrides:
        spec.update(overrides)
    synth = tensorio.SyntheticConfig(
        class_count=spec["class_count"],
        channels=spec["channels"],
        frames=spec["frames"],
        joints=spec["joints"],
        sigma_proto=spec["sigma_proto"],
        sigma_noise=spec["sigma_noise"],
        sigma_logit=spec["sigma_logit"],
        seed=seed,
        samples_per_class=spec["samples_per_class"],
    )
    run = RunConfig(
        container=tensorio.generate_synthetic(synth),
        weight_mode="uniform",
        k=spec["k"],
        beta=spec["beta"],
        alpha_s=spec["alpha_s"],
        seed=seed,
    )
    return synth, run
