import struct

import numpy as np
import pytest

from skelcache import tensorio
from skelcache.tensorio import (
    BadMagicError,
    ContainerError,
    FeatureTensor,
    PayloadError,
    SampleRecord,
    StreamContainer,
    SyntheticConfig,
    TruncatedError,
    generate_synthetic,
    read_container,
    write_container,
)


def small_container(n_samples=3, c=4, dims=(2, 3, 5), seed=0):
    rng = np.random.default_rng(seed)
    records = [
        SampleRecord(
            FeatureTensor(rng.normal(size=dims).astype(np.float32)),
            rng.normal(size=c).astype(np.float32),
            int(rng.integers(c)),
            bool(rng.integers(2)),
        )
        for _ in range(n_samples)
    ]
    return StreamContainer([f"c{i}" for i in range(c)], dims, records)


class TestFeatureTensor:
    def test_shape_and_dtype(self):
        ft = FeatureTensor(np.ones((2, 3, 4)))
        assert ft.data.dtype == np.float32
        assert ft.dims == (2, 3, 4)

    def test_rejects_wrong_rank(self):
        with pytest.raises(ContainerError):
            FeatureTensor(np.ones((2, 3)))

    def test_rejects_nan(self):
        bad = np.ones((1, 2, 2))
        bad[0, 0, 0] = np.nan
        with pytest.raises(PayloadError):
            FeatureTensor(bad)


class TestContainerFormat:
    def test_empty_container_is_header_plus_names(self, tmp_path):
        # fixed-size header (magic + six u32 fields) then the name block
        path = tmp_path / "empty.skc1"
        write_container(path, StreamContainer(["a", "b"], (1, 1, 1)))
        blob = path.read_bytes()
        expected = tensorio.HEADER_BYTES + (2 + 1) + (2 + 1)
        assert len(blob) == expected
        assert blob[:4] == b"SKC1"
        back = read_container(path)
        assert back.sample_count == 0
        assert back.class_names == ["a", "b"]

    def test_single_minimal_record_payload_size(self, tmp_path):
        # record = u32 label + u8 flag + C f32 logits + 1 f32 feature
        c = 4
        container = StreamContainer(
            [f"c{i}" for i in range(c)],
            (1, 1, 1),
            [SampleRecord(FeatureTensor(np.ones((1, 1, 1))), np.zeros(c), 0)],
        )
        path = tmp_path / "one.skc1"
        write_container(path, container)
        name_block = sum(2 + len(f"c{i}") for i in range(c))
        record = 4 + 1 + c * 4 + 1 * 4
        assert len(path.read_bytes()) == tensorio.HEADER_BYTES + name_block + record

    def test_round_trip_identity(self, tmp_path):
        container = small_container()
        path = tmp_path / "rt.skc1"
        write_container(path, container)
        back = read_container(path)
        assert back.class_names == container.class_names
        assert back.dims == container.dims
        assert back.sample_count == container.sample_count
        for a, b in zip(container.records, back.records):
            assert a.features.data.tobytes() == b.features.data.tobytes()
            assert a.zero_shot_logits.tobytes() == b.zero_shot_logits.tobytes()
            assert a.true_label == b.true_label
            assert a.seen_flag == b.seen_flag

    def test_write_is_byte_deterministic(self, tmp_path):
        container = small_container()
        p1, p2 = tmp_path / "a.skc1", tmp_path / "b.skc1"
        write_container(p1, container)
        write_container(p2, container)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.skc1"
        write_container(path, small_container())
        blob = bytearray(path.read_bytes())
        blob[:4] = b"XXXX"
        path.write_bytes(bytes(blob))
        with pytest.raises(BadMagicError):
            read_container(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "v9.skc1"
        write_container(path, small_container())
        blob = bytearray(path.read_bytes())
        struct.pack_into("<I", blob, 4, 9)
        path.write_bytes(bytes(blob))
        with pytest.raises(BadMagicError):
            read_container(path)

    def test_truncation_names_record_index(self, tmp_path):
        container = small_container(n_samples=3)
        path = tmp_path / "trunc.skc1"
        write_container(path, container)
        blob = path.read_bytes()
        path.write_bytes(blob[:-10])  # cut into the last record
        with pytest.raises(TruncatedError, match="record 2"):
            read_container(path)

    def test_nan_payload_rejected(self, tmp_path):
        container = small_container(n_samples=1)
        path = tmp_path / "nan.skc1"
        write_container(path, container)
        blob = bytearray(path.read_bytes())
        # last 4 bytes are the final feature float
        blob[-4:] = struct.pack("<f", float("nan"))
        path.write_bytes(bytes(blob))
        with pytest.raises(PayloadError):
            read_container(path)

    def test_label_overflow_rejected(self, tmp_path):
        container = small_container(n_samples=1, c=4)
        path = tmp_path / "label.skc1"
        write_container(path, container)
        blob = bytearray(path.read_bytes())
        offset = tensorio.HEADER_BYTES + sum(2 + len(n) for n in container.class_names)
        struct.pack_into("<I", blob, offset, 99)
        path.write_bytes(bytes(blob))
        with pytest.raises(PayloadError, match="true_label"):
            read_container(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "trail.skc1"
        write_container(path, small_container())
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(ContainerError, match="trailing"):
            read_container(path)

    def test_zero_dim_header_rejected(self, tmp_path):
        path = tmp_path / "dims.skc1"
        write_container(path, StreamContainer(["a"], (1, 1, 1)))
        blob = bytearray(path.read_bytes())
        struct.pack_into("<I", blob, 16, 0)  # channels := 0
        path.write_bytes(bytes(blob))
        with pytest.raises(ContainerError):
            read_container(path)

    def test_duplicate_class_names_rejected(self):
        with pytest.raises(ContainerError, match="unique"):
            write_container("/dev/null", StreamContainer(["a", "a"], (1, 1, 1)))

    def test_mismatched_record_dims_rejected(self, tmp_path):
        container = StreamContainer(
            ["a"], (2, 2, 2),
            [SampleRecord(FeatureTensor(np.ones((1, 1, 1))), np.zeros(1), 0)],
        )
        with pytest.raises(ContainerError, match="dims"):
            write_container(tmp_path / "x.skc1", container)


class TestSynthetic:
    def test_noiseless_baseline_is_perfect(self):
        cfg = SyntheticConfig(5, 4, 6, 3, sigma_noise=0.0, sigma_logit=0.0, seed=7, samples_per_class=20)
        container = generate_synthetic(cfg)
        correct = [int(np.argmax(r.zero_shot_logits)) == r.true_label for r in container.records]
        assert np.mean(correct) == 1.0

    def test_same_seed_reproduces_bit_identical_stream(self, tmp_path):
        cfg = SyntheticConfig(3, 2, 5, 4, sigma_noise=0.3, sigma_logit=0.2, seed=11, samples_per_class=6)
        p1, p2 = tmp_path / "a.skc1", tmp_path / "b.skc1"
        write_container(p1, generate_synthetic(cfg))
        write_container(p2, generate_synthetic(cfg))
        assert p1.read_bytes() == p2.read_bytes()

    def test_different_seed_differs(self):
        base = SyntheticConfig(3, 2, 5, 4, sigma_noise=0.3, seed=1, samples_per_class=4)
        other = SyntheticConfig(3, 2, 5, 4, sigma_noise=0.3, seed=2, samples_per_class=4)
        a = generate_synthetic(base).records[0].features.data
        b = generate_synthetic(other).records[0].features.data
        assert not np.array_equal(a, b)

    def test_huge_logit_noise_gives_chance_level(self):
        # logit noise 100x the prototype scale swamps the signal; top-1
        # collapses to ~1/C measured over >= 1000 samples
        cfg = SyntheticConfig(5, 4, 6, 3, sigma_logit=100.0, seed=3, samples_per_class=250)
        container = generate_synthetic(cfg)
        acc = np.mean([int(np.argmax(r.zero_shot_logits)) == r.true_label for r in container.records])
        assert abs(acc - 0.2) < 0.05

    def test_seen_classes_flagging(self):
        cfg = SyntheticConfig(4, 2, 3, 3, seed=0, samples_per_class=5, seen_classes=(0, 2))
        container = generate_synthetic(cfg)
        for rec in container.records:
            assert rec.seen_flag == (rec.true_label in (0, 2))

    def test_round_trip_after_generation(self, tmp_path):
        cfg = SyntheticConfig(3, 2, 4, 5, sigma_noise=0.2, sigma_logit=0.1, seed=5, samples_per_class=4)
        container = generate_synthetic(cfg)
        path = tmp_path / "synth.skc1"
        write_container(path, container)
        back = read_container(path)
        for a, b in zip(container.records, back.records):
            assert a.features.data.tobytes() == b.features.data.tobytes()
            assert a.zero_shot_logits.tobytes() == b.zero_shot_logits.tobytes()

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            SyntheticConfig(0, 1, 1, 1).validate()
        with pytest.raises(ValueError):
            SyntheticConfig(2, 1, 1, 1, sigma_noise=-1.0).validate()
        with pytest.raises(ValueError):
            SyntheticConfig(2, 1, 1, 1, seen_classes=(5,)).validate()
