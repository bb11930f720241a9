import json
import time

import numpy as np
import pytest

from labelforge import (
    CacheError,
    CacheMismatchError,
    DEFAULT_TEMPLATE,
    LabelAssignment,
    LogitMatrix,
    build_logit_matrix,
    cache_path,
    load_cache,
    objective,
    sample_labeling,
    save_cache,
)

from conftest import make_world


def build_100x50(sigma=0.6):
    ds, provider, vocab = make_world(n=600, vocab_size=50, planted=(3, 17, 40), sigma=sigma)
    sample = sample_labeling(ds, 100, seed=5)
    return ds, provider, vocab, sample, build_logit_matrix(provider, sample, DEFAULT_TEMPLATE, vocab)


class TestBuildLogitMatrix:
    def test_shape_and_determinism(self):
        ds, provider, vocab, sample, m1 = build_100x50()
        m2 = build_logit_matrix(provider, sample, DEFAULT_TEMPLATE, vocab)
        assert m1.values.shape == (100, 50)
        assert np.isfinite(m1.values).all()
        # synthetic max_concurrency is 4, so this also covers the threaded
        # path writing rows into preassigned slots
        assert m1.values.tobytes() == m2.values.tobytes()
        assert m1.sentence_index == m2.sentence_index

    def test_singleton_objective_is_zero(self):
        ds, provider, vocab = make_world()
        sample = sample_labeling(ds, 1, seed=5)
        m = build_logit_matrix(provider, sample, DEFAULT_TEMPLATE, vocab)
        single = LogitMatrix(
            values=m.values[:1, :1],
            sentence_index=m.sentence_index[:1],
            vocab_fingerprint=m.vocab_fingerprint,
            template_fingerprint=m.template_fingerprint,
        )
        a = LabelAssignment((0,), single.vocab_fingerprint)
        assert objective(single, [1], a) == 0.0

    def test_nested_k_gives_row_prefixes(self):
        ds, provider, vocab = make_world(n=600, vocab_size=50, planted=(3, 17, 40), sigma=0.6)
        small = build_logit_matrix(
            provider, sample_labeling(ds, 10, seed=5), DEFAULT_TEMPLATE, vocab
        )
        large = build_logit_matrix(
            provider, sample_labeling(ds, 100, seed=5), DEFAULT_TEMPLATE, vocab
        )
        assert small.values.tobytes() == large.values[:10].tobytes()
        assert small.sentence_index == large.sentence_index[:10]

    def test_fingerprints_recorded(self):
        _, _, vocab, _, m = build_100x50()
        assert m.vocab_fingerprint == vocab.provider_fingerprint
        assert m.template_fingerprint == DEFAULT_TEMPLATE.fingerprint

    def test_empty_inputs_rejected(self):
        ds, provider, vocab = make_world()
        with pytest.raises(ValueError, match="non-empty"):
            build_logit_matrix(provider, [], DEFAULT_TEMPLATE, vocab)


class TestCachePersistence:
    def test_round_trip_bit_exact(self, tmp_path):
        _, _, vocab, _, m = build_100x50()
        path = tmp_path / "cache.bin"
        save_cache(m, path)
        loaded = load_cache(path, vocab=vocab, template=DEFAULT_TEMPLATE)
        assert loaded.values.tobytes() == m.values.tobytes()
        assert loaded.sentence_index == m.sentence_index
        assert loaded.vocab_fingerprint == m.vocab_fingerprint
        assert loaded.template_fingerprint == m.template_fingerprint

    def test_vocab_fingerprint_mismatch_refused(self, tmp_path):
        _, _, vocab, _, m = build_100x50()
        path = tmp_path / "cache.bin"
        save_cache(m, path)
        header, raw = path.read_bytes().split(b"\n", 1)
        obj = json.loads(header)
        obj["vocab_fingerprint"] = "0" * 64
        path.write_bytes(json.dumps(obj).encode() + b"\n" + raw)
        with pytest.raises(CacheMismatchError, match="vocabulary"):
            load_cache(path, vocab=vocab)

    def test_template_fingerprint_mismatch_refused(self, tmp_path):
        from labelforge import PromptTemplate

        _, _, vocab, _, m = build_100x50()
        path = tmp_path / "cache.bin"
        save_cache(m, path)
        other = PromptTemplate(demo_pattern="Input: {text}\nLabel: {label}",
                               query_pattern="Input: {text}\nLabel:")
        with pytest.raises(CacheMismatchError, match="template"):
            load_cache(path, template=other)

    def test_corrupt_values_refused(self, tmp_path):
        _, _, _, _, m = build_100x50()
        path = tmp_path / "cache.bin"
        save_cache(m, path)
        blob = bytearray(path.read_bytes())
        blob[-1] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(CacheError, match="checksum"):
            load_cache(path)

    def test_version_mismatch_refused(self, tmp_path):
        _, _, _, _, m = build_100x50()
        path = tmp_path / "cache.bin"
        save_cache(m, path)
        header, raw = path.read_bytes().split(b"\n", 1)
        obj = json.loads(header)
        obj["version"] = 99
        path.write_bytes(json.dumps(obj).encode() + b"\n" + raw)
        with pytest.raises(CacheError, match="version"):
            load_cache(path)

    def test_round_trip_is_fast(self, tmp_path):
        _, _, vocab, _, m = build_100x50()
        path = tmp_path / "cache.bin"
        start = time.perf_counter()
        save_cache(m, path)
        load_cache(path, vocab=vocab)
        assert time.perf_counter() - start < 1.0

    def test_cache_path_convention(self, tmp_path):
        p = cache_path(tmp_path, "a" * 64, "b" * 64, 40)
        assert p.name == f"{'a' * 12}-{'b' * 12}-K40.bin"
