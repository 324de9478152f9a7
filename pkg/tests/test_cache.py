from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor

import pytest

from dqe.backends.oracle import oracle_backend, template_verbalize
from dqe.cache import CacheStore, CachingBackend, make_cache_key
from dqe.data_model import linearize
from dqe.errors import ConsistencyError, NotSupported, StoreCorrupt
from dqe.scoring import score_example
from tests.conftest import RecordingBackend, make_triple_examples


@pytest.fixture()
def store(tmp_path) -> CacheStore:
    return CacheStore(tmp_path / "cache")


def _key(i: int = 0, signature: str = "sig-a") -> object:
    return make_cache_key(signature, "qa", {"question": f"q{i}", "context": "c", "modality": "text"})


def test_fresh_store_is_empty(store):
    stats = store.stats()
    assert (stats.entries, stats.hits, stats.misses) == (0, 0, 0)


def test_put_get_round_trip(store):
    key = _key()
    store.put(key, b"payload")
    entry = store.get(key)
    assert entry is not None and entry.value == b"payload"
    assert entry.key == key


def test_get_unknown_is_miss(store):
    assert store.get(_key(1)) is None
    assert store.stats().misses == 1


def test_counters_after_put_hit_miss(store):
    store.put(_key(0), b"v")
    assert store.get(_key(0)) is not None
    assert store.get(_key(1)) is None
    stats = store.stats()
    assert (stats.entries, stats.hits, stats.misses) == (1, 1, 1)


def test_identical_reput_is_idempotent(store):
    key = _key()
    store.put(key, b"v")
    store.put(key, b"v")
    assert store.stats().entries == 1


def test_conflicting_reput_raises(store):
    key = _key()
    store.put(key, b"v1")
    with pytest.raises(ConsistencyError):
        store.put(key, b"v2")


def test_corrupt_entry_detected(store, tmp_path):
    key = _key()
    store.put(key, b"correct-value")
    entry_path = tmp_path / "cache" / key.namespace / key.digest
    entry_path.write_bytes(b"x")
    fresh = CacheStore(tmp_path / "cache")
    with pytest.raises(StoreCorrupt):
        fresh.get(key)


def test_signature_isolation(store):
    key_a = _key(0, "sig-a")
    key_b = _key(0, "sig-b")
    assert key_a.namespace != key_b.namespace
    assert key_a.digest != key_b.digest
    store.put(key_a, b"v")
    assert store.get(key_b) is None


def test_purge_removes_namespace(store):
    store.put(_key(0, "sig-a"), b"v")
    store.put(_key(1, "sig-a"), b"w")
    store.put(_key(0, "sig-b"), b"z")
    removed = store.purge(signature="sig-a")
    assert removed == 2
    assert store.stats().entries == 1


def test_concurrent_duplicate_puts_succeed(store):
    key = _key()

    def put() -> None:
        store.put(key, b"same-bytes")

    with ThreadPoolExecutor(max_workers=8) as pool:
        list(pool.map(lambda _: put(), range(32)))
    assert store.stats().entries == 1
    assert store.get(key).value == b"same-bytes"


def test_caching_backend_transparency(tmp_path):
    examples = make_triple_examples(random.Random(11), 8, max_triples=4)
    raw = oracle_backend(examples)
    cached = CachingBackend(raw, CacheStore(tmp_path / "cache"))
    for example in examples:
        hypothesis = template_verbalize(example.input)
        direct = score_example(example.input, hypothesis, raw)
        via_cache = score_example(example.input, hypothesis, cached)
        re_read = score_example(example.input, hypothesis, cached)
        assert direct == via_cache == re_read


def test_second_pass_issues_zero_backend_calls(tmp_path):
    examples = make_triple_examples(random.Random(12), 5, max_triples=3)
    store_dir = tmp_path / "cache"

    recorder1 = RecordingBackend(oracle_backend(examples))
    cached1 = CachingBackend(recorder1, CacheStore(store_dir))
    scores1 = [
        score_example(ex.input, template_verbalize(ex.input), cached1) for ex in examples
    ]
    assert recorder1.total_calls > 0

    recorder2 = RecordingBackend(oracle_backend(examples))
    cached2 = CachingBackend(recorder2, CacheStore(store_dir))
    scores2 = [
        score_example(ex.input, template_verbalize(ex.input), cached2) for ex in examples
    ]
    assert recorder2.total_calls == 0
    assert scores1 == scores2


def test_caching_backend_caches_qg_and_qa_separately(tmp_path, demo_dataset, demo_example):
    store = CacheStore(tmp_path / "cache")
    recorder = RecordingBackend(oracle_backend(demo_dataset))
    cached = CachingBackend(recorder, store)
    context = linearize(demo_example.input).text
    cached.generate_qa_pairs(context, "data", 4)
    cached.generate_qa_pairs(context, "data", 4)
    assert recorder.calls["qg"] == 1
    cached.answer("What is the discoverer of 101 helena?", context, "data")
    cached.answer("What is the discoverer of 101 helena?", context, "data")
    assert recorder.calls["qa"] == 1
    # different budget means a different request, hence a fresh call
    cached.generate_qa_pairs(context, "data", 2)
    assert recorder.calls["qg"] == 2


def test_caching_backend_propagates_not_supported(tmp_path, demo_dataset):
    cached = CachingBackend(oracle_backend(demo_dataset), CacheStore(tmp_path / "cache"))
    with pytest.raises(NotSupported):
        cached.embed(["x"])


def test_cached_embed_round_trip(tmp_path):
    from tests.test_scoring import HashEmbedBackend

    store = CacheStore(tmp_path / "cache")
    recorder = RecordingBackend(HashEmbedBackend())
    cached = CachingBackend(recorder, store)
    first = cached.embed(["a", "b"])
    second = cached.embed(["a", "b"])
    assert first == second
    assert recorder.calls["embed"] == 1
