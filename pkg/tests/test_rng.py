import numpy as np
import pytest
from scipy import stats

from qtdnn.errors import (
    EntropyExhaustedError,
    EntropyProtocolError,
    EntropyUnavailableError,
    UsageError,
)
from qtdnn.rng import (
    EntropyFileSource,
    EntropySpec,
    RemoteQrngSource,
    SeededSource,
    derive_seed,
    fetch_remote_entropy,
    mix64,
    words_to_uniform,
)


def write_words(path, words):
    path.write_bytes(np.asarray(words, dtype="<u2").tobytes())
    return path


def test_seeded_is_deterministic():
    a, b = SeededSource(42), SeededSource(42)
    assert [a.next_uniform() for _ in range(3)] == [b.next_uniform() for _ in range(3)]


def test_bulk_and_single_draws_agree():
    a, b = SeededSource(7), SeededSource(7)
    bulk = a.uniforms(50)
    single = [b.next_uniform() for _ in range(50)]
    np.testing.assert_array_equal(bulk, single)
    assert a.position == b.position == 50


def test_splitmix_reference_values():
    # first SplitMix64 outputs for seed 0, published with the reference implementation
    src = SeededSource(0)
    raw = [mix64((k * 0x9E3779B97F4A7C15) & (2**64 - 1)) for k in (1, 2)]
    assert raw[0] == 0xE220A8397B1DCDAF
    assert raw[1] == 0x6E789E6AA1B965F4
    np.testing.assert_array_equal(src.uniforms(2), [(r >> 11) * 2.0**-52 - 1 for r in raw])


def test_seeded_distribution_ks():
    draws = SeededSource(123).uniforms(100_000)
    assert draws.min() >= -1 and draws.max() < 1
    result = stats.kstest(draws, stats.uniform(loc=-1, scale=2).cdf)
    critical_1pct = 1.63 / np.sqrt(draws.size)
    assert result.statistic < critical_1pct


def test_seeded_substreams():
    root = SeededSource(99)
    first = root.substream(0).uniforms(100)
    np.testing.assert_array_equal(root.substream(0).uniforms(100), first)
    assert not np.array_equal(root.substream(1).uniforms(100), first)
    np.testing.assert_array_equal(root.substream(3).uniforms(5), SeededSource(derive_seed(99, 3)).uniforms(5))
    # drawing from the parent does not move substreams
    root.uniforms(10)
    np.testing.assert_array_equal(root.substream(0).uniforms(100), first)
    with pytest.raises(UsageError):
        root.substream(-1)


def test_derive_seed_spreads():
    seeds = {derive_seed(s, i) for s in range(20) for i in range(20)}
    assert len(seeds) == 400


def test_word_mapping_endpoints():
    np.testing.assert_array_equal(words_to_uniform([0, 32768, 65535]), [-1.0, 0.0, 65535 / 32768 - 1])


def test_eight_byte_file_exhausts_on_fifth_draw(tmp_path):
    src = EntropyFileSource(write_words(tmp_path / "e.bin", [1, 2, 3, 4]))
    for _ in range(4):
        src.next_uniform()
    with pytest.raises(EntropyExhaustedError):
        src.next_uniform()


def test_missing_file_is_exhausted(tmp_path):
    with pytest.raises(EntropyExhaustedError):
        EntropyFileSource(tmp_path / "nope.bin").next_uniform()


def test_file_substreams_are_blocks(tmp_path):
    words = np.arange(30, dtype=np.uint16) * 1000
    src = EntropyFileSource(write_words(tmp_path / "e.bin", words), block_size=10)
    for i in range(3):
        np.testing.assert_array_equal(src.substream(i).uniforms(10), words_to_uniform(words[10 * i:10 * (i + 1)]))
    block = src.substream(1)
    block.uniforms(10)
    with pytest.raises(EntropyExhaustedError):
        block.next_uniform()
    with pytest.raises(EntropyExhaustedError):
        src.substream(3).next_uniform()
    with pytest.raises(UsageError):
        EntropyFileSource(tmp_path / "e.bin").substream(0)


def test_describe_records_provenance(tmp_path):
    path = write_words(tmp_path / "e.bin", [1, 2])
    info = EntropyFileSource(path, block_size=2).describe()
    assert info["provider"] == "file" and info["block_size"] == 2 and len(info["sha256"]) == 64
    assert SeededSource(5).describe() == {"provider": "seeded", "seed": 5}


def test_fetch_maps_mock_words(qrng_server, tmp_path):
    qrng_server.mode = "fixed"
    qrng_server.words = [0, 65535, 32768]
    cache = tmp_path / "cache.bin"
    result = fetch_remote_entropy(qrng_server.url, 3, cache, retries=0)
    assert result.fetched == 3 and result.cache_words == 3 and not result.used_cache
    assert cache.stat().st_size == 6
    assert qrng_server.requests[0]["length"] == ["3"]
    assert qrng_server.requests[0]["type"] == ["uint16"]
    draws = EntropyFileSource(cache).uniforms(3)
    assert draws[0] == -1.0
    assert draws[1] == pytest.approx(0.999969, abs=1e-6)
    assert draws[2] == 0.0


def test_fetch_chunks_and_appends(qrng_server, tmp_path):
    cache = tmp_path / "cache.bin"
    fetch_remote_entropy(qrng_server.url, 5, cache, chunk=2)
    fetch_remote_entropy(qrng_server.url, 3, cache)
    assert [q["length"] for q in qrng_server.requests] == [["2"], ["2"], ["1"], ["3"]]
    words = np.frombuffer(cache.read_bytes(), dtype="<u2")
    assert words.tolist() == list(range(8))


@pytest.mark.parametrize("mode", ["garbage", "range"])
def test_fetch_rejects_bad_payloads(qrng_server, tmp_path, mode):
    qrng_server.mode = mode
    cache = tmp_path / "cache.bin"
    with pytest.raises(EntropyProtocolError):
        fetch_remote_entropy(qrng_server.url, 4, cache)
    assert not cache.exists() or cache.stat().st_size == 0


def test_fetch_rejects_short_reply(qrng_server, tmp_path):
    qrng_server.mode = "fixed"
    qrng_server.words = [1, 2]
    with pytest.raises(EntropyProtocolError):
        fetch_remote_entropy(qrng_server.url, 3, tmp_path / "c.bin")


def test_server_down_with_empty_cache(dead_url, tmp_path):
    with pytest.raises(EntropyUnavailableError):
        fetch_remote_entropy(dead_url, 4, tmp_path / "c.bin", timeout=1, retries=0)


def test_server_down_with_warm_cache(dead_url, tmp_path):
    cache = write_words(tmp_path / "c.bin", [5, 6, 7])
    result = fetch_remote_entropy(dead_url, 4, cache, timeout=1, retries=1)
    assert result.used_cache and result.fetched == 0 and result.cache_words == 3


def test_remote_source_tops_up_cache(qrng_server, tmp_path):
    cache = tmp_path / "c.bin"
    src = RemoteQrngSource(qrng_server.url, cache, block_size=4)
    np.testing.assert_array_equal(src.substream(1).uniforms(4), words_to_uniform([4, 5, 6, 7]))
    assert cache.stat().st_size == 16
    # already cached: no new request
    n = len(qrng_server.requests)
    np.testing.assert_array_equal(src.substream(0).uniforms(4), words_to_uniform([0, 1, 2, 3]))
    assert len(qrng_server.requests) == n


def test_entropy_spec_validation(tmp_path, monkeypatch):
    monkeypatch.delenv("QTDNN_QRNG_URL", raising=False)
    with pytest.raises(UsageError):
        EntropySpec(provider="dice")
    with pytest.raises(UsageError):
        EntropySpec(provider="file")
    with pytest.raises(UsageError):
        EntropySpec(provider="qrng", path=str(tmp_path / "c.bin"))
    monkeypatch.setenv("QTDNN_QRNG_URL", "http://127.0.0.1:1/x")
    src = EntropySpec(provider="qrng", path=str(tmp_path / "c.bin")).open(8)
    assert isinstance(src, RemoteQrngSource) and src.block_size == 8
    assert isinstance(EntropySpec(seed=3).open(), SeededSource)
