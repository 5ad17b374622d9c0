"""Uniform [-1, 1) entropy streams.

Three providers share one contract (:class:`RandomSource`):

* :class:`SeededSource` - SplitMix64. State advances by ``GOLDEN`` per draw, the
  output is ``mix64(state)``, and the value is ``(z >> 11) * 2**-52 - 1``. The
  substream ``i`` of a source seeded with ``seed`` is a fresh source seeded with
  ``derive_seed(seed, i) = mix64(seed ^ mix64((i + 1) * GOLDEN mod 2**64))``.
* :class:`EntropyFileSource` - raw little-endian uint16 words, each mapped to
  ``w / 32768 - 1``. Substream ``i`` is the block of words ``[i*B, (i+1)*B)``.
* :class:`RemoteQrngSource` - an entropy file used as a cache for an HTTP
  random-number service; it only goes to the network when the cache is short.

Finite providers raise :class:`EntropyExhaustedError` rather than wrap around.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    EntropyExhaustedError,
    EntropyProtocolError,
    EntropyUnavailableError,
    UsageError,
)

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

QRNG_URL_ENV = "QTDNN_QRNG_URL"
QRNG_TIMEOUT_ENV = "QTDNN_QRNG_TIMEOUT"
QRNG_RETRIES_ENV = "QTDNN_QRNG_RETRIES"
WORD_DTYPE = np.dtype("<u2")


def mix64(z: int) -> int:
    """SplitMix64 output function."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    return mix64((seed & MASK64) ^ mix64((index + 1) * GOLDEN))


def words_to_uniform(words) -> np.ndarray:
    """Map uint16 words onto [-1, 1) via ``2 * w / 65536 - 1``."""
    return np.asarray(words, dtype=np.float64) / 32768.0 - 1.0


class RandomSource:
    """A single-consumer stream of uniform values in [-1, 1)."""

    def next_uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def uniforms(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def substream(self, index: int) -> "RandomSource":
        raise NotImplementedError

    def describe(self) -> dict:
        """JSON-serialisable provenance for run manifests."""
        raise NotImplementedError


class SeededSource(RandomSource):
    def __init__(self, seed: int):
        if not isinstance(seed, (int, np.integer)):
            raise UsageError(f"seed must be an integer, got {seed!r}")
        self.seed = int(seed) & MASK64
        self._state = self.seed
        self.position = 0

    def uniforms(self, n: int) -> np.ndarray:
        if n < 0:
            raise UsageError("cannot draw a negative number of values")
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self._state) + steps * np.uint64(GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
            z = z ^ (z >> np.uint64(31))
        self._state = (self._state + n * GOLDEN) & MASK64
        self.position += n
        return (z >> np.uint64(11)).astype(np.float64) * 2.0**-52 - 1.0

    def substream(self, index: int) -> "SeededSource":
        if index < 0:
            raise UsageError("substream index must be >= 0")
        return SeededSource(derive_seed(self.seed, index))

    def describe(self) -> dict:
        return {"provider": "seeded", "seed": self.seed}


class EntropyFileSource(RandomSource):
    """Reads uint16 words from ``path`` starting at word ``offset``.

    ``limit`` caps the number of words this source may consume; ``block_size``
    is the substream block length ``B``.
    """

    def __init__(self, path, block_size: int | None = None, offset: int = 0, limit: int | None = None):
        self.path = Path(path)
        if block_size is not None and block_size < 1:
            raise UsageError("block size must be >= 1")
        self.block_size = block_size
        self.offset = offset
        self.limit = limit
        self.position = 0
        self._words: np.ndarray | None = None

    def _load(self) -> np.ndarray:
        if self._words is None:
            try:
                raw = self.path.read_bytes()
            except FileNotFoundError:
                raw = b""
            if len(raw) % 2:
                raw = raw[:-1]
            self._words = np.frombuffer(raw, dtype=WORD_DTYPE)
        return self._words

    def _ensure(self, end: int) -> None:
        """Hook for providers that can grow the backing file."""

    def uniforms(self, n: int) -> np.ndarray:
        if n < 0:
            raise UsageError("cannot draw a negative number of values")
        if self.limit is not None and self.position + n > self.limit:
            raise EntropyExhaustedError(
                f"entropy block exhausted: requested word {self.position + n} of {self.limit} "
                f"in {self.path}"
            )
        start = self.offset + self.position
        self._ensure(start + n)
        words = self._load()
        if start + n > words.size:
            raise EntropyExhaustedError(
                f"entropy file {self.path} holds {words.size} words, needed {start + n}"
            )
        self.position += n
        return words_to_uniform(words[start:start + n])

    def _block_bounds(self, index: int) -> tuple[int, int]:
        if index < 0:
            raise UsageError("substream index must be >= 0")
        if self.block_size is None:
            raise UsageError("file-backed substreams need a block size")
        return self.offset + index * self.block_size, self.block_size

    def substream(self, index: int) -> "EntropyFileSource":
        offset, size = self._block_bounds(index)
        return EntropyFileSource(self.path, self.block_size, offset, size)

    def describe(self) -> dict:
        return {
            "provider": "file",
            "path": str(self.path),
            "sha256": file_sha256(self.path),
            "block_size": self.block_size,
            "offset": self.offset,
        }


class RemoteQrngSource(EntropyFileSource):
    """An entropy file that tops itself up from a remote QRNG service."""

    def __init__(self, url: str, cache, block_size: int | None = None, offset: int = 0,
                 limit: int | None = None, timeout: float | None = None, retries: int | None = None):
        super().__init__(cache, block_size, offset, limit)
        self.url = url
        self.timeout = timeout
        self.retries = retries

    def _ensure(self, end: int) -> None:
        have = cache_word_count(self.path)
        if have >= end:
            return
        fetch_remote_entropy(self.url, end - have, self.path, timeout=self.timeout, retries=self.retries)
        self._words = None

    def substream(self, index: int) -> "RemoteQrngSource":
        offset, size = self._block_bounds(index)
        return RemoteQrngSource(self.url, self.path, self.block_size, offset, size,
                                self.timeout, self.retries)

    def describe(self) -> dict:
        info = super().describe()
        info.update(provider="qrng", url=self.url)
        return info


def file_sha256(path) -> str | None:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except FileNotFoundError:
        return None


def cache_word_count(path) -> int:
    try:
        return Path(path).stat().st_size // 2
    except FileNotFoundError:
        return 0


@dataclass
class FetchResult:
    fetched: int
    cache_words: int
    used_cache: bool = False


def _parse_payload(body: bytes, expected: int) -> np.ndarray:
    try:
        payload = json.loads(body)
    except (ValueError, UnicodeDecodeError) as exc:
        raise EntropyProtocolError(f"response is not JSON: {exc}") from None
    if not isinstance(payload, dict) or not isinstance(payload.get("data"), list):
        raise EntropyProtocolError("response has no 'data' array")
    data = payload["data"]
    if len(data) != expected:
        raise EntropyProtocolError(f"asked for {expected} words, got {len(data)}")
    for w in data:
        if isinstance(w, bool) or not isinstance(w, int):
            raise EntropyProtocolError(f"non-integer word {w!r} in response")
        if not 0 <= w <= 0xFFFF:
            raise EntropyProtocolError(f"word {w} outside [0, 65535]")
    return np.asarray(data, dtype=WORD_DTYPE)


def _request(endpoint: str, count: int, timeout: float) -> bytes:
    parts = urllib.parse.urlsplit(endpoint)
    query = urllib.parse.parse_qsl(parts.query)
    query += [("length", str(count)), ("type", "uint16")]
    url = urllib.parse.urlunsplit(parts._replace(query=urllib.parse.urlencode(query)))
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.read()


def fetch_remote_entropy(endpoint: str, count: int, cache, *, timeout: float | None = None,
                         retries: int | None = None, chunk: int = 1024) -> FetchResult:
    """Fetch ``count`` uint16 words from ``endpoint`` and append them to ``cache``.

    The request is ``GET <endpoint>?length=<n>&type=uint16`` and the reply must be
    a JSON object whose ``data`` field lists ``n`` integers in [0, 65535]. Large
    requests are split into chunks of at most ``chunk`` words. If the service
    cannot be reached the existing cache is used when it is non-empty;
    otherwise :class:`EntropyUnavailableError` is raised.
    """
    if count < 1:
        raise UsageError("count must be >= 1")
    if timeout is None:
        timeout = float(os.environ.get(QRNG_TIMEOUT_ENV, "10"))
    if retries is None:
        retries = int(os.environ.get(QRNG_RETRIES_ENV, "2"))
    cache = Path(cache)
    cache.parent.mkdir(parents=True, exist_ok=True)

    fetched = 0
    while fetched < count:
        n = min(chunk, count - fetched)
        body = None
        last_error: Exception | None = None
        for attempt in range(retries + 1):
            try:
                body = _request(endpoint, n, timeout)
                break
            except (urllib.error.URLError, OSError, TimeoutError) as exc:
                last_error = exc
                log.warning("qrng request failed (attempt %d/%d): %s", attempt + 1, retries + 1, exc)
                if attempt < retries:
                    time.sleep(min(0.1 * 2**attempt, 2.0))
        if body is None:
            have = cache_word_count(cache)
            if have > 0:
                log.warning("qrng service unavailable, using cache (%d words)", have)
                return FetchResult(fetched, have, used_cache=True)
            raise EntropyUnavailableError(f"cannot reach {endpoint} and cache is empty: {last_error}")
        words = _parse_payload(body, n)
        with cache.open("ab") as fh:
            fh.write(words.tobytes())
        fetched += n
    return FetchResult(fetched, cache_word_count(cache))


@dataclass(frozen=True)
class EntropySpec:
    """Descriptor of an entropy provider, resolved lazily to a source."""

    provider: str = "seeded"
    seed: int = 0
    path: str | None = None
    url: str | None = None
    block_size: int | None = None

    def __post_init__(self):
        if self.provider not in ("seeded", "file", "qrng"):
            raise UsageError(f"unknown entropy provider {self.provider!r}")
        if self.provider in ("file", "qrng") and not self.path:
            raise UsageError(f"{self.provider} entropy needs a path")
        if self.provider == "qrng" and not (self.url or os.environ.get(QRNG_URL_ENV)):
            raise UsageError(f"qrng entropy needs a url (or ${QRNG_URL_ENV})")

    def open(self, default_block_size: int | None = None) -> RandomSource:
        block = self.block_size or default_block_size
        if self.provider == "seeded":
            return SeededSource(self.seed)
        if self.provider == "file":
            return EntropyFileSource(self.path, block)
        return RemoteQrngSource(self.url or os.environ[QRNG_URL_ENV], self.path, block)
