"""Streaming corpus diversity: distinct n-gram ratios and n-gram entropy.

N-grams are keyed by a deterministic 64-bit hash so counting a large
corpus needs memory proportional to the number of distinct n-grams, not
to vocabulary-sized tuples. Counts themselves are exact; hash collisions
(expected well under one per billions of distinct n-grams) would merge
two n-grams' counts and are accepted. Tokens are whatever the caller
supplies: integers, or strings interned on the fly. N-grams never span
document boundaries; feed a whole corpus as one document to get a
single unbounded stream.

Shannon entropy is computed in bits from the exact count table. The
reported value is clamped to its mathematical bound log2(distinct) so
the uniform-distribution equality survives floating-point rounding.
"""

from __future__ import annotations

import struct
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from hashlib import blake2b
from itertools import islice

import numpy as np

__all__ = [
    "DiversityReport",
    "NgramProfiler",
    "NgramStats",
    "distinct_ngram_ratio",
    "ngram_entropy",
    "profile_corpus",
    "read_binary_token_documents",
    "read_text_token_documents",
]

# splitmix64 finalizer constants: scatter small token ids across the
# full 64-bit space before they enter the rolling window hash.
_MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_2 = np.uint64(0x94D049BB133111EB)
_MIX_OFFSET = np.uint64(0x9E3779B97F4A7C15)
_WINDOW_MULTIPLIER = np.uint64(0xD6E8FEB86659FD93)

_FLUSH_TOKENS = 1 << 20
# Pending per-n chunk results are merged once they outgrow both this
# floor and the already-consolidated table, so total merge work stays
# O(N log N) while memory stays near the distinct-n-gram count.
_CONSOLIDATE_FLOOR = 4 << 20


def _mix64(values: np.ndarray) -> np.ndarray:
    x = values.astype(np.uint64) + _MIX_OFFSET
    x ^= x >> np.uint64(30)
    x *= _MIX_1
    x ^= x >> np.uint64(27)
    x *= _MIX_2
    x ^= x >> np.uint64(31)
    return x


@dataclass(frozen=True)
class NgramStats:
    """Counts for one n-gram order.

    ``ratio`` is distinct/total; by convention it is 1.0 when the
    corpus has no n-grams of this order at all, with ``empty`` set so
    the convention is distinguishable from a genuinely diverse corpus.
    """

    n: int
    distinct: int
    total: int
    ratio: float
    entropy_bits: float
    empty: bool


@dataclass(frozen=True)
class DiversityReport:
    token_total: int
    per_n: tuple[NgramStats, ...]

    def stats(self, n: int) -> NgramStats:
        for row in self.per_n:
            if row.n == n:
                return row
        raise KeyError(f"no statistics for n={n}")


class NgramProfiler:
    """Single-pass n-gram counter for every order 1..n_max.

    Feed documents one at a time with :meth:`add_document`; each call is
    a boundary that n-grams do not cross. Documents of any size are
    fine: tokens are buffered and processed in large batches, so many
    tiny documents cost no more than one big one.
    """

    def __init__(self, n_max: int):
        if n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {n_max}")
        self.n_max = n_max
        self._token_total = 0
        self._totals = [0] * (n_max + 1)
        self._parts: list[list[tuple[np.ndarray, np.ndarray]]] = [
            [] for _ in range(n_max + 1)
        ]
        self._pending_keys = [0] * (n_max + 1)
        self._consolidated_keys = [0] * (n_max + 1)
        self._vocab: dict = {}
        self._doc_counter = 0
        self._buf_tokens: list = []
        self._buf_segments: list[tuple[int, int]] = []  # (doc id, token count)
        self._tail_hashes = np.empty(0, dtype=np.uint64)
        self._tail_docs = np.empty(0, dtype=np.int64)

    def add_document(self, tokens: Iterable) -> None:
        """Count all n-grams of one document; boundaries are implicit."""
        doc_id = self._doc_counter
        self._doc_counter += 1
        if isinstance(tokens, (list, tuple, np.ndarray)):
            pos, size = 0, len(tokens)
            while pos < size:
                take = min(_FLUSH_TOKENS - len(self._buf_tokens), size - pos)
                self._buf_tokens.extend(
                    tokens if pos == 0 and take == size else tokens[pos : pos + take]
                )
                self._buf_segments.append((doc_id, take))
                self._token_total += take
                pos += take
                if len(self._buf_tokens) >= _FLUSH_TOKENS:
                    self._flush()
            return
        iterator = iter(tokens)
        while True:
            room = _FLUSH_TOKENS - len(self._buf_tokens)
            chunk = list(islice(iterator, room))
            if not chunk:
                break
            self._buf_tokens.extend(chunk)
            self._buf_segments.append((doc_id, len(chunk)))
            self._token_total += len(chunk)
            if len(self._buf_tokens) >= _FLUSH_TOKENS:
                self._flush()

    def _encode(self, tokens: list) -> np.ndarray:
        # String tokens are keyed by a content digest rather than an
        # interning order, so profilers fed disjoint document shards
        # count the same n-grams under the same keys and can be merged.
        if isinstance(tokens[0], str):
            vocab = self._vocab
            return np.fromiter(
                (
                    vocab[t]
                    if t in vocab
                    else vocab.setdefault(
                        t, int.from_bytes(blake2b(t.encode(), digest_size=8).digest(), "little")
                    )
                    for t in tokens
                ),
                dtype=np.uint64,
                count=len(tokens),
            )
        return np.asarray(tokens, dtype=np.int64).astype(np.uint64)

    def _flush(self) -> None:
        if not self._buf_tokens:
            return
        mixed = _mix64(self._encode(self._buf_tokens))
        seg_docs = np.array([d for d, _ in self._buf_segments], dtype=np.int64)
        seg_lens = np.array([c for _, c in self._buf_segments], dtype=np.int64)
        docs = np.repeat(seg_docs, seg_lens)
        self._buf_tokens.clear()
        self._buf_segments.clear()

        tail_len = len(self._tail_hashes)
        if tail_len:
            mixed = np.concatenate([self._tail_hashes, mixed])
            docs = np.concatenate([self._tail_docs, docs])
        length = len(mixed)

        for n in range(1, self.n_max + 1):
            # Windows fully inside the carried tail were counted by the
            # previous flush; keep only those ending in the new region,
            # and only those that stay within one document.
            start = max(0, tail_len - n + 1)
            width = (length - n + 1) - start
            if width <= 0:
                continue
            hashes = np.zeros(width, dtype=np.uint64)
            for j in range(n):
                hashes *= _WINDOW_MULTIPLIER
                hashes += mixed[start + j : start + j + width]
            if n > 1:
                valid = docs[start : start + width] == docs[start + n - 1 : start + n - 1 + width]
                hashes = hashes[valid]
                if not len(hashes):
                    continue
            self._totals[n] += len(hashes)
            uniq, counts = np.unique(hashes, return_counts=True)
            self._parts[n].append((uniq, counts))
            self._pending_keys[n] += len(uniq)
            if self._pending_keys[n] > max(_CONSOLIDATE_FLOOR, self._consolidated_keys[n]):
                self._consolidate(n)

        if self.n_max > 1:
            keep = min(self.n_max - 1, length)
            self._tail_hashes = mixed[length - keep :].copy()
            self._tail_docs = docs[length - keep :].copy()

    def _consolidate(self, n: int) -> None:
        parts = self._parts[n]
        if len(parts) <= 1:
            return
        hashes = np.concatenate([p[0] for p in parts])
        counts = np.concatenate([p[1] for p in parts])
        uniq, inverse = np.unique(hashes, return_inverse=True)
        # Counts fit in float64 exactly (far below 2**53).
        merged = np.bincount(inverse, weights=counts.astype(np.float64)).astype(np.int64)
        self._parts[n] = [(uniq, merged)]
        self._pending_keys[n] = 0
        self._consolidated_keys[n] = len(uniq)

    def merge(self, other: NgramProfiler) -> None:
        """Fold another profiler's counts into this one.

        Supports sharding a corpus by document across workers: each
        worker profiles its share, and the merged result is identical
        to profiling everything in one instance. Both profilers must
        have flushed complete documents only (which :meth:`add_document`
        guarantees) and share ``n_max``.
        """
        if other.n_max != self.n_max:
            raise ValueError(
                f"cannot merge profilers with n_max {other.n_max} into {self.n_max}"
            )
        self._flush()
        other._flush()
        self._token_total += other._token_total
        for n in range(1, self.n_max + 1):
            self._totals[n] += other._totals[n]
            self._parts[n].extend(other._parts[n])
            self._pending_keys[n] += other._pending_keys[n] + other._consolidated_keys[n]
            self._consolidate(n)

    def counts(self, n: int) -> np.ndarray:
        """Per-key occurrence counts for order ``n``, sorted (diagnostic)."""
        if not 1 <= n <= self.n_max:
            raise ValueError(f"n must be in [1, {self.n_max}], got {n}")
        self._flush()
        self._consolidate(n)
        if not self._parts[n]:
            return np.empty(0, dtype=np.int64)
        return np.sort(self._parts[n][0][1])

    def report(self) -> DiversityReport:
        self._flush()
        rows = []
        for n in range(1, self.n_max + 1):
            self._consolidate(n)
            total = self._totals[n]
            if self._parts[n]:
                counts = self._parts[n][0][1]
                distinct = len(counts)
                probabilities = counts / total
                entropy = float(-(probabilities * np.log2(probabilities)).sum())
                entropy = min(max(entropy, 0.0), float(np.log2(distinct))) + 0.0
                ratio = distinct / total
                empty = False
            else:
                distinct, entropy, ratio, empty = 0, 0.0, 1.0, True
            rows.append(
                NgramStats(
                    n=n,
                    distinct=distinct,
                    total=total,
                    ratio=ratio,
                    entropy_bits=entropy,
                    empty=empty,
                )
            )
        return DiversityReport(token_total=self._token_total, per_n=tuple(rows))


def profile_corpus(documents: Iterable[Iterable], n_max: int) -> DiversityReport:
    """Profile every n-gram order 1..n_max over an iterable of documents."""
    profiler = NgramProfiler(n_max)
    for document in documents:
        profiler.add_document(document)
    return profiler.report()


def distinct_ngram_ratio(tokens: Iterable, n: int) -> float:
    """Distinct n-grams over total n-gram occurrences for one token stream."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return profile_corpus([tokens], n).stats(n).ratio


def ngram_entropy(tokens: Iterable, n: int) -> float:
    """Shannon entropy (bits) of the n-gram distribution of one token stream."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return profile_corpus([tokens], n).stats(n).entropy_bits


def read_text_token_documents(path) -> Iterator[list[str]]:
    """Yield one whitespace-tokenized document per line of a UTF-8 file.

    Decoding errors report the absolute byte offset of the bad byte.
    """
    offset = 0
    with open(path, "rb") as handle:
        for raw in handle:
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ValueError(
                    f"invalid UTF-8 at byte offset {offset + exc.start} of {path}"
                ) from exc
            offset += len(raw)
            yield line.split()


def read_binary_token_documents(path) -> Iterator[np.ndarray]:
    """Yield token-id documents from a little-endian uint32 stream.

    Wire format, repeated until end of file: a uint32 document length,
    then that many uint32 token ids. Truncation errors report the byte
    offset where the stream became unreadable.
    """
    with open(path, "rb") as handle:
        offset = 0
        while True:
            header = handle.read(4)
            if not header:
                return
            if len(header) < 4:
                raise ValueError(
                    f"truncated document length at byte offset {offset} of {path}"
                )
            (length,) = struct.unpack("<I", header)
            offset += 4
            payload = handle.read(4 * length)
            if len(payload) < 4 * length:
                raise ValueError(
                    f"document at byte offset {offset - 4} of {path} declares"
                    f" {length} tokens but the stream ends at byte {offset + len(payload)}"
                )
            offset += len(payload)
            yield np.frombuffer(payload, dtype="<u4").astype(np.int64)
