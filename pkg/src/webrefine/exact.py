"""Exact-substring deduplication over a concatenated, reversibly tokenized corpus.

Documents are normalized the same way as for fuzzy dedup, but every token
keeps its source character span so dedup decisions can be applied to the
original text. Duplicate ranges are token windows of at least ``min_match``
tokens occurring two or more times anywhere in the corpus; all copies are
covered, not all-but-one.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidSpans
from .records import Document

SEPARATOR_ID = 0


@dataclass
class TokenSpan:
    doc_index: int
    char_start: int
    char_end: int


@dataclass
class TokenizedCorpus:
    token_ids: np.ndarray  # int64; SEPARATOR_ID between documents
    doc_spans: list[tuple[int, int]]  # per-doc [start, end) token ranges
    offsets: list[Optional[TokenSpan]]  # per-token provenance; None at separators
    vocab: list[str]  # id -> token string; vocab[0] is the separator

    def doc_token_count(self, doc_index: int) -> int:
        start, end = self.doc_spans[doc_index]
        return end - start


def _normalize_with_offsets(text: str) -> list[tuple[str, int, int]]:
    """Normalized tokens with [start, end) spans over the original text.

    Mirrors fuzzy-dedup normalization (lowercase, NFD, drop marks and
    punctuation, split on whitespace) while tracking, per surviving
    character, the original character it came from.
    """
    tokens = []
    buf: list[str] = []
    buf_start = buf_end = -1
    for idx, orig in enumerate(text):
        if orig.isspace():
            if buf:
                tokens.append(("".join(buf), buf_start, buf_end))
                buf = []
            continue
        for ch in unicodedata.normalize("NFD", orig.lower()):
            cat = unicodedata.category(ch)
            if cat.startswith("M") or cat.startswith("P") or ch.isspace():
                continue
            if not buf:
                buf_start = idx
            buf.append(ch)
            buf_end = idx + 1
    if buf:
        tokens.append(("".join(buf), buf_start, buf_end))
    return tokens


def tokenize_reversible(docs: Sequence[Document]) -> TokenizedCorpus:
    """Concatenate documents with separator tokens and per-token provenance."""
    vocab: list[str] = ["\x00sep"]
    intern: dict[str, int] = {}
    token_ids: list[int] = []
    offsets: list[Optional[TokenSpan]] = []
    doc_spans = []
    for doc_index, doc in enumerate(docs):
        if doc_index > 0:
            token_ids.append(SEPARATOR_ID)
            offsets.append(None)
        start = len(token_ids)
        for token, char_start, char_end in _normalize_with_offsets(doc.content):
            token_id = intern.get(token)
            if token_id is None:
                token_id = len(vocab)
                intern[token] = token_id
                vocab.append(token)
            token_ids.append(token_id)
            offsets.append(TokenSpan(doc_index, char_start, char_end))
        doc_spans.append((start, len(token_ids)))
    return TokenizedCorpus(
        token_ids=np.asarray(token_ids, dtype=np.int64),
        doc_spans=doc_spans,
        offsets=offsets,
        vocab=vocab,
    )


def build_suffix_array(token_ids: Sequence[int]) -> np.ndarray:
    """Suffix array by prefix doubling (O(n log n) lexsorts)."""
    seq = np.asarray(token_ids, dtype=np.int64)
    n = len(seq)
    if n == 0:
        raise ValueError("cannot build a suffix array of an empty sequence")
    _, rank = np.unique(seq, return_inverse=True)
    rank = rank.astype(np.int64)
    k = 1
    while rank.max() != n - 1:
        second = np.full(n, -1, dtype=np.int64)
        second[: n - k] = rank[k:]
        order = np.lexsort((second, rank))
        new_rank = np.empty(n, dtype=np.int64)
        pair = np.stack((rank[order], second[order]))
        changed = np.empty(n, dtype=np.int64)
        changed[0] = 0
        changed[1:] = np.any(pair[:, 1:] != pair[:, :-1], axis=0)
        new_rank[order] = np.cumsum(changed)
        rank = new_rank
        k *= 2
    sa = np.empty(n, dtype=np.int64)
    sa[rank] = np.arange(n)
    return sa


def lcp_array(token_ids: Sequence[int], sa: np.ndarray) -> np.ndarray:
    """lcp[i] = longest common prefix of suffixes sa[i] and sa[i+1] (Kasai)."""
    seq = np.asarray(token_ids, dtype=np.int64)
    n = len(sa)
    rank = np.empty(n, dtype=np.int64)
    rank[sa] = np.arange(n)
    lcp = np.zeros(max(n - 1, 0), dtype=np.int64)
    h = 0
    for i in range(n):
        ri = rank[i]
        if ri == n - 1:
            h = 0
            continue
        j = sa[ri + 1]
        while i + h < n and j + h < n and seq[i + h] == seq[j + h]:
            h += 1
        lcp[ri] = h
        if h > 0:
            h -= 1
    return lcp


@dataclass
class DuplicateRange:
    start: int  # token index, inclusive
    end: int  # token index, exclusive


def _merge_ranges(ranges: list[tuple[int, int]]) -> list[DuplicateRange]:
    if not ranges:
        return []
    ranges.sort()
    merged = [list(ranges[0])]
    for start, end in ranges[1:]:
        if start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [DuplicateRange(s, e) for s, e in merged]


def find_duplicate_ranges(corpus: TokenizedCorpus, min_match: int = 50) -> list[DuplicateRange]:
    """Merged token ranges covered by any >= min_match window occurring >= 2 times.

    Windows containing the document separator are excluded, so ranges never
    span documents. Occurrences within one document count as duplicates too.
    """
    if min_match < 1:
        raise ValueError("min_match must be >= 1")
    seq = corpus.token_ids
    n = len(seq)
    if n < min_match:
        return []
    sa = build_suffix_array(seq)
    lcp = lcp_array(seq, sa)
    rank = np.empty(n, dtype=np.int64)
    rank[sa] = np.arange(n)
    neighbor = np.zeros(n, dtype=np.int64)
    if n > 1:
        left = np.concatenate(([0], lcp))  # lcp with previous suffix in SA order
        right = np.concatenate((lcp, [0]))  # lcp with next suffix
        neighbor = np.maximum(left, right)[rank]
    # window at i must fit within a single document: no separator in [i, i+m)
    sep_idx = np.where(seq == SEPARATOR_ID, np.arange(n), n)
    next_sep = np.minimum.accumulate(sep_idx[::-1])[::-1]
    starts = np.arange(n)
    fits = starts + min_match <= next_sep
    duplicated = (neighbor >= min_match) & fits
    ranges = [(int(i), int(i) + min_match) for i in np.flatnonzero(duplicated)]
    return _merge_ranges(ranges)


@dataclass
class CharSpan:
    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start


def map_ranges_to_chars(
    corpus: TokenizedCorpus, ranges: list[DuplicateRange]
) -> dict[int, list[CharSpan]]:
    """Per-document character spans covering each duplicate token range."""
    by_doc: dict[int, list[tuple[int, int]]] = {}
    for rng in ranges:
        spans = [corpus.offsets[t] for t in range(rng.start, rng.end)]
        if any(s is None for s in spans):
            raise InvalidSpans("duplicate range crosses a document separator")
        doc_index = spans[0].doc_index
        if any(s.doc_index != doc_index for s in spans):
            raise InvalidSpans("duplicate range crosses a document boundary")
        by_doc.setdefault(doc_index, []).append((spans[0].char_start, spans[-1].char_end))
    return {
        doc: [CharSpan(s, e) for s, e in _char_merge(spans)]
        for doc, spans in by_doc.items()
    }


def _char_merge(spans: list[tuple[int, int]]) -> list[tuple[int, int]]:
    spans = sorted(spans)
    merged = [list(spans[0])]
    for start, end in spans[1:]:
        if start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [(s, e) for s, e in merged]


CUT = "cut"
MASK = "mask"
DROP_PARTIAL = "drop-partial"
DROP_ANY = "drop-any"
STRATEGIES = (CUT, MASK, DROP_PARTIAL, DROP_ANY)

DEFAULT_MIN_REMAINING_CHARS = 20
DEFAULT_DROP_PARTIAL_THRESHOLD = 0.20


@dataclass
class KeptDoc:
    content: str
    loss_mask: Optional[list[CharSpan]] = None


@dataclass
class Dropped:
    reason: str = "exact-duplicate residue"


def _validate_spans(spans: list[CharSpan], length: int):
    prev_end = 0
    for span in spans:
        if span.start < prev_end or span.end > length or span.start >= span.end:
            raise InvalidSpans(f"span [{span.start}, {span.end}) invalid for doc of length {length}")
        prev_end = span.end


def apply_strategy(
    content: str,
    spans: list[CharSpan],
    strategy: str = CUT,
    min_remaining_chars: int = DEFAULT_MIN_REMAINING_CHARS,
    drop_partial_threshold: float = DEFAULT_DROP_PARTIAL_THRESHOLD,
):
    """Apply one of the four duplicate-span removal strategies.

    cut: remove span characters, drop below ``min_remaining_chars`` left;
    mask: keep content, emit a loss mask, same drop rule;
    drop-partial: drop when duplicated chars exceed ``drop_partial_threshold``;
    drop-any: drop on any span.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    _validate_spans(spans, len(content))
    if not spans:
        return KeptDoc(content=content)
    dup_chars = sum(s.length for s in spans)
    remaining = len(content) - dup_chars
    if strategy == CUT:
        if remaining < min_remaining_chars:
            return Dropped()
        pieces = []
        cursor = 0
        for span in spans:
            pieces.append(content[cursor : span.start])
            cursor = span.end
        pieces.append(content[cursor:])
        return KeptDoc(content="".join(pieces))
    if strategy == MASK:
        if remaining < min_remaining_chars:
            return Dropped()
        return KeptDoc(content=content, loss_mask=list(spans))
    if strategy == DROP_PARTIAL:
        if dup_chars > drop_partial_threshold * len(content):
            return Dropped()
        return KeptDoc(content=content)
    return Dropped()  # DROP_ANY with nonempty spans
