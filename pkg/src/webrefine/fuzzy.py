"""MinHash-LSH approximate deduplication.

Signatures use k = b*r seeded affine hashes over a 61-bit Mersenne prime;
documents colliding on all b values of any of the r buckets are clustered
with union-find and all but one member of each cluster is removed. The
false-positive confirmation pass (re-checking true Jaccard on candidate
pairs) is deliberately skipped: bucket collisions are trusted directly.
"""
from __future__ import annotations

import hashlib
import struct
import unicodedata
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional

import numpy as np

from .errors import DomainError, EmptyShingleSet, ParamMismatch

_MERSENNE = np.uint64((1 << 61) - 1)
_MERSENNE_INT = (1 << 61) - 1


def normalize_for_dedup(text: str) -> list[str]:
    """Lowercase, NFD-decompose, drop combining marks and punctuation, split on whitespace."""
    decomposed = unicodedata.normalize("NFD", text.lower())
    kept = []
    for ch in decomposed:
        cat = unicodedata.category(ch)
        if cat.startswith("M") or cat.startswith("P"):
            continue
        kept.append(ch)
    return "".join(kept).split()


def shingle_set(tokens: list[str], n: int = 5) -> set[str]:
    """Unique space-joined n-token windows; short docs yield one whole-doc shingle."""
    if n < 1:
        raise DomainError("shingle size must be >= 1")
    if not tokens:
        return set()
    if len(tokens) < n:
        return {" ".join(tokens)}
    return {" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1)}


@dataclass(frozen=True)
class MinHashParams:
    n: int = 5
    b: int = 20
    r: int = 450
    seed: int = 0

    @property
    def k(self) -> int:
        return self.b * self.r


DEFAULT_PARAMS = MinHashParams()


@dataclass
class MinHashSignature:
    values: np.ndarray  # uint64, length k
    params: MinHashParams


_hash_family_cache: dict[MinHashParams, tuple[np.ndarray, np.ndarray]] = {}


def _hash_family(params: MinHashParams) -> tuple[np.ndarray, np.ndarray]:
    """k (multiplier, addend) pairs drawn over the full field [1, p) x [0, p).

    Multipliers must span the whole field: with small multipliers a*x barely
    wraps the modulus, the map stays piecewise-monotone in x, and the argmin
    is shared across hash functions, which inflates estimator variance.
    """
    cached = _hash_family_cache.get(params)
    if cached is None:
        rng = np.random.default_rng(params.seed)
        a = rng.integers(1, _MERSENNE_INT, size=params.k, dtype=np.uint64)
        b = rng.integers(0, _MERSENNE_INT, size=params.k, dtype=np.uint64)
        cached = (a, b)
        _hash_family_cache[params] = cached
    return cached


def _base_hashes(shingles: Iterable[str], seed: int) -> np.ndarray:
    person = struct.pack("<q", seed)
    values = [
        int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=4, person=person).digest(), "little")
        for s in shingles
    ]
    return np.asarray(values, dtype=np.uint64)


def _mod_mersenne(x: np.ndarray) -> np.ndarray:
    y = (x & _MERSENNE) + (x >> np.uint64(61))
    return np.where(y >= _MERSENNE, y - _MERSENNE, y)


_LOW31 = np.uint64((1 << 31) - 1)
_LOW30 = np.uint64((1 << 30) - 1)


def _affine_hash(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a*x + b) mod 2^61-1 without uint64 overflow, for 32-bit base hashes x.

    Splits a into 30 high and 31 low bits; multiplying a 61-bit value by 2^31
    modulo the Mersenne prime is a 61-bit left rotation, so every intermediate
    product fits in 64 bits (a_hi*x < 2^62, a_lo*x < 2^63).
    """
    a_hi = a >> np.uint64(31)
    a_lo = a & _LOW31
    t = _mod_mersenne(a_hi * x)
    t = ((t & _LOW30) << np.uint64(31)) | (t >> np.uint64(30))
    return _mod_mersenne(_mod_mersenne(t + a_lo * x) + b)


def minhash_signature(
    shingles: set[str], params: MinHashParams = DEFAULT_PARAMS
) -> MinHashSignature:
    """Per-hash-function minimum over the shingle set."""
    if not shingles:
        raise EmptyShingleSet("cannot sign an empty shingle set")
    a, b = _hash_family(params)
    base = _base_hashes(sorted(shingles), params.seed)
    mins = np.full(params.k, _MERSENNE_INT, dtype=np.uint64)
    # chunk over shingles to bound the (chunk, k) temporary
    chunk = max(1, (1 << 22) // params.k)
    for i in range(0, len(base), chunk):
        h = _affine_hash(base[i : i + chunk, None], a[None, :], b[None, :])
        np.minimum(mins, h.min(axis=0), out=mins)
    return MinHashSignature(values=mins, params=params)


def estimate_jaccard(sig_a: MinHashSignature, sig_b: MinHashSignature) -> float:
    """Fraction of agreeing signature positions; unbiased Jaccard estimate."""
    if sig_a.params != sig_b.params:
        raise ParamMismatch("signatures built with different parameters")
    return float(np.mean(sig_a.values == sig_b.values))


def bucket_keys(sig: MinHashSignature) -> list[bytes]:
    """One 128-bit key per bucket, hashing each contiguous b-value slice."""
    b, r = sig.params.b, sig.params.r
    raw = sig.values.astype("<u8").tobytes()
    width = b * 8
    return [
        hashlib.blake2b(raw[j * width : (j + 1) * width], digest_size=16).digest()
        for j in range(r)
    ]


def match_probability(s: float, b: int = 20, r: int = 450) -> float:
    """Probability that LSH flags a pair whose signature agreement rate is s."""
    if not (0.0 <= s <= 1.0):
        raise DomainError(f"similarity {s} outside [0, 1]")
    if b < 1 or r < 1:
        raise DomainError("b and r must be >= 1")
    return 1.0 - (1.0 - s**b) ** r


class UnionFind:
    """Disjoint sets with path compression; roots are the smallest member."""

    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        if x not in self.parent:
            self.parent[x] = x
            return x
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y):
        px, py = self.find(x), self.find(y)
        if px == py:
            return
        root = min(px, py)
        self.parent[px] = self.parent[py] = root

    def components(self) -> dict:
        comps: dict = {}
        for x in self.parent:
            comps.setdefault(self.find(x), set()).add(x)
        return comps


class LSHIndex:
    """r bucket tables mapping bucket key -> document ids."""

    def __init__(self, params: MinHashParams = DEFAULT_PARAMS):
        self.params = params
        self.tables: list[dict] = [{} for _ in range(params.r)]
        self.doc_ids: list = []

    def add(self, doc_id, sig: MinHashSignature):
        if sig.params != self.params:
            raise ParamMismatch("signature parameters do not match the index")
        self.doc_ids.append(doc_id)
        for table, key in zip(self.tables, bucket_keys(sig)):
            bucket = table.setdefault(key, [])
            if doc_id not in bucket:
                bucket.append(doc_id)


@dataclass
class DupClusters:
    clusters: list  # list of sorted id lists, singletons included

    def non_singletons(self) -> list:
        return [c for c in self.clusters if len(c) > 1]


def cluster_duplicates(index: LSHIndex) -> DupClusters:
    """Union-find over ids sharing any bucket key; A~B and B~C gives {A,B,C}."""
    uf = UnionFind()
    for doc_id in index.doc_ids:
        uf.find(doc_id)
    for table in index.tables:
        for bucket in table.values():
            first = bucket[0]
            for other in bucket[1:]:
                uf.union(first, other)
    comps = uf.components()
    clusters = sorted(sorted(members) for members in comps.values())
    return DupClusters(clusters=clusters)


def select_survivors(
    clusters: DupClusters, policy: str = "smallest-id", seed: Optional[int] = None
) -> set:
    """Exactly one kept id per cluster."""
    if policy == "smallest-id":
        return {cluster[0] for cluster in clusters.clusters}
    if policy == "seeded-random":
        rng = np.random.default_rng(0 if seed is None else seed)
        return {cluster[int(rng.integers(len(cluster)))] for cluster in clusters.clusters}
    raise DomainError(f"unknown survivor policy {policy!r}")


_CACHE_MAGIC = b"WRSG\x01"


def write_signatures(sink: IO[bytes], items: Iterable[tuple[str, MinHashSignature]]) -> int:
    """Binary signature cache: params header then (id, values) records."""
    count = 0
    header_written = False
    for doc_id, sig in items:
        if not header_written:
            p = sig.params
            sink.write(_CACHE_MAGIC)
            sink.write(struct.pack("<iiiq", p.n, p.b, p.r, p.seed))
            header_written = True
        encoded = doc_id.encode("utf-8")
        sink.write(struct.pack("<I", len(encoded)))
        sink.write(encoded)
        sink.write(sig.values.astype("<u8").tobytes())
        count += 1
    if not header_written:
        sink.write(_CACHE_MAGIC)
        p = DEFAULT_PARAMS
        sink.write(struct.pack("<iiiq", p.n, p.b, p.r, p.seed))
    return count


def read_signatures(source: IO[bytes]) -> tuple[MinHashParams, list[tuple[str, MinHashSignature]]]:
    magic = source.read(len(_CACHE_MAGIC))
    if magic != _CACHE_MAGIC:
        raise ParamMismatch("not a signature cache file")
    n, b, r, seed = struct.unpack("<iiiq", source.read(20))
    params = MinHashParams(n=n, b=b, r=r, seed=seed)
    out = []
    while True:
        head = source.read(4)
        if not head:
            break
        (id_len,) = struct.unpack("<I", head)
        doc_id = source.read(id_len).decode("utf-8")
        raw = source.read(params.k * 8)
        if len(raw) < params.k * 8:
            raise ParamMismatch("signature cache truncated")
        values = np.frombuffer(raw, dtype="<u8").astype(np.uint64)
        out.append((doc_id, MinHashSignature(values=values, params=params)))
    return params, out
