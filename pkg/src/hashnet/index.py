"""Binarization, bit-packed codes, popcount Hamming search, and mAP.

Packed layout: each code occupies ceil(bits / 8) bytes; bit j of a code
lives in byte j // 8 at position j % 8 (least-significant bit first), a set
bit means code value +1, and pad bits past the code length are zero.

Distances are computed with word-level popcount over 64-bit lanes, exactly
(no approximation), via a full linear scan.  A PackedCodes instance is
immutable after construction, so concurrent searches over a shared index
are safe.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InvalidInput, UndefinedMetric


def binarize(values) -> np.ndarray:
    """Entry-wise sign with the tie convention sign(0) = +1."""
    values = np.asarray(values, dtype=np.float64)
    return np.where(values >= 0, 1.0, -1.0)


@dataclass(frozen=True)
class PackedCodes:
    """n bit-packed codes of the same length."""

    n: int
    bits: int
    payload: bytes
    _words: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 0 or self.bits < 1:
            raise FormatError(f"invalid code counts (n={self.n}, bits={self.bits})")
        expect = self.n * self.code_bytes
        if len(self.payload) != expect:
            raise FormatError(
                f"payload holds {len(self.payload)} bytes, expected {expect} "
                f"for {self.n} codes of {self.bits} bits"
            )
        raw = np.frombuffer(self.payload, dtype=np.uint8).reshape(self.n, self.code_bytes)
        pad = np.unpackbits(raw, axis=1, bitorder="little")[:, self.bits :]
        if pad.size and np.any(pad):
            raise FormatError("padding bits past the code length must be zero")
        # 64-bit view once, for the popcount scan.
        words_per_code = (self.code_bytes + 7) // 8
        padded = np.zeros((max(self.n, 1), words_per_code * 8), dtype=np.uint8)
        padded[: self.n, : self.code_bytes] = raw
        object.__setattr__(self, "_words", padded[: self.n].view(np.uint64))

    @property
    def code_bytes(self) -> int:
        return (self.bits + 7) // 8

    def code(self, i: int) -> bytes:
        """The packed bytes of code i."""
        cb = self.code_bytes
        return self.payload[i * cb : (i + 1) * cb]


def pack(codes) -> PackedCodes:
    """Pack a (bits x n) matrix of +-1 values into bytes."""
    codes = np.asarray(codes, dtype=np.float64)
    if codes.ndim != 2:
        raise InvalidInput(f"codes must be a bits x n matrix, got shape {codes.shape}")
    if not np.all(np.abs(codes) == 1.0):
        raise InvalidInput("codes must contain only +1 and -1")
    bits, n = codes.shape
    as_bits = (codes.T > 0).astype(np.uint8)
    payload = np.packbits(as_bits, axis=1, bitorder="little").tobytes()
    return PackedCodes(n=n, bits=bits, payload=payload)


def unpack(packed: PackedCodes) -> np.ndarray:
    """Inverse of pack: a (bits x n) matrix of +-1 values."""
    raw = np.frombuffer(packed.payload, dtype=np.uint8).reshape(packed.n, packed.code_bytes)
    as_bits = np.unpackbits(raw, axis=1, count=packed.bits, bitorder="little")
    return np.where(as_bits.T == 1, 1.0, -1.0)


def hamming(a: bytes, b: bytes, bits: int) -> int:
    """Number of differing bits between two packed codes of equal length."""
    if bits < 1:
        raise InvalidInput(f"code length must be >= 1, got {bits}")
    expect = (bits + 7) // 8
    if len(a) != expect or len(b) != expect:
        raise InvalidInput(
            f"packed codes must each hold {expect} bytes for {bits} bits, "
            f"got {len(a)} and {len(b)}"
        )
    return (int.from_bytes(a, "little") ^ int.from_bytes(b, "little")).bit_count()


def search(db: PackedCodes, query: bytes, k: int) -> list[tuple[int, int]]:
    """The k database codes nearest to the query in Hamming distance.

    Exact linear scan; ties break toward the lower database id.  Asking for
    more results than the database holds returns everything.
    """
    if k < 1:
        raise InvalidInput(f"k must be >= 1, got {k}")
    if db.n == 0:
        raise InvalidInput("cannot search an empty database")
    if len(query) != db.code_bytes:
        raise InvalidInput(
            f"query holds {len(query)} bytes, database codes hold {db.code_bytes}"
        )
    padded = np.zeros(db._words.shape[1] * 8, dtype=np.uint8)
    padded[: db.code_bytes] = np.frombuffer(query, dtype=np.uint8)
    qwords = padded.view(np.uint64)
    dists = np.bitwise_count(db._words ^ qwords).sum(axis=1)
    order = np.argsort(dists, kind="stable")[: min(k, db.n)]
    return [(int(i), int(dists[i])) for i in order]


def mean_average_precision(rankings, query_labels, db_labels) -> float:
    """Mean over queries of average precision across the given rankings.

    Each ranking is an ordered sequence of (database id, distance) pairs
    produced by search; relevance means sharing the query's class label.
    Queries with no relevant item in their ranking are excluded; if that
    leaves no query at all the metric is undefined.
    """
    if len(rankings) != len(query_labels):
        raise InvalidInput(
            f"{len(rankings)} rankings for {len(query_labels)} query labels"
        )
    db_labels = np.asarray(db_labels)
    aps = []
    for ranking, qlabel in zip(rankings, query_labels):
        ids = np.fromiter((i for i, _ in ranking), dtype=np.int64, count=len(ranking))
        rel = db_labels[ids] == qlabel
        hits = int(rel.sum())
        if hits == 0:
            continue
        ranks = np.arange(1, ids.size + 1)
        aps.append(float((np.cumsum(rel)[rel] / ranks[rel]).sum() / hits))
    if not aps:
        raise UndefinedMetric("no query has a relevant database item")
    return float(np.mean(aps))
