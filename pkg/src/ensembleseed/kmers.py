"""Integer encoding of k-mers and small DNA string utilities.

Every k-mer over {A, C, G, T} maps to an integer in [0, 4**k) with A=0,
C=1, G=2, T=3 and the first base in the most significant position. The
encoding is fixed so that indexes and trained transition tables stay
portable across runs.
"""

from __future__ import annotations

import numpy as np

BASES = "ACGT"
_BASE_TO_CODE = {b: i for i, b in enumerate(BASES)}
_COMPLEMENT = str.maketrans("ACGTacgt", "TGCAtgca")


def encode_kmer(kmer: str) -> int:
    """Return the integer code of a k-mer (A=0..T=3, first base most significant)."""
    code = 0
    for base in kmer:
        try:
            code = (code << 2) | _BASE_TO_CODE[base]
        except KeyError:
            raise ValueError(f"non-ACGT base {base!r} in k-mer {kmer!r}") from None
    return code


def decode_kmer(code: int, k: int) -> str:
    """Return the k-mer string for an integer code."""
    if not 0 <= code < 4**k:
        raise ValueError(f"code {code} out of range for k={k}")
    out = []
    for shift in range(2 * (k - 1), -1, -2):
        out.append(BASES[(code >> shift) & 3])
    return "".join(out)


def encode_sequence(seq: str) -> np.ndarray:
    """Encode a DNA string as an int8 array of base codes."""
    arr = np.frombuffer(seq.encode("ascii"), dtype=np.uint8)
    codes = np.full(arr.shape, -1, dtype=np.int8)
    for base, value in _BASE_TO_CODE.items():
        codes[arr == ord(base)] = value
    return codes


def kmer_codes(seq: str, k: int) -> np.ndarray:
    """Integer codes of all overlapping k-mers of ``seq``.

    Positions whose k-mer overlaps a non-ACGT character get code -1.
    """
    codes = encode_sequence(seq)
    n = len(seq) - k + 1
    if n <= 0:
        return np.empty(0, dtype=np.int64)
    out = np.zeros(n, dtype=np.int64)
    bad = np.zeros(n, dtype=bool)
    for j in range(k):
        window = codes[j : j + n].astype(np.int64)
        out = (out << 2) | np.where(window < 0, 0, window)
        bad |= window < 0
    out[bad] = -1
    return out


def reverse_complement(seq: str) -> str:
    return seq.translate(_COMPLEMENT)[::-1]


def all_kmers(k: int):
    """Yield all 4**k k-mers in encoding order."""
    for code in range(4**k):
        yield decode_kmer(code, k)
