"""Run-length form of symbol sequences and the statistics computed on it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConditioningEvents, NonBinaryAlphabet, UnknownSymbol
from .markov import BINARY, SymbolAlphabet


@dataclass(frozen=True, eq=False)
class RunLengthSequence:
    """Maximal runs of a sequence: ``codes[c]`` is the alphabet index of run c."""

    alphabet: SymbolAlphabet
    codes: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        if not isinstance(self.alphabet, SymbolAlphabet):
            object.__setattr__(self, "alphabet", SymbolAlphabet(tuple(self.alphabet)))
        codes = np.array(self.codes, dtype=np.int64)
        counts = np.array(self.counts, dtype=np.int64)
        if codes.shape != counts.shape or codes.ndim != 1:
            raise ValueError("codes and counts must be 1-D arrays of equal length")
        if counts.size and counts.min() < 1:
            raise ValueError("run counts must be >= 1")
        if codes.size and (codes.min() < 0 or codes.max() >= len(self.alphabet)):
            raise ValueError("run symbol outside the alphabet")
        if np.any(codes[1:] == codes[:-1]):
            raise ValueError("adjacent runs must carry distinct symbols")
        codes.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_pairs(cls, pairs, alphabet=BINARY) -> "RunLengthSequence":
        """Build from ``(symbol, count)`` pairs, merging adjacent equal symbols."""
        alphabet = alphabet if isinstance(alphabet, SymbolAlphabet) else SymbolAlphabet(tuple(alphabet))
        codes, counts = [], []
        for pos, (sym, n) in enumerate(pairs):
            sym = str(sym)
            if sym not in alphabet.symbols:
                raise UnknownSymbol(sym, pos)
            k = alphabet.index(sym)
            if codes and codes[-1] == k:
                counts[-1] += int(n)
            else:
                codes.append(k)
                counts.append(int(n))
        return cls(alphabet, codes, counts)

    @property
    def runs(self) -> list:
        syms = self.alphabet.symbols
        return [(syms[k], int(n)) for k, n in zip(self.codes, self.counts)]

    @property
    def total_length(self) -> int:
        return int(self.counts.sum())

    def __len__(self):
        return len(self.codes)

    def scaled(self, factor: int) -> "RunLengthSequence":
        """Same run structure with every run length multiplied by ``factor``."""
        return RunLengthSequence(self.alphabet, self.codes, self.counts * int(factor))

    def to_text(self) -> str:
        return " ".join(f"{s}^{n}" for s, n in self.runs)


def encode(sequence: str, alphabet=BINARY) -> RunLengthSequence:
    """Maximal run-length encoding of a symbol string (one character per symbol)."""
    alphabet = alphabet if isinstance(alphabet, SymbolAlphabet) else SymbolAlphabet(tuple(alphabet))
    if not sequence:
        raise ValueError("cannot encode an empty sequence")
    if any(len(s) != 1 for s in alphabet.symbols):
        raise ValueError("string encoding needs single-character symbols")
    try:
        raw = np.frombuffer(sequence.encode("ascii"), dtype=np.uint8)
    except UnicodeEncodeError:
        pos = next(i for i, ch in enumerate(sequence) if ord(ch) > 127)
        raise UnknownSymbol(sequence[pos], pos) from None
    lookup = np.full(256, -1, dtype=np.int64)
    for k, s in enumerate(alphabet.symbols):
        lookup[ord(s)] = k
    idx = lookup[raw]
    bad = np.flatnonzero(idx < 0)
    if bad.size:
        raise UnknownSymbol(sequence[bad[0]], int(bad[0]))
    starts = np.concatenate(([0], np.flatnonzero(idx[1:] != idx[:-1]) + 1))
    counts = np.diff(np.append(starts, idx.size))
    return RunLengthSequence(alphabet, idx[starts], counts)


def decode(runs: RunLengthSequence) -> str:
    chars = np.array([ord(s) for s in runs.alphabet.symbols], dtype=np.uint8)
    return np.repeat(chars[runs.codes], runs.counts).tobytes().decode("ascii")


def parse_rle_text(text: str, alphabet=BINARY) -> RunLengthSequence:
    """Parse whitespace-separated ``sym^count`` tokens (a bare ``sym`` means count 1)."""
    pairs = []
    for tok in text.split():
        sym, _, n = tok.partition("^")
        count = int(n) if n else 1
        if count < 1:
            raise ValueError(f"run count must be >= 1 in token {tok!r}")
        pairs.append((sym, count))
    if not pairs:
        raise ValueError("no run-length tokens found")
    return RunLengthSequence.from_pairs(pairs, alphabet)


def _error_code(runs: RunLengthSequence) -> int:
    if not runs.alphabet.is_binary:
        raise NonBinaryAlphabet(f"expected the binary alphabet, got {runs.alphabet.symbols}")
    return runs.alphabet.index("1")


def error_probability(runs: RunLengthSequence) -> float:
    """Fraction of ``"1"`` symbols."""
    one = _error_code(runs)
    return float(runs.counts[runs.codes == one].sum()) / runs.total_length


@dataclass(frozen=True, eq=False)
class EfrdTable:
    """Error-free run distribution, ``values[m] = Pr(0^m | 1)`` for m = 0..m_max.

    ``exceed[m]`` is the number of conditioning error positions followed by at
    least m zeros, so ``values = exceed / sample_count``.
    """

    values: np.ndarray
    exceed: np.ndarray
    sample_count: int

    @property
    def m_max(self) -> int:
        return len(self.values) - 1

    def pr(self, m: int) -> float:
        return float(self.values[m]) if 0 <= m < len(self.values) else 0.0

    def curve(self, m_max: int) -> np.ndarray:
        """Values for m = 0..m_max, zero-padded past the observed support."""
        out = np.zeros(m_max + 1)
        k = min(m_max + 1, len(self.values))
        out[:k] = self.values[:k]
        return out


def efrd(runs: RunLengthSequence) -> EfrdTable:
    """Pr(0^m | 1) under the per-error-position, cumulative convention.

    Every ``1`` that is not the final symbol conditions one event; its gap is
    the number of zeros immediately after it.  Inside a run of k ones the
    first k-1 have gap 0 and the last has the length of the following zero
    run.  Works on the runs directly, never expanding the sequence.
    """
    one = _error_code(runs)
    codes, counts = runs.codes, runs.counts
    is_one = codes == one
    ones_total = int(counts[is_one].sum())
    ends_in_one = bool(is_one[-1])
    denom = ones_total - (1 if ends_in_one else 0)
    if denom <= 0:
        raise NoConditioningEvents("no error symbol is followed by another symbol")
    # gaps of the last 1 in each non-final error run
    follow = np.flatnonzero(is_one[:-1])
    gaps = counts[follow + 1]
    zero_gaps = denom - gaps.size
    m_max = int(gaps.max()) if gaps.size else 0
    hist = np.bincount(gaps, minlength=m_max + 1)
    hist[0] += zero_gaps
    exceed = hist[::-1].cumsum()[::-1]
    return EfrdTable(exceed / denom, exceed, denom)


def efrd_max_deviation(a: EfrdTable, b: EfrdTable, m_max: int | None = None) -> float:
    """Largest |Pr_a(0^m|1) - Pr_b(0^m|1)| over m = 0..m_max."""
    if m_max is None:
        m_max = max(a.m_max, b.m_max)
    return float(np.max(np.abs(a.curve(m_max) - b.curve(m_max))))
