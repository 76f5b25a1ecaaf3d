"""Partitioned Markov models: structure, validation, stationary vectors, sampling.

A partitioned model groups its N states by the symbol they emit.  States
``0 .. n(s1)-1`` emit the first alphabet symbol, the next ``n(s2)`` states
emit the second, and so on, so the transition matrix has a natural
``d x d`` block layout.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, NonStochastic, NotRegular

GENERAL = "general"
BLOCK_DIAGONAL = "block-diagonal"
KINDS = (GENERAL, BLOCK_DIAGONAL)

# input hygiene vs. accumulated round-off
ROW_SUM_TOL = 1e-12
ARITH_ROW_SUM_TOL = 1e-9
STATIONARY_TOL = 1e-10

RNG_ALGORITHM = "numpy.PCG64"


@dataclass(frozen=True)
class SymbolAlphabet:
    symbols: tuple

    def __post_init__(self):
        syms = tuple(str(s) for s in self.symbols)
        object.__setattr__(self, "symbols", syms)
        if not syms:
            # d = 1 is accepted for the degenerate single-state channel
            raise ValueError("alphabet needs at least one symbol")
        if len(set(syms)) != len(syms):
            raise ValueError(f"duplicate symbols in alphabet {syms}")

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def index(self, symbol: str) -> int:
        return self.symbols.index(symbol)

    @property
    def is_binary(self) -> bool:
        return set(self.symbols) == {"0", "1"}


BINARY = SymbolAlphabet(("0", "1"))


@dataclass(frozen=True)
class StatePartition:
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if not counts or any(c < 1 for c in counts):
            raise ValueError(f"every symbol needs at least one state, got {counts}")

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def offsets(self) -> tuple:
        out = [0]
        for c in self.counts:
            out.append(out[-1] + c)
        return tuple(out)

    def slice(self, k: int) -> slice:
        off = self.offsets
        return slice(off[k], off[k + 1])

    def emission_map(self) -> np.ndarray:
        """Symbol index emitted by each state."""
        return np.repeat(np.arange(len(self.counts)), self.counts)


def emission_matrix(partition: StatePartition) -> np.ndarray:
    """The d x N 0/1 output matrix B: ``B[k, i] = 1`` iff state i emits symbol k."""
    f = partition.emission_map()
    B = np.zeros((len(partition.counts), partition.total))
    B[f, np.arange(partition.total)] = 1.0
    return B


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    row: Optional[int] = None
    col: Optional[int] = None
    block: Optional[tuple] = None


@dataclass(frozen=True, eq=False)
class PartitionedModel:
    """Transition matrix with states grouped by emitted symbol.

    Instances are immutable; the arrays are stored read-only.  Use
    :meth:`build` to get a validated model with its stationary vector
    filled in.  The raw constructor performs no checks so that
    :func:`validate_model` can inspect malformed input.
    """

    alphabet: SymbolAlphabet
    partition: StatePartition
    transition: np.ndarray
    stationary: Optional[np.ndarray] = None
    kind: str = GENERAL
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.alphabet, SymbolAlphabet):
            object.__setattr__(self, "alphabet", SymbolAlphabet(tuple(self.alphabet)))
        if not isinstance(self.partition, StatePartition):
            object.__setattr__(self, "partition", StatePartition(tuple(self.partition)))
        T = np.array(self.transition, dtype=float)
        T.setflags(write=False)
        object.__setattr__(self, "transition", T)
        if self.stationary is not None:
            p = np.array(self.stationary, dtype=float)
            p.setflags(write=False)
            object.__setattr__(self, "stationary", p)
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")

    @classmethod
    def build(cls, alphabet, partition, transition, stationary=None, kind=None,
              metadata=None) -> "PartitionedModel":
        """Validated constructor; computes the stationary vector when absent."""
        T = np.asarray(transition, dtype=float)
        probe = cls(alphabet, partition, T, None, GENERAL)
        _check_dimensions(probe)
        if kind is None:
            kind = BLOCK_DIAGONAL if _within_blocks_diagonal(probe) else GENERAL
        if stationary is None:
            stationary = stationary_distribution(T, require_regular=False)
        model = cls(probe.alphabet, probe.partition, T, stationary, kind, dict(metadata or {}))
        problems = validate_model(model)
        if problems:
            raise NonStochastic("; ".join(v.message for v in problems))
        return model

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def is_block_diagonal(self) -> bool:
        return self.kind == BLOCK_DIAGONAL

    def block(self, i: int, j: int) -> np.ndarray:
        return self.transition[self.partition.slice(i), self.partition.slice(j)]

    def emission_map(self) -> np.ndarray:
        return self.partition.emission_map()

    def symbol_probabilities(self) -> np.ndarray:
        """Long-run probability of each symbol under the stationary vector."""
        return emission_matrix(self.partition) @ self.stationary

    def with_transition(self, transition, stationary=None, kind=None) -> "PartitionedModel":
        return PartitionedModel.build(self.alphabet, self.partition, transition,
                                      stationary=stationary, kind=kind or self.kind)


def _check_dimensions(model: PartitionedModel) -> None:
    T = model.transition
    N = model.partition.total
    if len(model.partition.counts) != len(model.alphabet):
        raise DimensionMismatch(
            f"partition has {len(model.partition.counts)} groups, "
            f"alphabet has {len(model.alphabet)} symbols")
    if T.ndim != 2 or T.shape != (N, N):
        raise DimensionMismatch(f"transition shape {T.shape} does not match N={N}")
    if model.stationary is not None and model.stationary.shape != (N,):
        raise DimensionMismatch(f"stationary shape {model.stationary.shape} != ({N},)")


def _within_blocks_diagonal(model: PartitionedModel) -> bool:
    for k in range(len(model.alphabet)):
        B = model.block(k, k)
        if np.any(B[~np.eye(B.shape[0], dtype=bool)] != 0):
            return False
    return True


def validate_model(model: PartitionedModel) -> list:
    """Return every structural violation of ``model`` (empty list when valid).

    Raises :class:`DimensionMismatch` if the matrix shape disagrees with the
    partition.  The stationary check is skipped when the transition matrix
    itself is not stochastic, since the fixed point is then undefined.
    """
    _check_dimensions(model)
    T = model.transition
    out = []
    rows, cols = np.nonzero(T < 0)
    for r, c in zip(rows, cols):
        out.append(Violation("negative-entry", f"entry ({r + 1},{c + 1}) = {T[r, c]!r} < 0",
                             row=int(r), col=int(c)))
    sums = T.sum(axis=1)
    for r in np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL):
        out.append(Violation("row-sum", f"row {r + 1} sums to {sums[r]!r}", row=int(r)))
    if model.kind == BLOCK_DIAGONAL:
        for k in range(len(model.alphabet)):
            B = model.block(k, k)
            off = ~np.eye(B.shape[0], dtype=bool)
            for r, c in zip(*np.nonzero(off & (B != 0))):
                sym = model.alphabet.symbols[k]
                out.append(Violation(
                    "block-offdiagonal",
                    f"block ({sym},{sym}) entry ({r + 1},{c + 1}) = {B[r, c]!r} is not zero",
                    row=int(r), col=int(c), block=(k, k)))
    if model.stationary is not None and not out:
        p = model.stationary
        if np.any(p < 0):
            out.append(Violation("stationary", "stationary vector has negative entries"))
        if abs(p.sum() - 1.0) > STATIONARY_TOL:
            out.append(Violation("stationary", f"stationary vector sums to {p.sum()!r}"))
        resid = np.max(np.abs(p @ T - p))
        if resid > STATIONARY_TOL:
            out.append(Violation("stationary", f"stationary residual {resid:.3g} exceeds {STATIONARY_TOL}"))
    return out


def is_regular(transition) -> bool:
    """True when some power T^k, k <= N^2, is entrywise positive."""
    T = np.asarray(transition) > 0
    N = T.shape[0]
    P = T.copy()
    for _ in range(N * N):
        if P.all():
            return True
        P = (P.astype(np.int64) @ T.astype(np.int64)) > 0
    return bool(P.all())


def stationary_distribution(transition, require_regular: bool = True) -> np.ndarray:
    """Stationary row vector of a row-stochastic matrix.

    Solves ``v (I - T) = 0`` together with ``sum(v) = 1`` as an overdetermined
    linear system.  With ``require_regular=False`` only uniqueness of the
    solution (an irreducible chain) is required, which admits periodic chains.
    """
    T = np.asarray(transition, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise DimensionMismatch(f"transition must be square, got {T.shape}")
    N = T.shape[0]
    if np.any(T < 0) or np.any(np.abs(T.sum(axis=1) - 1.0) > ARITH_ROW_SUM_TOL):
        raise NonStochastic("matrix is not row-stochastic")
    if require_regular and not is_regular(T):
        raise NotRegular(f"no power up to {N * N} of the matrix is entrywise positive")
    M = np.vstack([(np.eye(N) - T).T, np.ones((1, N))])
    rhs = np.zeros(N + 1)
    rhs[-1] = 1.0
    v, _, rank, _ = np.linalg.lstsq(M, rhs, rcond=None)
    if rank < N:
        raise NotRegular("stationary distribution is not unique (reducible chain)")
    v = np.clip(v, 0.0, None)
    return v / v.sum()


def simulate(model: PartitionedModel, length: int, seed: int) -> str:
    """Sample an output symbol string of ``length`` symbols.

    The initial state is drawn from ``model.stationary``; the generator is
    numpy's PCG64 seeded with ``seed``, so the result is a pure function of
    ``(model, length, seed)``.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    problems = validate_model(model)
    if problems:
        raise NonStochastic("; ".join(v.message for v in problems))
    p0 = model.stationary
    if p0 is None:
        p0 = stationary_distribution(model.transition, require_regular=False)
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random(length).tolist()

    def cumulative(row):
        c = np.cumsum(row)
        return (c / c[-1]).tolist()

    cum = [cumulative(row) for row in model.transition]
    syms = [model.alphabet.symbols[k] for k in model.emission_map()]
    state = bisect_right(cumulative(p0), u[0])
    out = [syms[state]]
    for x in u[1:]:
        state = bisect_right(cum[state], x)
        out.append(syms[state])
    return "".join(out)
