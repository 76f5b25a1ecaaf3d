"""Block-diagonal equivalent of a general partitioned model.

For every symbol the within-symbol block ``A_ss`` is diagonalised,
``A_ss = E diag(lam) E^-1``.  With ``V = E^-1`` and ``C = diag(V @ 1)`` the
row-normalised ``W_ss = C^-1 V`` satisfies ``W 1 = 1`` and ``W A_ss W^-1`` is
diagonal.  Stacking the ``W_ss`` block-diagonally gives ``Lam = W A W^-1``
and ``pi = p W^-1``, a model that assigns every symbol string the same
probability as ``A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .errors import (AlphabetMismatch, ComplexEigenvalues, ConditionViolation,
                     DimensionMismatch, NonStochastic, NonStochasticResult,
                     NumericalFailure)
from .markov import (BLOCK_DIAGONAL, ROW_SUM_TOL, PartitionedModel, emission_matrix,
                     validate_model)

CONDITION_IDS = ("i", "ii", "iii", "iv", "v")

IMAG_TOL = 1e-10
CLAMP_TOL = 1e-10
POST_TOL = 1e-10
EIG_GAP_TOL = 1e-8
MAX_COND = 1e12


@dataclass
class ConditionEntry:
    cond_id: str
    passed: bool
    margin: float
    symbol: str | None = None
    indices: tuple | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.cond_id,
            "passed": self.passed,
            "margin": self.margin if np.isfinite(self.margin) else None,
            "symbol": self.symbol,
            "indices": list(self.indices) if self.indices is not None else None,
            "detail": self.detail,
        }


@dataclass
class ConditionReport:
    entries: list

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def __getitem__(self, cond_id: str) -> ConditionEntry:
        for e in self.entries:
            if e.cond_id == cond_id:
                return e
        raise KeyError(cond_id)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "conditions": [e.to_dict() for e in self.entries]}


@dataclass
class TransformW:
    blocks: list
    eigenvalues: list
    condition_numbers: list = field(default_factory=list)

    @property
    def matrix(self) -> np.ndarray:
        return block_diag(*self.blocks)

    @property
    def inverse(self) -> np.ndarray:
        return block_diag(*[np.linalg.inv(b) for b in self.blocks])


@dataclass
class _BlockEigen:
    eigenvalues: np.ndarray
    max_imag: float
    W: np.ndarray | None
    row_sums: np.ndarray | None
    cond_W: float


def _block_eigen(A: np.ndarray) -> _BlockEigen:
    """Eigen-structure of one within-symbol block.

    Eigenvalue k (in descending order) is assigned to the state with the k-th
    largest self-transition, so an already-diagonal block maps to itself.
    """
    try:
        lam, E = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    max_imag = float(np.max(np.abs(lam.imag))) if lam.size else 0.0
    if max_imag > IMAG_TOL:
        return _BlockEigen(lam, max_imag, None, None, np.inf)
    lam, E = lam.real, E.real
    eig_order = np.argsort(-lam, kind="stable")
    state_order = np.argsort(-np.diag(A), kind="stable")
    perm = np.empty_like(eig_order)
    perm[state_order] = eig_order
    lam, E = lam[perm], E[:, perm]
    if np.linalg.cond(E) > MAX_COND:
        return _BlockEigen(lam, max_imag, None, None, np.inf)
    V = np.linalg.inv(E)
    sums = V.sum(axis=1)
    rel = np.abs(sums) / np.abs(V).sum(axis=1)
    if np.any(rel < 1.0 / MAX_COND):
        return _BlockEigen(lam, max_imag, None, rel, np.inf)
    W = V / sums[:, None]
    return _BlockEigen(lam, max_imag, W, rel, float(np.linalg.cond(W)))


def _transform_blocks(model: PartitionedModel):
    out = []
    for k in range(len(model.alphabet)):
        out.append(_block_eigen(model.block(k, k)))
    return out


def _raw_lambda(model: PartitionedModel, eig) -> tuple:
    W = block_diag(*[e.W for e in eig])
    W_inv = block_diag(*[np.linalg.inv(e.W) for e in eig])
    return W @ model.transition @ W_inv, W, W_inv


def _offdiag_min(model: PartitionedModel, L: np.ndarray):
    """Smallest entry of Lam outside the within-symbol blocks, with its location."""
    f = model.emission_map()
    mask = f[:, None] != f[None, :]
    if not mask.any():
        return np.inf, None
    vals = np.where(mask, L, np.inf)
    r, c = np.unravel_index(np.argmin(vals), vals.shape)
    return float(vals[r, c]), (int(r), int(c))


def check_conditions(model: PartitionedModel) -> ConditionReport:
    """Evaluate admissibility conditions i-v on every within-symbol block.

    i    diagonal dominance of each row of ``A_ss``
    ii   the pairwise row inequality, plus an eigenvalue-gap check
    iii  non-singular normaliser ``C_ss`` (and a well-conditioned ``W_ss``)
    iv   entrywise non-negativity of the constructed off-symbol blocks of Lam
    v    non-singular ``A_ss``

    Margins are the minimal slack of each inequality; a negative margin
    means the condition fails.
    """
    problems = [v for v in validate_model(model) if v.kind != "stationary"]
    if problems:
        raise NonStochastic("; ".join(v.message for v in problems))
    syms = model.alphabet.symbols
    eig = _transform_blocks(model)

    def worst(items):
        # items: (margin, symbol, indices, detail); returns the tightest one
        return min(items, key=lambda t: t[0]) if items else (np.inf, None, None, "")

    cond_i, cond_ii, cond_iii, cond_v = [], [], [], []
    for k, sym in enumerate(syms):
        A = model.block(k, k)
        n = A.shape[0]
        for j in range(n):
            slack = A[j, j] - (A[j].sum() - A[j, j])
            cond_i.append((slack, sym, (j + 1,), f"row {j + 1}: {A[j, j]:.6g} vs off-diagonal sum {A[j].sum() - A[j, j]:.6g}"))
        for s in range(n):
            for r in range(n):
                if A[s, s] > A[r, r]:
                    slack = (A[s, s] - (A[s].sum() - A[s, s])) - A[r].sum()
                    cond_ii.append((slack, sym, (r + 1, s + 1), f"rows r={r + 1}, s={s + 1}"))
        e = eig[k]
        if n > 1 and e.max_imag <= IMAG_TOL:
            lam = np.sort(e.eigenvalues.real)
            gap = float(np.min(np.diff(lam)))
            cond_ii.append((gap - EIG_GAP_TOL, sym, None, f"eigenvalue gap {gap:.3g}"))
        if e.max_imag > IMAG_TOL:
            cond_iii.append((-1.0, sym, None, f"complex eigenvalues (|Im| = {e.max_imag:.3g})"))
        elif e.row_sums is None:
            cond_iii.append((-1.0, sym, None, "eigenvector matrix is singular"))
        else:
            slack = float(np.min(e.row_sums)) - 1.0 / MAX_COND
            idx = int(np.argmin(e.row_sums)) + 1
            detail = f"smallest relative normaliser {np.min(e.row_sums):.3g} (row {idx})"
            if e.W is not None and e.cond_W > MAX_COND:
                slack = min(slack, -1.0)
                detail += f"; cond(W) = {e.cond_W:.3g}"
            cond_iii.append((slack, sym, (idx,), detail))
        sv = np.linalg.svd(A, compute_uv=False)
        smin = float(sv[-1])
        cond = float(sv[0] / smin) if smin > 0 else np.inf
        cond_v.append((smin if cond <= MAX_COND else -1.0, sym, None, f"smallest singular value {smin:.3g}, cond {cond:.3g}"))

    entries = []
    for cid, items in (("i", cond_i), ("ii", cond_ii), ("iii", cond_iii)):
        m, sym, idx, detail = worst(items)
        entries.append(ConditionEntry(cid, bool(m >= 0), float(m), sym if m < 0 else None,
                                      idx if m < 0 else None, detail))

    if all(e.W is not None for e in eig):
        L, _, _ = _raw_lambda(model, eig)
        m, loc = _offdiag_min(model, L)
        f = model.emission_map()
        ok = m >= -CLAMP_TOL
        sym = None
        idx = None
        if loc is not None and not ok:
            sym = f"{syms[f[loc[0]]]}->{syms[f[loc[1]]]}"
            idx = (loc[0] + 1, loc[1] + 1)
        entries.append(ConditionEntry("iv", bool(ok), m if np.isfinite(m) else 0.0, sym, idx,
                                      "minimum entry of constructed off-symbol blocks"))
    else:
        entries.append(ConditionEntry("iv", False, -1.0, None, None,
                                      "not evaluated: transform W could not be built"))

    m, sym, idx, detail = worst(cond_v)
    entries.append(ConditionEntry("v", bool(m >= 0), float(m), sym if m < 0 else None, None, detail))
    return ConditionReport(entries)


def construct_equivalent(model: PartitionedModel, check: bool = True):
    """Return ``(Lam, W)``: the block-diagonal equivalent model and its transform.

    With ``check=False`` the admissibility conditions are not enforced, but
    every numerical postcondition on Lam still is.
    """
    report = check_conditions(model)
    eig = _transform_blocks(model)
    for k, e in enumerate(eig):
        if e.max_imag > IMAG_TOL:
            raise ComplexEigenvalues(
                f"block {model.alphabet.symbols[k]} has eigenvalues with |Im| = {e.max_imag:.3g}")
    if check and not report.passed:
        raise ConditionViolation(report)
    if any(e.W is None for e in eig):
        raise ConditionViolation(report)

    L, W, W_inv = _raw_lambda(model, eig)
    if L.min() < -CLAMP_TOL:
        r, c = np.unravel_index(np.argmin(L), L.shape)
        raise NonStochasticResult(f"Lam({r + 1},{c + 1}) = {L[r, c]:.3g} is negative")
    L = np.where(L < 0, 0.0, L)
    f = model.emission_map()
    within = (f[:, None] == f[None, :]) & ~np.eye(len(f), dtype=bool)
    if np.any(np.abs(L[within]) > POST_TOL):
        raise NonStochasticResult("within-symbol blocks of Lam are not diagonal")
    L[within] = 0.0
    sums = L.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > POST_TOL):
        raise NonStochasticResult(f"Lam row sums deviate by {np.max(np.abs(sums - 1)):.3g}")
    # only rows moved by clamping or round-off are rescaled, so exact input stays exact
    off = np.abs(sums - 1.0) > ROW_SUM_TOL
    L[off] /= sums[off, None]
    if np.any(np.abs(W.sum(axis=1) - 1.0) > POST_TOL):
        raise NonStochasticResult("rows of W do not sum to one")

    pi = model.stationary @ W_inv
    if pi.min() < -CLAMP_TOL:
        raise NonStochasticResult(f"transported stationary vector has entry {pi.min():.3g}")
    pi = np.where(pi < 0, 0.0, pi)
    if abs(pi.sum() - 1.0) > ROW_SUM_TOL:
        pi = pi / pi.sum()
    if np.max(np.abs(pi @ L - pi)) > POST_TOL:
        raise NonStochasticResult("transported stationary vector is not a fixed point of Lam")

    lam_model = PartitionedModel(model.alphabet, model.partition, L, pi, BLOCK_DIAGONAL)
    problems = validate_model(lam_model)
    if problems:
        raise NonStochasticResult("; ".join(v.message for v in problems))
    transform = TransformW([e.W for e in eig], [e.eigenvalues for e in eig],
                           [e.cond_W for e in eig])
    return lam_model, transform


def _sequence_probabilities(model: PartitionedModel, length: int) -> np.ndarray:
    """P(E | model) for every sequence of exactly ``length`` symbols.

    Rows are in lexicographic order of symbol indices, computed breadth-first
    so each prefix's forward vector is shared by its extensions.
    """
    B = emission_matrix(model.partition)
    T = model.transition
    alpha = model.stationary[None, :] * B
    for _ in range(length - 1):
        nxt = alpha @ T
        alpha = (nxt[:, None, :] * B[None, :, :]).reshape(-1, T.shape[0])
    return alpha.sum(axis=1)


def verify_equivalence(a: PartitionedModel, b: PartitionedModel, max_len: int = 8) -> float:
    """Largest relative likelihood gap between two models over all sequences up to ``max_len``."""
    if a.alphabet.symbols != b.alphabet.symbols:
        raise AlphabetMismatch(f"{a.alphabet.symbols} vs {b.alphabet.symbols}")
    d = len(a.alphabet)
    if max_len < 1 or max_len > 12 or d ** max_len > 2 ** 24:
        raise DimensionMismatch(f"max_len={max_len} out of range for a {d}-symbol alphabet")
    for m in (a, b):
        if m.stationary is None:
            raise NonStochastic("model has no stationary vector")
    worst = 0.0
    for L in range(1, max_len + 1):
        pa = _sequence_probabilities(a, L)
        pb = _sequence_probabilities(b, L)
        rel = np.abs(pa - pb) / np.maximum(pa, 1e-300)
        worst = max(worst, float(rel.max()))
    return worst

