"""Likelihood and Baum-Welch estimation for block-diagonal models.

Because every within-symbol block of Lam is diagonal, a run of m identical
symbols contributes ``diag(lam)^(m-1)``: n(mu) scalar powers instead of a
matrix power, and the hidden state cannot change inside a run.  The
forward/backward recursions therefore step once per run, not once per
symbol.

A conventional per-symbol forward-backward on the expanded sequence is kept
alongside as a reference implementation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (AlphabetMismatch, NonMonotoneLikelihood, StarvedState,
                     ZeroProbabilitySequence)
from .markov import (BLOCK_DIAGONAL, PartitionedModel, emission_matrix,
                     stationary_distribution)
from .rle import RunLengthSequence, encode

log = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-8
STARVED_MASS = 1e-300


@dataclass
class Counters:
    """Work done by the run-length recursions, per invocation."""

    forward_passes: int = 0
    inter_block_products: int = 0
    diagonal_powers: int = 0
    backward_products: int = 0

    def as_dict(self) -> dict:
        return {
            "forward_passes": self.forward_passes,
            "inter_block_products": self.inter_block_products,
            "diagonal_powers": self.diagonal_powers,
            "backward_products": self.backward_products,
        }


@dataclass
class ForwardBackwardState:
    """Scaled recursion variables, one row per run.

    ``alphas[c]`` and ``betas[c]`` are length-N vectors that are exactly zero
    outside the states of run c's symbol.  Each ``alphas[c]`` sums to one and
    ``alphas[c] @ betas[c] == 1``.
    """

    alphas: np.ndarray
    log_scales: np.ndarray
    log_likelihood: float
    betas: np.ndarray | None = None
    # diag(lam)^(m-1) / exp(shift) per run, and the matching scale sums
    powers: np.ndarray | None = field(default=None, repr=False)
    sums: np.ndarray | None = field(default=None, repr=False)

    @property
    def scale_factors(self) -> np.ndarray:
        return np.exp(self.log_scales)


class _Blocks:
    """Per-symbol slices, log self-transition rates and inter-symbol blocks."""

    def __init__(self, model: PartitionedModel):
        if model.kind != BLOCK_DIAGONAL:
            raise ValueError("run-length recursions need a block-diagonal model")
        d = len(model.alphabet)
        self.slices = [model.partition.slice(k) for k in range(d)]
        self.groups = model.emission_map()
        with np.errstate(divide="ignore"):
            self.log_lam = np.log(np.diag(model.transition))
        self.off = [[model.block(g, h) for h in range(d)] for g in range(d)]


def _check_alphabet(model: PartitionedModel, runs: RunLengthSequence) -> None:
    if model.alphabet.symbols != runs.alphabet.symbols:
        raise AlphabetMismatch(f"model alphabet {model.alphabet.symbols} "
                               f"vs sequence alphabet {runs.alphabet.symbols}")


def _run_powers(blocks: _Blocks, runs: RunLengthSequence, counters: Counters):
    """``lam^(m-1)`` for every run, evaluated in log space.

    Returns a (C, N) array zero outside each run's symbol, with every row
    divided by its largest entry, and the log of that divisor.  Long runs
    therefore never underflow.
    """
    active = runs.codes[:, None] == blocks.groups[None, :]
    k = (runs.counts - 1).astype(float)[:, None]
    with np.errstate(invalid="ignore"):
        lp = np.where(k > 0, k * blocks.log_lam[None, :], 0.0)
    lp = np.where(active, lp, -np.inf)
    shift = lp.max(axis=1)
    if np.any(np.isneginf(shift)):
        c = int(np.flatnonzero(np.isneginf(shift))[0])
        raise ZeroProbabilitySequence(f"run {c + 1} of length {runs.counts[c]} is impossible")
    counters.diagonal_powers += len(runs.codes)
    return np.exp(lp - shift[:, None]), shift


def forward(model: PartitionedModel, runs: RunLengthSequence, initial=None,
            counters: Counters | None = None) -> ForwardBackwardState:
    """Scaled run-length forward recursion.

    ``initial`` is the distribution of the first state (defaults to the
    model's stationary vector).  The log-likelihood is the sum of the log
    scale factors.
    """
    _check_alphabet(model, runs)
    counters = counters if counters is not None else Counters()
    blocks = _Blocks(model)
    init = np.asarray(model.stationary if initial is None else initial, dtype=float)
    powers, shifts = _run_powers(blocks, runs, counters)
    codes = runs.codes.tolist()
    C = len(codes)
    alphas = np.zeros((C, model.n_states))
    sums = np.empty(C)
    sl = [blocks.slices[g] for g in codes]
    pw = [powers[c, sl[c]] for c in range(C)]

    a = init[sl[0]] * pw[0]
    for c in range(C):
        if c:
            a = (a @ blocks.off[codes[c - 1]][codes[c]]) * pw[c]
            counters.inter_block_products += 1
        s = a.sum()
        if not s > 0:
            raise ZeroProbabilitySequence(f"sequence has zero probability at run {c + 1}")
        a = a / s
        alphas[c, sl[c]] = a
        sums[c] = s
    counters.forward_passes += 1
    log_scales = np.log(sums) + shifts
    return ForwardBackwardState(alphas, log_scales, float(log_scales.sum()),
                                powers=powers, sums=sums)


def backward(model: PartitionedModel, runs: RunLengthSequence, state: ForwardBackwardState,
             counters: Counters | None = None) -> np.ndarray:
    """Scaled backward vectors sharing the forward scale factors.

    ``beta_c = Lam[mu_c, mu_c+1] @ (lam_{mu_c+1}^(m-1) * beta_{c+1}) / s_{c+1}``
    with ``beta_C = 1`` on the last run's states.
    """
    counters = counters if counters is not None else Counters()
    blocks = _Blocks(model)
    codes = runs.codes.tolist()
    C = len(codes)
    betas = np.zeros((C, model.n_states))
    sl = [blocks.slices[g] for g in codes]
    b = np.ones(model.partition.counts[codes[-1]])
    betas[-1, sl[-1]] = b
    for c in range(C - 2, -1, -1):
        b = blocks.off[codes[c]][codes[c + 1]] @ (state.powers[c + 1, sl[c + 1]] * b) / state.sums[c + 1]
        betas[c, sl[c]] = b
        counters.backward_products += 1
    state.betas = betas
    return betas


@dataclass
class EStepResult:
    """Posterior statistics of one E-step.

    ``gammas[c]`` is the state posterior during run c (the state cannot
    change inside a run).  ``self_transitions[i]`` and
    ``boundary_transitions[i, j]`` are expected transition counts over the
    whole sequence.  Per-boundary pair posteriors are available through
    :meth:`Gamma` / :attr:`Gammas`.
    """

    gammas: np.ndarray
    self_transitions: np.ndarray
    boundary_transitions: np.ndarray
    first_gamma: np.ndarray
    log_likelihood: float
    transition: np.ndarray = field(repr=False)
    alphas: np.ndarray = field(repr=False)
    # powers[c+1] * betas[c+1] / sums[c+1], the right factor of Gamma_c
    ahead: np.ndarray = field(repr=False)

    def Gamma(self, c: int) -> np.ndarray:
        """Posterior of (last state of run c, first state of run c+1), N x N."""
        return self.alphas[c][:, None] * self.transition * self.ahead[c][None, :]

    @property
    def Gammas(self) -> np.ndarray:
        return self.alphas[:-1, :, None] * self.transition[None] * self.ahead[:, None, :]


def estep(model: PartitionedModel, runs: RunLengthSequence, initial=None,
          counters: Counters | None = None) -> EStepResult:
    counters = counters if counters is not None else Counters()
    state = forward(model, runs, initial, counters)
    backward(model, runs, state, counters)
    alphas, betas = state.alphas, state.betas
    gammas = alphas * betas
    self_t = (runs.counts - 1).astype(float) @ gammas
    ahead = state.powers[1:] * betas[1:] / state.sums[1:, None]
    boundary = (alphas[:-1].T @ ahead) * model.transition
    # alphas[c] and ahead[c] vanish outside symbols mu_c and mu_{c+1}, so only
    # inter-symbol blocks of boundary can be nonzero
    return EStepResult(gammas, self_t, boundary, gammas[0].copy(), state.log_likelihood,
                       model.transition, alphas, ahead)


def mstep(stats: EStepResult, model: PartitionedModel, stationary_pi: bool = False):
    """Re-estimate Lam from expected counts.

    Returns ``(model, initial)``: the re-estimated block-diagonal model (its
    ``stationary`` field is the stationary vector of the new Lam) and the
    re-estimated initial-state distribution, which is the first-run posterior
    unless ``stationary_pi`` is set.
    """
    self_t = stats.self_transitions
    boundary = stats.boundary_transitions
    out = self_t + boundary.sum(axis=1)
    starved = np.flatnonzero(out < STARVED_MASS)
    if starved.size:
        i = int(starved[0])
        raise StarvedState(i, float(out[i]))
    L = boundary / out[:, None]
    L[np.diag_indices_from(L)] = self_t / out
    L /= L.sum(axis=1, keepdims=True)
    pi_stat = stationary_distribution(L, require_regular=False)
    new = PartitionedModel(model.alphabet, model.partition, L, pi_stat, BLOCK_DIAGONAL)
    initial = pi_stat.copy() if stationary_pi else stats.first_gamma.copy()
    return new, initial


@dataclass
class FitReport:
    initial_model: PartitionedModel
    final_model: PartitionedModel
    final_initial: np.ndarray
    loglik_trace: list
    iterations: int
    converged: bool
    stop_reason: str
    counters: Counters
    stationary_pi: bool = False

    @property
    def log_likelihood(self) -> float:
        return self.loglik_trace[-1]


def _structurally_positive(model: PartitionedModel) -> bool:
    f = model.emission_map()
    allowed = (f[:, None] != f[None, :]) | np.eye(len(f), dtype=bool)
    return bool(np.all(model.transition[allowed] > 0))


def _converged(prev: float, cur: float, tol: float) -> bool:
    delta = abs(cur - prev)
    if cur == 0.0:
        return delta < 1e-9
    return delta / abs(cur) < tol


def fit(initial: PartitionedModel, runs: RunLengthSequence, tol: float = 1e-6,
        max_iter: int = 500, stationary_pi: bool = False, initial_distribution=None,
        require_positive: bool = True) -> FitReport:
    """Modified Baum-Welch: iterate E- and M-steps until the relative
    log-likelihood change drops below ``tol`` or ``max_iter`` M-steps ran.

    The EM guarantee is checked on every iteration; a decrease beyond the
    relative slack raises :class:`NonMonotoneLikelihood`.  With
    ``stationary_pi`` the initial distribution is tied to Lam, which is not
    an EM update, so the check is skipped in that mode.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if initial.kind != BLOCK_DIAGONAL:
        raise ValueError("fit needs a block-diagonal initial model")
    if require_positive and not _structurally_positive(initial):
        raise ValueError("initial model has zero entries where transitions are allowed; "
                         "EM can never move them")
    counters = Counters()
    model = initial
    init = np.asarray(initial.stationary if initial_distribution is None else initial_distribution,
                      dtype=float)
    trace = []
    iterations = 0
    stop_reason = "max_iter"
    while True:
        stats = estep(model, runs, init, counters)
        trace.append(stats.log_likelihood)
        if len(trace) > 1:
            prev, cur = trace[-2], trace[-1]
            if not stationary_pi and cur < prev - MONOTONE_SLACK * abs(prev):
                raise NonMonotoneLikelihood(trace)
            if _converged(prev, cur, tol):
                stop_reason = "tolerance"
                break
        if iterations >= max_iter:
            break
        model, init = mstep(stats, model, stationary_pi)
        iterations += 1
        log.debug("iteration %d: log-likelihood %.10g", iterations, trace[-1])
    return FitReport(initial, model, init, trace, iterations, stop_reason == "tolerance",
                     stop_reason, counters, stationary_pi)


# -- conventional per-symbol reference -----------------------------------------

@dataclass
class ConventionalResult:
    log_likelihood: float
    posteriors: np.ndarray
    expected_transitions: np.ndarray
    first_posterior: np.ndarray


def _symbol_codes(model: PartitionedModel, sequence) -> np.ndarray:
    if isinstance(sequence, str):
        runs = encode(sequence, model.alphabet)
        return np.repeat(runs.codes, runs.counts)
    if isinstance(sequence, RunLengthSequence):
        _check_alphabet(model, sequence)
        return np.repeat(sequence.codes, sequence.counts)
    return np.asarray(sequence, dtype=np.int64)


def conventional_forward_backward(model: PartitionedModel, sequence, initial=None,
                                  posteriors: bool = True) -> ConventionalResult:
    """Per-symbol scaled forward-backward on the expanded sequence, O(T N^2).

    Works for any partitioned model, block-diagonal or not.
    """
    x = _symbol_codes(model, sequence)
    A = model.transition
    B = emission_matrix(model.partition)
    masked = [A * B[k][None, :] for k in range(B.shape[0])]
    init = np.asarray(model.stationary if initial is None else initial, dtype=float)
    T = len(x)
    N = A.shape[0]
    alpha = np.empty((T, N))
    scale = np.empty(T)
    a = init * B[x[0]]
    xs = x.tolist()
    for t in range(T):
        if t:
            a = alpha[t - 1] @ masked[xs[t]]
        s = a.sum()
        if not s > 0:
            raise ZeroProbabilitySequence(f"sequence has zero probability at symbol {t + 1}")
        alpha[t] = a / s
        scale[t] = s
    loglik = float(np.log(scale).sum())
    if not posteriors:
        return ConventionalResult(loglik, alpha, np.zeros((N, N)), np.zeros(N))
    beta = np.empty((T, N))
    beta[-1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = masked[xs[t + 1]] @ beta[t + 1] / scale[t + 1]
    gamma = alpha * beta
    nxt = B[x[1:]] * beta[1:] / scale[1:, None]
    xi = (alpha[:-1].T @ nxt) * A
    return ConventionalResult(loglik, gamma, xi, gamma[0].copy())


def conventional_baum_welch_step(model: PartitionedModel, sequence, initial=None,
                                 constrain: bool = True):
    """One per-symbol Baum-Welch update.

    Returns ``(transition, initial, log_likelihood)``, the likelihood being
    that of the input parameters.  With ``constrain`` the within-symbol
    off-diagonal entries are forced to zero before row normalisation.
    """
    res = conventional_forward_backward(model, sequence, initial)
    xi = res.expected_transitions.copy()
    if constrain:
        f = model.emission_map()
        within = (f[:, None] == f[None, :]) & ~np.eye(len(f), dtype=bool)
        xi[within] = 0.0
    A = xi / xi.sum(axis=1, keepdims=True)
    return A, res.first_posterior, res.log_likelihood


def conventional_fit_trace(model: PartitionedModel, sequence, n_iter: int, initial=None):
    """Log-likelihood trace of ``n_iter`` constrained per-symbol Baum-Welch updates.

    The trace has ``n_iter + 1`` entries, matching the layout of
    :attr:`FitReport.loglik_trace`.
    """
    x = _symbol_codes(model, sequence)
    A = np.array(model.transition)
    init = np.asarray(model.stationary if initial is None else initial, dtype=float)
    trace = []
    current = model
    for _ in range(n_iter):
        A, init, ll = conventional_baum_welch_step(current, x, init)
        trace.append(ll)
        current = PartitionedModel(model.alphabet, model.partition, A, None, model.kind)
    trace.append(conventional_forward_backward(current, x, init, posteriors=False).log_likelihood)
    return trace, current, init


def log_likelihood(model: PartitionedModel, runs: RunLengthSequence, initial=None) -> float:
    return forward(model, runs, initial).log_likelihood

