import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockmarkov import (AlphabetMismatch, ComplexEigenvalues, ConditionViolation,
                         DimensionMismatch, PartitionedModel, check_conditions,
                         construct_equivalent, verify_equivalence)
from blockmarkov.equivalence import CONDITION_IDS
from blockmarkov.inference import conventional_forward_backward
from blockmarkov.rle import encode
from oracles import (eig2x2, path_likelihood, random_admissible_model,
                     random_block_diagonal_model)


def model3(A00, A01, A10, A11):
    T = np.block([[np.asarray(A00), np.asarray(A01).reshape(2, 1)],
                  [np.asarray(A10).reshape(1, 2), np.asarray(A11).reshape(1, 1)]])
    return PartitionedModel.build(("0", "1"), (2, 1), T, kind="general")


# -- condition report ---------------------------------------------------------

def test_report_shape(diag_model):
    r = check_conditions(diag_model)
    assert [e.cond_id for e in r.entries] == list(CONDITION_IDS)
    assert r.passed
    d = r.to_dict()
    assert d["passed"] is True and len(d["conditions"]) == 5


def test_condition_i_margin():
    # the error block's own slack (0.9) does not tighten the minimum
    m = model3([[0.9, 0.05], [0.03, 0.92]], [0.05, 0.05], [0.05, 0.05], [0.9])
    e = check_conditions(m)["i"]
    assert e.passed
    assert e.margin == pytest.approx(min(0.85, 0.89), abs=1e-12)


def test_condition_i_failure_names_block_and_row():
    m = model3([[0.4, 0.6], [0.6, 0.4]], [0.0, 0.0], [0.5, 0.4], [0.1])
    r = check_conditions(m)
    e = r["i"]
    assert not e.passed and not r.passed
    assert e.symbol == "0" and e.indices == (1,)
    assert e.margin == pytest.approx(-0.2)


def test_condition_ii_literal_inequality():
    # rows r=1, s=2: A(2,2)=0.95 > A(1,1)=0.93 needs 0.95 <= 0.95 - 0.01
    m = model3([[0.93, 0.02], [0.01, 0.95]], [0.05, 0.04], [0.45, 0.45], [0.10])
    e = check_conditions(m)["ii"]
    assert not e.passed
    assert e.margin == pytest.approx(-0.01, abs=1e-12)
    assert e.indices == (1, 2)


def test_condition_ii_repeated_eigenvalues():
    m = model3([[0.6, 0.0], [0.0, 0.6]], [0.4, 0.4], [0.5, 0.4], [0.1])
    r = check_conditions(m)
    assert not r["ii"].passed
    assert "gap" in r["ii"].detail


def test_condition_iii_singular_normaliser():
    # symmetric block: the left eigenvector (1, -1) has zero row sum
    m = model3([[0.5, 0.1], [0.1, 0.3]], [0.4, 0.6], [0.5, 0.4], [0.1])
    m2 = model3([[0.5, 0.1], [0.1, 0.5]], [0.4, 0.4], [0.5, 0.4], [0.1])
    assert check_conditions(m)["iii"].passed
    r = check_conditions(m2)
    assert not r["iii"].passed
    assert not r["iv"].passed  # W could not be built
    with pytest.raises(ConditionViolation):
        construct_equivalent(m2)


def test_condition_iv_negative_transformed_block():
    m = model3([[0.62, 0.19], [0.0, 0.41]], [0.19, 0.59], [0.5, 0.4], [0.1])
    r = check_conditions(m)
    assert [e.cond_id for e in r.entries if not e.passed] == ["iv"]
    assert r["iv"].margin < -0.05
    assert r["iv"].symbol == "1->0"
    with pytest.raises(ConditionViolation) as exc:
        construct_equivalent(m)
    assert not exc.value.report["iv"].passed


def test_condition_v_singular_block():
    m = model3([[0.4, 0.4], [0.2, 0.6]], [0.2, 0.2], [0.5, 0.4], [0.1])
    assert check_conditions(m)["v"].passed
    m = model3([[0.45, 0.45], [0.1, 0.1]], [0.1, 0.8], [0.5, 0.4], [0.1])
    r = check_conditions(m)
    assert not r["v"].passed


def test_complex_eigenvalues():
    T = np.zeros((4, 4))
    T[:3, :3] = [[0.3, 0.3, 0.0], [0.0, 0.3, 0.3], [0.3, 0.0, 0.3]]
    T[:3, 3] = 0.4
    T[3] = [0.3, 0.3, 0.3, 0.1]
    m = PartitionedModel.build(("0", "1"), (3, 1), T)
    with pytest.raises(ComplexEigenvalues):
        construct_equivalent(m)
    assert not check_conditions(m)["iii"].passed


# -- construction -------------------------------------------------------------

def test_diag_model_is_its_own_equivalent(diag_model):
    lam, W = construct_equivalent(diag_model)
    assert np.array_equal(lam.transition, diag_model.transition)
    assert np.array_equal(W.matrix, np.eye(3))
    assert lam.is_block_diagonal


def test_coupled_block_eigenvalues_closed_form(coupled_model):
    lam, W = construct_equivalent(coupled_model, check=False)
    expected = eig2x2([[0.93, 0.02], [0.01, 0.95]])
    assert expected == pytest.approx([0.94 - np.sqrt(0.0003), 0.94 + np.sqrt(0.0003)])
    assert np.diag(lam.block(0, 0)) == pytest.approx(expected, abs=1e-12)
    assert np.round(np.diag(lam.block(0, 0)), 2) == pytest.approx([0.92, 0.96])
    assert lam.block(0, 0)[0, 1] == 0.0 and lam.block(0, 0)[1, 0] == 0.0
    assert verify_equivalence(coupled_model, lam, 8) <= 1e-9


def test_coupled_block_equivalence_by_path_enumeration(coupled_model):
    lam, _ = construct_equivalent(coupled_model, check=False)
    groups = coupled_model.emission_map()
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(1, 9))
        codes = rng.integers(0, 2, n).tolist()
        pa = path_likelihood(coupled_model.transition, coupled_model.stationary, groups, codes)
        pl = path_likelihood(lam.transition, lam.stationary, groups, codes)
        assert abs(pa - pl) <= 1e-9 * pa


def test_check_flag_enforces_conditions(coupled_model):
    with pytest.raises(ConditionViolation) as exc:
        construct_equivalent(coupled_model)
    assert not exc.value.report["ii"].passed


def test_transform_rows_sum_to_one(coupled_model):
    _, W = construct_equivalent(coupled_model, check=False)
    assert np.allclose(W.matrix.sum(axis=1), 1.0, atol=1e-10)
    assert np.allclose(W.matrix @ W.inverse, np.eye(3), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 6))
def test_construction_properties(seed, n):
    A = random_admissible_model(np.random.default_rng(seed), n)
    lam, W = construct_equivalent(A)
    L = lam.transition
    f = A.emission_map()
    within = (f[:, None] == f[None, :]) & ~np.eye(n, dtype=bool)
    assert np.all(L[within] == 0.0)
    assert L.min() >= 0
    assert np.max(np.abs(L.sum(axis=1) - 1)) <= 1e-10
    assert np.max(np.abs(W.matrix.sum(axis=1) - 1)) <= 1e-10
    pi = lam.stationary
    assert np.max(np.abs(pi @ L - pi)) <= 1e-10 and abs(pi.sum() - 1) <= 1e-10
    ev_a = np.sort_complex(np.linalg.eigvals(A.transition))
    ev_l = np.sort_complex(np.linalg.eigvals(L))
    assert np.max(np.abs(ev_a - ev_l)) <= 1e-9
    assert verify_equivalence(A, lam, 6) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6))
def test_idempotent_on_block_diagonal(seed, n):
    m = random_block_diagonal_model(np.random.default_rng(seed), n_states=n)
    lam, W = construct_equivalent(m)
    assert np.max(np.abs(lam.transition - m.transition)) <= 1e-10
    assert np.array_equal(W.matrix, np.eye(n))
    again, _ = construct_equivalent(lam)
    assert np.max(np.abs(again.transition - lam.transition)) <= 1e-10


# -- verify_equivalence -------------------------------------------------------

def test_verify_identical_is_zero(diag_model):
    assert verify_equivalence(diag_model, diag_model, 8) == 0.0


def test_verify_detects_different_models():
    rng = np.random.default_rng(3)
    hits = 0
    for _ in range(10):
        a = random_admissible_model(rng, 4)
        b = random_admissible_model(rng, 4)
        hits += verify_equivalence(a, b, 8) > 1e-3
    assert hits >= 9


def test_verify_probabilities_match_enumeration(coupled_model):
    # total probability over all sequences of one length is 1
    from blockmarkov.equivalence import _sequence_probabilities
    p = _sequence_probabilities(coupled_model, 5)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    codes = [0, 1, 1, 0, 0]
    idx = int("".join(map(str, codes)), 2)
    assert p[idx] == pytest.approx(path_likelihood(coupled_model.transition, coupled_model.stationary,
                                                   coupled_model.emission_map(), codes), rel=1e-12)
    ll = conventional_forward_backward(coupled_model, encode("01100"), posteriors=False).log_likelihood
    assert np.exp(ll) == pytest.approx(p[idx], rel=1e-12)


def test_verify_argument_errors(diag_model):
    other = PartitionedModel.build(("a", "b"), (2, 1), diag_model.transition)
    with pytest.raises(AlphabetMismatch):
        verify_equivalence(diag_model, other)
    with pytest.raises(DimensionMismatch):
        verify_equivalence(diag_model, diag_model, 13)
