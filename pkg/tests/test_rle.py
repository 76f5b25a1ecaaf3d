import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockmarkov import (NoConditioningEvents, NonBinaryAlphabet, RunLengthSequence,
                         SymbolAlphabet, UnknownSymbol, decode, efrd, encode,
                         error_probability)
from blockmarkov.rle import efrd_max_deviation, parse_rle_text
from oracles import BURST_EXAMPLE_RUNS, BURST_EXAMPLE, efrd_by_counting

binary_strings = st.text(alphabet="01", min_size=1, max_size=400)


def bursty(rng, length, p_enter=0.05, p_stay=0.6):
    """Two-state burst generator, independent of the library simulator."""
    out = np.empty(length, dtype=np.uint8)
    s = 0
    u = rng.random(length)
    for t in range(length):
        s = int(u[t] < (p_stay if s else p_enter))
        out[t] = s
    return (out + ord("0")).tobytes().decode()


# -- encode / decode ----------------------------------------------------------

def test_burst_example_runs():
    runs = encode(BURST_EXAMPLE)
    assert len(BURST_EXAMPLE) == 35
    assert runs.runs == BURST_EXAMPLE_RUNS
    assert len(runs) == 13
    assert runs.to_text() == "0^3 1^2 0^6 1^5 0^1 1^2 0^2 1^1 0^5 1^2 0^2 1^1 0^3"
    assert decode(runs) == BURST_EXAMPLE


@pytest.mark.parametrize("seq,pairs", [("0", [("0", 1)]), ("111", [("1", 3)]),
                                       ("00011", [("0", 3), ("1", 2)]), ("1", [("1", 1)])])
def test_small_encodings(seq, pairs):
    runs = encode(seq)
    assert runs.runs == pairs
    assert decode(RunLengthSequence.from_pairs(pairs)) == seq


def test_unknown_symbol_reports_position():
    with pytest.raises(UnknownSymbol) as exc:
        encode("0010x1")
    assert exc.value.position == 4
    with pytest.raises(UnknownSymbol):
        encode("01é")


def test_empty_sequence_rejected():
    with pytest.raises(ValueError):
        encode("")


def test_non_maximal_runs_rejected():
    with pytest.raises(ValueError):
        RunLengthSequence(SymbolAlphabet(("0", "1")), [0, 0], [1, 2])
    with pytest.raises(ValueError):
        RunLengthSequence(SymbolAlphabet(("0", "1")), [0, 1], [1, 0])


def test_from_pairs_merges_adjacent():
    assert RunLengthSequence.from_pairs([("0", 2), ("0", 3), ("1", 1)]).runs == [("0", 5), ("1", 1)]


def test_parse_rle_text():
    runs = parse_rle_text("0^3 1^2\n0^6 1")
    assert runs.runs == [("0", 3), ("1", 2), ("0", 6), ("1", 1)]
    with pytest.raises(ValueError):
        parse_rle_text("0^0")


def test_ternary_alphabet_round_trip():
    alpha = SymbolAlphabet(("a", "b", "c"))
    s = "aabccca"
    assert decode(encode(s, alpha)) == s


@settings(max_examples=300, deadline=None)
@given(binary_strings)
def test_round_trip_property(s):
    runs = encode(s)
    assert decode(runs) == s
    assert runs.total_length == len(s)
    assert np.all(runs.counts >= 1)
    assert np.all(runs.codes[1:] != runs.codes[:-1])


@settings(max_examples=100, deadline=None)
@given(binary_strings)
def test_error_probability_invariant_under_round_trip(s):
    runs = encode(s)
    assert error_probability(runs) == error_probability(encode(decode(runs)))
    assert error_probability(runs) == s.count("1") / len(s)


# -- error probability --------------------------------------------------------

def test_error_probability_examples():
    assert error_probability(encode(BURST_EXAMPLE)) == pytest.approx(13 / 35)
    assert round(error_probability(encode(BURST_EXAMPLE)), 4) == 0.3714
    assert error_probability(encode("0000")) == 0.0
    assert error_probability(encode("0101")) == 0.5


def test_error_probability_needs_binary():
    with pytest.raises(NonBinaryAlphabet):
        error_probability(encode("ab", SymbolAlphabet(("a", "b"))))


# -- EFRD ---------------------------------------------------------------------

def test_efrd_1010():
    t = efrd(encode("1010"))
    assert t.sample_count == 2
    assert list(t.values) == [1.0, 1.0]
    assert t.pr(2) == 0.0


def test_efrd_1100():
    t = efrd(encode("1100"))
    assert t.sample_count == 2
    assert [t.pr(m) for m in range(4)] == [1.0, 0.5, 0.5, 0.0]


def test_efrd_burst_example_against_counting():
    t = efrd(encode(BURST_EXAMPLE))
    values, n = efrd_by_counting(BURST_EXAMPLE)
    assert t.sample_count == n == 13
    assert list(t.values) == values
    # six error runs, each closed by a zero
    assert t.pr(1) == 6 / 13


def test_efrd_final_error_excluded():
    t = efrd(encode("0110"))
    assert t.sample_count == 2
    t = efrd(encode("0101"))
    assert t.sample_count == 1 and t.pr(1) == 1.0


@pytest.mark.parametrize("s", ["0000", "0001", "1"])
def test_efrd_without_conditioning_events(s):
    with pytest.raises(NoConditioningEvents):
        efrd(encode(s))


@settings(max_examples=300, deadline=None)
@given(binary_strings)
def test_efrd_equals_naive_count(s):
    if "1" not in s[:-1]:
        with pytest.raises(NoConditioningEvents):
            efrd(encode(s))
        return
    t = efrd(encode(s))
    values, n = efrd_by_counting(s)
    assert t.sample_count == n
    assert list(t.values) == values
    assert t.values[0] == 1.0
    assert np.all(np.diff(t.values) <= 0)
    assert np.all((t.values >= 0) & (t.values <= 1))


def test_efrd_on_long_bursty_sequences():
    rng = np.random.default_rng(5)
    for _ in range(5):
        s = bursty(rng, 20000)
        values, n = efrd_by_counting(s)
        t = efrd(encode(s))
        assert t.sample_count == n
        assert np.array_equal(t.values, values)


def test_efrd_max_deviation():
    a = efrd(encode("1100"))
    b = efrd(encode("1010"))
    # a: [1, .5, .5], b: [1, 1, 0]
    assert efrd_max_deviation(a, b) == 0.5
    assert efrd_max_deviation(a, b, m_max=0) == 0.0
    assert efrd_max_deviation(a, a) == 0.0
