import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from flipflop.core import ChampernownePattern, FixedPattern, parse_sign


def words_in_order(max_len):
    out = []
    for L in range(1, max_len + 1):
        for w in itertools.product((1, -1), repeat=L):
            out.extend(w)
    return out


def brute_horizon(seq, L):
    seen = set()
    for i in range(L, len(seq) + 1):
        seen.add(tuple(seq[i - L:i]))
        if len(seen) == 2 ** L:
            return i
    return None


def test_champernowne_lists_words_by_length():
    ref = words_in_order(7)
    assert ChampernownePattern().prefix(len(ref)).tolist() == ref


@pytest.mark.parametrize("L", [1, 2, 3, 4, 5, 6])
def test_horizon_matches_brute_force(L):
    ref = words_in_order(L + 1)
    assert ChampernownePattern().horizon(L) == brute_horizon(ref, L)


def test_horizon_of_six_letter_words():
    assert ChampernownePattern().horizon(6) == 451


@given(st.lists(st.sampled_from([1, -1]), min_size=1, max_size=10), st.integers(0, 100))
def test_fixed_pattern_repeats(word, b):
    assert FixedPattern(word)[b] == word[b % len(word)]


def test_periodic_pattern_lacks_long_words():
    with pytest.raises(ValueError):
        FixedPattern([1, -1]).horizon(2, limit=1 << 10)


def test_sign_spellings():
    assert {parse_sign(s) for s in (1, "+", "p", "plus")} == {1}
    assert {parse_sign(s) for s in (-1, "-", "m", "minus")} == {-1}
    with pytest.raises(ValueError):
        parse_sign(0)
