import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from gsns.symbolic import (
    PatternFamily,
    cylinder_frequency,
    find_free_set,
    is_fully_traced,
    mask_density,
    mask_from_set,
    set_from_mask,
)


def cube(r, n):
    return PatternFamily.from_words(itertools.product(range(1, r + 1), repeat=n), r=r, n=n)


def test_density_examples():
    assert mask_density([1, 0] * 5) == 0.5
    assert mask_density(np.zeros(7)) == 0
    assert mask_density(mask_from_set(range(0, 300, 3), 300)) == pytest.approx(1 / 3)


def test_cylinder_frequency_alias():
    assert cylinder_frequency(np.ones(5)) == 1
    assert cylinder_frequency(mask_from_set(range(0, 300, 3), 300)) == pytest.approx(1 / 3)
    m = np.random.default_rng(0).integers(0, 2, 97)
    assert cylinder_frequency(m) == mask_density(m)


def test_mask_round_trip():
    assert set_from_mask(mask_from_set([0, 4, 9], 10)) == [0, 4, 9]


def test_trace_examples():
    R = PatternFamily.from_words([(1, 1), (2, 2)], r=2)
    assert is_fully_traced(R, [])
    assert not is_fully_traced(R, [1, 2])
    assert is_fully_traced(R, [1])
    assert is_fully_traced(cube(2, 2), [1, 2])


@pytest.mark.parametrize("n", range(1, 11))
def test_free_set_full_cube(n):
    assert find_free_set(cube(2, n)) == tuple(range(1, n + 1))


def test_free_set_examples():
    assert find_free_set(PatternFamily.from_words([(1, 1), (2, 2)], r=2)) == (1,)
    even = [w for w in itertools.product((1, 2), repeat=3) if w.count(2) % 2 == 0]
    assert find_free_set(PatternFamily.from_words(even, r=2)) == (1, 2)


def test_free_set_size_bound():
    R = PatternFamily.from_words([(1,) * 25], r=2)
    with pytest.raises(ValueError):
        find_free_set(R)


def test_invalid_words_rejected():
    with pytest.raises(ValueError):
        PatternFamily.from_words([(1, 3)], r=2)
    with pytest.raises(ValueError):
        PatternFamily.from_words([(1, 2)], r=1)


def _random_family(rng, r, n):
    allw = list(itertools.product(range(1, r + 1), repeat=n))
    k = rng.integers(0, len(allw) + 1)
    idx = rng.choice(len(allw), size=k, replace=False)
    return [allw[i] for i in idx]


@pytest.mark.parametrize("r,nmax,count", [(2, 4, 300), (3, 3, 100)])
def test_free_set_matches_exhaustive(r, nmax, count):
    rng = np.random.default_rng(r)
    for _ in range(count):
        n = int(rng.integers(1, nmax + 1))
        words = _random_family(rng, r, n)
        R = PatternFamily(n=n, r=r, words=frozenset(words))
        assert find_free_set(R) == oracles.free_set(words, n, r)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.data())
def test_trace_monotone_under_subsets(n, data):
    words = data.draw(st.sets(st.tuples(*[st.integers(1, 2)] * n), min_size=1))
    R = PatternFamily.from_words(words, r=2, n=n)
    J = data.draw(st.sets(st.integers(1, n)))
    if is_fully_traced(R, J):
        for size in range(len(J)):
            for sub in itertools.combinations(sorted(J), size):
                assert is_fully_traced(R, sub)


@pytest.mark.parametrize("n", range(6, 13))
def test_lemma_hypothesis_nonempty(n):
    rng = np.random.default_rng(n)
    need = int(np.ceil(2 ** (n / 2)))
    words = set()
    while len(words) < need:
        words.add(tuple(int(s) for s in rng.integers(1, 3, n)))
    J = find_free_set(PatternFamily.from_words(words, r=2, n=n))
    assert len(J) >= 1
    print(f"n={n} |R|={need} |J|/n={len(J) / n:.3f}")
