import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from gsns.lattice import (
    ModeIndex,
    build_lattice,
    build_triads,
    coefficient_is_zero,
    interaction_coefficient,
)


def test_n1_modes():
    lat = build_lattice(1)
    assert [tuple(m) for m in lat.modes] == [(-1, 1), (0, 1), (1, 0), (1, 1)]
    assert lat.d == 8


@pytest.mark.parametrize("N", range(1, 6))
def test_dimension_matches_enumeration(N):
    lat = build_lattice(N)
    assert [tuple(m) for m in lat.modes] == oracles.upper_modes(N)
    assert lat.d == 4 * N * (N + 1)


def test_rejects_zero_truncation():
    with pytest.raises(ValueError):
        build_lattice(0)


@pytest.mark.parametrize("i,j,expected", [((0, 1), (0, 1), 0.0), ((1, 0), (0, 1), 0.0),
                                          ((1, 1), (0, 1), -0.5)])
def test_coefficient_examples(i, j, expected):
    assert interaction_coefficient(ModeIndex(*i), ModeIndex(*j)) == expected


def test_coefficient_rejects_zero_vector():
    with pytest.raises(ValueError):
        interaction_coefficient(ModeIndex(0, 0), ModeIndex(1, 0))


def test_coefficient_kernel_exact():
    vecs = [(a, b) for a in range(-8, 9) for b in range(-8, 9) if (a, b) != (0, 0)]
    for i, j in itertools.product(vecs[::3], vecs[::5]):
        parallel = i[0] * j[1] - i[1] * j[0] == 0
        same = i[0] ** 2 + i[1] ** 2 == j[0] ** 2 + j[1] ** 2
        c = interaction_coefficient(ModeIndex(*i), ModeIndex(*j))
        if parallel or same:
            assert c == 0.0 and coefficient_is_zero(i, j)
        else:
            assert c != 0.0
            assert c == pytest.approx(oracles.coef(i, j), rel=1e-15)


@given(st.tuples(st.integers(-8, 8), st.integers(-8, 8)),
       st.tuples(st.integers(-8, 8), st.integers(-8, 8)))
def test_coefficient_symmetries(i, j):
    if i == (0, 0) or j == (0, 0):
        return
    i, j = ModeIndex(*i), ModeIndex(*j)
    c = interaction_coefficient(i, j)
    assert interaction_coefficient(-i, -j) == c
    assert interaction_coefficient(j, i) == c


def test_n1_triad_examples():
    table = build_triads(build_lattice(1))
    entries = list(table.entries())
    assert ((1, 1), (0, 1), (1, 0), "diff", -0.5) in [
        (tuple(i), tuple(j), tuple(k), kind, c) for i, j, k, kind, c in entries
    ]
    assert all(i != j for i, j, *_ in entries)


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_triad_count_matches_double_loop(N):
    assert len(build_triads(build_lattice(N))) == oracles.triad_count(N)


def test_triads_n2_count():
    assert len(build_triads(build_lattice(2))) == 74


def test_triads_deterministic():
    lat = build_lattice(3)
    assert build_triads(lat).to_csv() == build_triads(lat).to_csv()


def test_sum_entries_mirrored():
    table = build_triads(build_lattice(3))
    sums = {(tuple(i), tuple(j), tuple(k)) for i, j, k, kind, _ in table.entries() if kind == "sum"}
    for i, j, k in sums:
        assert (j, i, k) in sums


def test_triad_csv_format():
    text = build_triads(build_lattice(1)).to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "i1,i2,j1,j2,k1,k2,kind,c"
    row = lines[1].split(",")
    assert len(row) == 8
    assert np.isfinite(float(row[-1]))
