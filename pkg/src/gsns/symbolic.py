"""Binary masks, word families and maximum trace (free) sets."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_EXACT_N = 24


def mask_density(mask) -> float:
    """``|{n < m : mask[n] = 1}| / m`` for a mask of horizon ``m``."""
    bits = np.asarray(mask)
    if bits.ndim != 1 or bits.size < 1:
        raise ValueError("mask must be a nonempty 1-d array")
    return int(np.count_nonzero(bits)) / bits.size


def cylinder_frequency(mask) -> float:
    """Empirical frequency of the cylinder ``[1]``; same value as :func:`mask_density`."""
    return mask_density(mask)


def mask_from_set(times: Iterable[int], horizon: int) -> np.ndarray:
    bits = np.zeros(int(horizon), dtype=np.int8)
    for t in times:
        if 0 <= t < horizon:
            bits[int(t)] = 1
    return bits


def set_from_mask(mask) -> list[int]:
    return [int(i) for i in np.flatnonzero(np.asarray(mask))]


@dataclass(frozen=True)
class PatternFamily:
    """Words of length ``n`` over ``{1, ..., r}``; coordinates are ``1..n``."""

    n: int
    r: int
    words: frozenset

    def __post_init__(self):
        if self.r < 2:
            raise ValueError("alphabet size r must be >= 2")
        for w in self.words:
            if len(w) != self.n or any(not 1 <= s <= self.r for s in w):
                raise ValueError(f"word {w} is not in {{1..{self.r}}}^{self.n}")

    @classmethod
    def from_words(cls, words: Iterable[Sequence[int]], r: int, n: int | None = None):
        words = [tuple(int(s) for s in w) for w in words]
        if n is None:
            if not words:
                raise ValueError("cannot infer n from an empty family")
            n = len(words[0])
        return cls(n=n, r=r, words=frozenset(words))

    def as_array(self) -> np.ndarray:
        """Words in sorted order as a (|R|, n) array of symbols minus one."""
        if not self.words:
            return np.zeros((0, self.n), dtype=np.int64)
        return np.array(sorted(self.words), dtype=np.int64) - 1


def _traced(codes: np.ndarray, size: int, r: int) -> bool:
    return len(np.unique(codes)) == r**size


def is_fully_traced(R: PatternFamily, J: Iterable[int]) -> bool:
    """True iff every word on ``J`` is the restriction of some member of ``R``."""
    J = sorted(set(int(j) for j in J))
    if not J:
        return True
    if J[0] < 1 or J[-1] > R.n:
        raise ValueError(f"J must be a subset of 1..{R.n}")
    A = R.as_array()
    codes = np.zeros(len(A), dtype=np.int64)
    for j in J:
        codes = codes * R.r + A[:, j - 1]
    return _traced(codes, len(J), R.r)


def find_free_set(R: PatternFamily) -> tuple[int, ...]:
    """Largest ``J`` on which ``R`` is fully traced; lexicographically smallest among ties.

    Depth-first search over increasing index sequences. Tracing is inherited
    by subsets, so a branch stops as soon as its prefix fails; preorder visits
    sets in lexicographic order, so the first maximum found wins.
    """
    if R.n > MAX_EXACT_N:
        raise ValueError(f"exact search supports n <= {MAX_EXACT_N}, got {R.n}")
    A = R.as_array()
    m = len(A)
    if m == 0:
        return ()
    r, n = R.r, R.n
    cap = 0
    while r ** (cap + 1) <= m:
        cap += 1
    cap = min(cap, n)
    best: list[tuple[int, ...]] = [()]

    def dfs(start: int, chosen: tuple[int, ...], codes: np.ndarray) -> bool:
        for j in range(start, n):
            if len(chosen) + (n - j) <= len(best[0]):
                return False
            nxt = codes * r + A[:, j]
            if not _traced(nxt, len(chosen) + 1, r):
                continue
            J = chosen + (j + 1,)
            if len(J) > len(best[0]):
                best[0] = J
                if len(J) == cap:
                    return True
            if len(J) < cap and dfs(j + 1, J, nxt):
                return True
        return False

    dfs(0, (), np.zeros(m, dtype=np.int64))
    return best[0]

