"""Truncated Fourier lattice, interaction coefficients and the triad table."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, NamedTuple

import numpy as np


class ModeIndex(NamedTuple):
    k1: int
    k2: int

    def __neg__(self) -> "ModeIndex":
        return ModeIndex(-self.k1, -self.k2)

    def __add__(self, other) -> "ModeIndex":  # type: ignore[override]
        return ModeIndex(self.k1 + other[0], self.k2 + other[1])

    def __sub__(self, other) -> "ModeIndex":
        return ModeIndex(self.k1 - other[0], self.k2 - other[1])

    @property
    def norm2(self) -> int:
        return self.k1 * self.k1 + self.k2 * self.k2

    @property
    def sup_norm(self) -> int:
        return max(abs(self.k1), abs(self.k2))


def in_upper_half(k) -> bool:
    """Membership in the half lattice: k2 > 0, or k1 > 0 on the axis k2 = 0."""
    return k[1] > 0 or (k[1] == 0 and k[0] > 0)


def in_punctured_box(k, n: int) -> bool:
    """Membership in ``{k : 0 < |k|_inf <= n}``."""
    s = max(abs(k[0]), abs(k[1]))
    return 0 < s <= n


def punctured_box(n: int) -> set[ModeIndex]:
    return {
        ModeIndex(a, b)
        for a in range(-n, n + 1)
        for b in range(-n, n + 1)
        if (a, b) != (0, 0)
    }


@dataclass(frozen=True)
class TruncationLattice:
    """Modes of the half lattice with ``|k|_inf <= N`` in ascending (k1, k2) order.

    Mode at position ``p`` owns state components ``2p`` (cosine) and ``2p + 1``
    (sine).
    """

    N: int
    modes: tuple[ModeIndex, ...]
    index_of: dict = field(repr=False, compare=False)

    @property
    def d(self) -> int:
        return 2 * len(self.modes)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def mode_norm2(self) -> np.ndarray:
        """``|k|^2`` per mode, shape (n_modes,)."""
        return np.array([m.norm2 for m in self.modes], dtype=float)

    @property
    def component_norm2(self) -> np.ndarray:
        """``|k|^2`` repeated per state component, shape (d,)."""
        return np.repeat(self.mode_norm2, 2)

    def component_index(self, mode, component: int) -> int:
        """State index of ``q_{(k, c)}`` for ``c`` in {1, 2}."""
        if component not in (1, 2):
            raise ValueError(f"component must be 1 or 2, got {component}")
        return 2 * self.index_of[ModeIndex(*mode)] + component - 1

    def component_names(self) -> list[str]:
        names = []
        for m in self.modes:
            names.append(f"q_{m.k1}_{m.k2}_1")
            names.append(f"q_{m.k1}_{m.k2}_2")
        return names

    def __contains__(self, k) -> bool:
        return tuple(k) in self.index_of


def build_lattice(N: int) -> TruncationLattice:
    if isinstance(N, bool) or int(N) != N:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    N = int(N)
    if N < 1:
        raise ValueError(f"N must be >= 1 (got {N}): the truncation would be empty")
    modes = tuple(
        sorted(
            ModeIndex(a, b)
            for a in range(-N, N + 1)
            for b in range(0, N + 1)
            if in_upper_half((a, b))
        )
    )
    return TruncationLattice(N=N, modes=modes, index_of={m: p for p, m in enumerate(modes)})


def _coefficient_parts(i, j) -> tuple[int, int, int]:
    if (i[0], i[1]) == (0, 0) or (j[0], j[1]) == (0, 0):
        raise ValueError("interaction coefficient undefined for the zero wavevector")
    dot = i[1] * j[0] - i[0] * j[1]  # <i_perp, j> with i_perp = (i2, -i1)
    ni = i[0] * i[0] + i[1] * i[1]
    nj = j[0] * j[0] + j[1] * j[1]
    return dot, ni, nj


def interaction_coefficient(i, j) -> float:
    """``<i_perp, j> (1/|j|^2 - 1/|i|^2)``, exactly zero when either factor vanishes."""
    dot, ni, nj = _coefficient_parts(i, j)
    if dot == 0 or ni == nj:
        return 0.0
    return float(Fraction(dot * (ni - nj), ni * nj))


def coefficient_is_zero(i, j) -> bool:
    dot, ni, nj = _coefficient_parts(i, j)
    return dot == 0 or ni == nj


SUM, DIFF = 0, 1
_KIND_NAMES = {SUM: "sum", DIFF: "diff"}


@dataclass(frozen=True)
class TriadTable:
    """Ordered pairs ``(i, j)`` with nonzero coefficient feeding mode ``k``.

    ``kind`` is ``SUM`` for ``i + j = k`` and ``DIFF`` for ``i - j = k``. The
    drift prefactors are not folded into ``c``.
    """

    i: np.ndarray  # (n, 2) int
    j: np.ndarray
    k: np.ndarray
    kind: np.ndarray  # (n,) int8
    c: np.ndarray  # (n,) float
    i_pos: np.ndarray  # lattice positions, (n,) int64
    j_pos: np.ndarray
    k_pos: np.ndarray

    def __len__(self) -> int:
        return len(self.c)

    def entries(self) -> Iterator[tuple[ModeIndex, ModeIndex, ModeIndex, str, float]]:
        for n in range(len(self)):
            yield (
                ModeIndex(*map(int, self.i[n])),
                ModeIndex(*map(int, self.j[n])),
                ModeIndex(*map(int, self.k[n])),
                _KIND_NAMES[int(self.kind[n])],
                float(self.c[n]),
            )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i1", "i2", "j1", "j2", "k1", "k2", "kind", "c"])
        for i, j, k, kind, c in self.entries():
            w.writerow([i.k1, i.k2, j.k1, j.k2, k.k1, k.k2, kind, format(c, ".17g")])
        return buf.getvalue()


def build_triads(lattice: TruncationLattice) -> TriadTable:
    rows = []
    modes = lattice.modes
    for i in modes:
        for j in modes:
            if coefficient_is_zero(i, j):
                continue
            c = interaction_coefficient(i, j)
            for kind, k in ((SUM, i + j), (DIFF, i - j)):
                if k in lattice.index_of:
                    rows.append((i, j, k, kind, c))
    n = len(rows)
    i_arr = np.array([r[0] for r in rows], dtype=np.int64).reshape(n, 2)
    j_arr = np.array([r[1] for r in rows], dtype=np.int64).reshape(n, 2)
    k_arr = np.array([r[2] for r in rows], dtype=np.int64).reshape(n, 2)
    idx = lattice.index_of
    return TriadTable(
        i=i_arr,
        j=j_arr,
        k=k_arr,
        kind=np.array([r[3] for r in rows], dtype=np.int8),
        c=np.array([r[4] for r in rows], dtype=float),
        i_pos=np.array([idx[r[0]] for r in rows], dtype=np.int64),
        j_pos=np.array([idx[r[1]] for r in rows], dtype=np.int64),
        k_pos=np.array([idx[r[2]] for r in rows], dtype=np.int64),
    )
