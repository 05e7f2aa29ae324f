"""Bracket-generation check for a driven mode set.

Starting from ``Z0 = K u (-K)``, each generation collects the modes ``i + j``
with ``i`` in the previous generation, ``j`` in ``Z0`` and a nonzero
interaction coefficient. ``K`` is hypoelliptic when the union of all
generations covers every mode with ``0 < |k|_inf <= N``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .lattice import (
    ModeIndex,
    coefficient_is_zero,
    in_punctured_box,
    in_upper_half,
    punctured_box,
)


@dataclass
class GenerationTrace:
    generations: list[frozenset[ModeIndex]]
    accumulated: frozenset[ModeIndex]
    hypoelliptic: bool
    uncovered: frozenset[ModeIndex]
    N: int = 0
    cycle_start: int | None = field(default=None)

    def to_dict(self) -> dict:
        def ordered(s):
            return [list(m) for m in sorted(s)]

        return {
            "hypoelliptic": self.hypoelliptic,
            "generations": [ordered(g) for g in self.generations],
            "uncovered": ordered(self.uncovered),
        }


def _as_modes(modes: Iterable) -> set[ModeIndex]:
    return {ModeIndex(int(m[0]), int(m[1])) for m in modes}


def generate_step(Zprev, Z0, N: int) -> set[ModeIndex]:
    out = set()
    for i in _as_modes(Zprev):
        for j in _as_modes(Z0):
            k = i + j
            if k in out or not in_punctured_box(k, N):
                continue
            if not coefficient_is_zero(i, j):
                out.add(k)
    return out


def check_hypoelliptic(K, N: int, max_generations: int | None = None) -> GenerationTrace:
    """Iterate the generation sets until the box is covered or a set repeats.

    The recursion uses only the previous generation, so the sequence need not
    be nested; a repeated generation means the union can no longer grow.
    """
    K = _as_modes(K)
    if not K:
        raise ValueError("empty forcing set: nothing is driven, trivially not hypoelliptic")
    bad = [k for k in K if not (in_upper_half(k) and in_punctured_box(k, N))]
    if bad:
        raise ValueError(f"forcing modes outside the truncated half lattice: {sorted(bad)}")

    target = frozenset(punctured_box(N))
    Z0 = frozenset(K | {-k for k in K})
    generations = [Z0]
    seen = {Z0: 0}
    accumulated = set(Z0)
    cycle_start = None
    while accumulated != target:
        if max_generations is not None and len(generations) > max_generations:
            break
        nxt = frozenset(generate_step(generations[-1], Z0, N))
        if nxt in seen:
            cycle_start = seen[nxt]
            break
        seen[nxt] = len(generations)
        generations.append(nxt)
        accumulated |= nxt
    accumulated = frozenset(accumulated)
    uncovered = target - accumulated
    return GenerationTrace(
        generations=generations,
        accumulated=accumulated,
        hypoelliptic=not uncovered,
        uncovered=uncovered,
        N=N,
        cycle_start=cycle_start,
    )


def closure_verdict(K, N: int) -> bool:
    """Verdict of the accumulated-closure variant: ``k = i + j`` over the running union.

    Kept independent of :func:`check_hypoelliptic` so the two readings of the
    recursion can be compared.
    """
    K = _as_modes(K)
    Z0 = K | {-k for k in K}
    acc = set(Z0)
    target = punctured_box(N)
    changed = True
    while changed:
        changed = False
        for i in list(acc):
            for j in Z0:
                k = i + j
                if k not in acc and in_punctured_box(k, N) and not coefficient_is_zero(i, j):
                    acc.add(k)
                    changed = True
    return acc == target
