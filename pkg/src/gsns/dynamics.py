"""Drift, noise paths and the stochastic flow of the truncated vorticity system.

State layout: the mode at lattice position ``p`` occupies ``q[2p]`` (cosine
coefficient) and ``q[2p + 1]`` (sine coefficient).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import _kernels as K
from .lattice import ModeIndex, TriadTable, TruncationLattice, build_lattice, build_triads

SCHEMES = {
    "euler_maruyama": K.EULER_MARUYAMA,
    "heun_deterministic": K.HEUN_DETERMINISTIC,
    "rk4": K.RK4,
}
DEFAULT_DT = 1e-3


class BlowUpError(RuntimeError):
    """The state stopped being finite during integration."""

    def __init__(self, time: float, step: int):
        super().__init__(f"non-finite state at t={time!r} (step {step})")
        self.time = time
        self.step = step


def _grid_steps(t: float, dt: float, what: str = "time") -> int:
    n = round(t / dt)
    if n < 0 or abs(n * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"{what} {t!r} is not a non-negative multiple of dt={dt!r}")
    return int(n)


def _check_state(q, d: int) -> np.ndarray:
    q = np.ascontiguousarray(q, dtype=float)
    if q.shape != (d,):
        raise ValueError(f"state must have shape ({d},), got {q.shape}")
    return q


@dataclass(frozen=True)
class SimConfig:
    epsilon: float
    dt: float = DEFAULT_DT
    scheme: str = "euler_maruyama"

    def __post_init__(self):
        # epsilon = 0 is the inviscid limit used for conservation checks
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon!r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {sorted(SCHEMES)}")


@dataclass(frozen=True)
class ForcingPattern:
    """Per-mode noise amplitudes ``e1`` (cosine) and ``e2`` (sine)."""

    lattice: TruncationLattice
    e1: np.ndarray
    e2: np.ndarray

    def __post_init__(self):
        n = self.lattice.n_modes
        if self.e1.shape != (n,) or self.e2.shape != (n,):
            raise ValueError(f"amplitude arrays must have shape ({n},)")
        bad = [
            self.lattice.modes[p]
            for p in range(n)
            if (self.e1[p] * self.e2[p] == 0) != (self.e1[p] == 0 and self.e2[p] == 0)
        ]
        if bad:
            raise ValueError(
                f"modes {bad}: e1*e2 = 0 must hold only when e1 = e2 = 0"
            )

    @classmethod
    def from_modes(cls, lattice: TruncationLattice, amplitudes: Mapping) -> "ForcingPattern":
        """Build from ``{(k1, k2): (e1, e2)}``."""
        e1 = np.zeros(lattice.n_modes)
        e2 = np.zeros(lattice.n_modes)
        for mode, (a, b) in amplitudes.items():
            mode = ModeIndex(*mode)
            if mode not in lattice:
                raise ValueError(f"forced mode {tuple(mode)} is not in the truncated lattice")
            p = lattice.index_of[mode]
            e1[p], e2[p] = a, b
        return cls(lattice, e1, e2)

    @classmethod
    def zero(cls, lattice: TruncationLattice) -> "ForcingPattern":
        return cls(lattice, np.zeros(lattice.n_modes), np.zeros(lattice.n_modes))

    @property
    def driven_modes(self) -> list[ModeIndex]:
        """Modes with ``e1 * e2 > 0``."""
        return [m for p, m in enumerate(self.lattice.modes) if self.e1[p] * self.e2[p] > 0]

    def forced_components(self) -> list[tuple[ModeIndex, int]]:
        out = []
        for p, m in enumerate(self.lattice.modes):
            if self.e1[p] != 0:
                out.append((m, 1))
            if self.e2[p] != 0:
                out.append((m, 2))
        return out

    def diffusion(self) -> tuple[np.ndarray, np.ndarray]:
        """State index and signed coefficient per forced component.

        Cosine components enter with ``+e1/2``, sine components with ``-e2/2``.
        """
        cols, amps = [], []
        for m, comp in self.forced_components():
            p = self.lattice.index_of[m]
            cols.append(2 * p + comp - 1)
            amps.append(self.e1[p] / 2 if comp == 1 else -self.e2[p] / 2)
        return np.array(cols, dtype=np.int64), np.array(amps, dtype=float)


@dataclass(frozen=True)
class NoisePath:
    """Brownian increments on a uniform grid, one column per forced component.

    ``offset`` counts rows dropped by :func:`shift_path`; row ``r`` of this
    path is row ``r + offset`` of the unshifted path drawn from ``seed``.
    """

    seed: int
    dt: float
    increments: np.ndarray = field(repr=False)
    forced_components: tuple
    offset: int = 0

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def n_forced(self) -> int:
        return self.increments.shape[1]


def _column_stream(seed: int, column: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(column),))
    return np.random.Generator(np.random.Philox(ss))


def sample_noise(pattern: ForcingPattern, dt: float, n_steps: int, seed: int) -> NoisePath:
    """Independent ``N(0, dt)`` increments per forced component.

    Each column has its own counter-based stream keyed by ``(seed, column)``,
    so columns can be generated in any order and a shorter path is a prefix
    of a longer one.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    comps = pattern.forced_components()
    if not comps:
        raise ValueError("forcing pattern is identically zero: no noise to sample")
    incr = np.empty((int(n_steps), len(comps)))
    sd = math.sqrt(dt)
    for col in range(len(comps)):
        incr[:, col] = _column_stream(seed, col).standard_normal(int(n_steps)) * sd
    incr.setflags(write=False)
    return NoisePath(int(seed), float(dt), incr, tuple(comps))


def shift_path(path: NoisePath, s: float) -> NoisePath:
    """Wiener shift by ``s``: drop the first ``s / dt`` increment rows."""
    r = _grid_steps(s, path.dt, "shift")
    if r > path.n_steps:
        raise ValueError(f"shift {s!r} exceeds the path horizon {path.horizon!r}")
    return replace(path, increments=path.increments[r:], offset=path.offset + r)


# Module-level forms taking the lattice and triad table explicitly.

def _triad_args(triads: TriadTable):
    return triads.i_pos, triads.j_pos, triads.k_pos, triads.kind, triads.c


def drift(q, lattice: TruncationLattice, triads: TriadTable, epsilon: float) -> np.ndarray:
    q = _check_state(q, lattice.d)
    out = np.empty(lattice.d)
    K.drift(q, *_triad_args(triads), epsilon * lattice.component_norm2, out)
    return out


def quadratic_part(q, lattice: TruncationLattice, triads: TriadTable) -> np.ndarray:
    q = _check_state(q, lattice.d)
    out = np.empty(lattice.d)
    K.quadratic(q, *_triad_args(triads), out)
    return out


def drift_jacobian_apply(q, v, lattice: TruncationLattice, triads: TriadTable,
                         epsilon: float) -> np.ndarray:
    q = _check_state(q, lattice.d)
    v = _check_state(v, lattice.d)
    out = np.empty(lattice.d)
    K.jacobian_apply(q, v, *_triad_args(triads), epsilon * lattice.component_norm2, out)
    return out


class GSNS:
    """Galerkin-truncated stochastic vorticity system.

    Bundles the lattice, triad table, forcing pattern and integrator settings.
    All members are read-only after construction.

    Parameters
    ----------
    N : int
        Truncation level, ``|k|_inf <= N``.
    config : SimConfig
    forcing : mapping or ForcingPattern, optional
        ``{(k1, k2): (e1, e2)}``; unforced when omitted.
    """

    def __init__(self, N: int, config: SimConfig, forcing: Mapping | None = None,
                 lattice: TruncationLattice | None = None, triads: TriadTable | None = None):
        self.lattice = lattice if lattice is not None else build_lattice(N)
        self.triads = triads if triads is not None else build_triads(self.lattice)
        self.config = config
        if isinstance(forcing, ForcingPattern):
            self.pattern = forcing
        elif forcing:
            self.pattern = ForcingPattern.from_modes(self.lattice, forcing)
        else:
            self.pattern = ForcingPattern.zero(self.lattice)
        self._args = _triad_args(self.triads)
        self._diss = config.epsilon * self.lattice.component_norm2
        self._cols, self._amps = self.pattern.diffusion()
        self._scheme = SCHEMES[config.scheme]

    @property
    def d(self) -> int:
        return self.lattice.d

    @property
    def N(self) -> int:
        return self.lattice.N

    def with_config(self, **changes) -> "GSNS":
        cfg = replace(self.config, **changes)
        forcing = {
            m: (self.pattern.e1[p], self.pattern.e2[p])
            for p, m in enumerate(self.lattice.modes)
            if self.pattern.e1[p] or self.pattern.e2[p]
        }
        return GSNS(self.N, cfg, forcing, lattice=self.lattice, triads=self.triads)

    # -- vector fields -------------------------------------------------
    def drift(self, q) -> np.ndarray:
        q = _check_state(q, self.d)
        out = np.empty(self.d)
        K.drift(q, *self._args, self._diss, out)
        return out

    def jacobian_apply(self, q, v) -> np.ndarray:
        q = _check_state(q, self.d)
        v = _check_state(v, self.d)
        out = np.empty(self.d)
        K.jacobian_apply(q, v, *self._args, self._diss, out)
        return out

    def jacobian(self, q) -> np.ndarray:
        q = _check_state(q, self.d)
        J = np.empty((self.d, self.d))
        K.jacobian_matrix(q, *self._args, self._diss, J)
        return J

    # -- noise ---------------------------------------------------------
    def sample_noise(self, n_steps: int, seed: int) -> NoisePath:
        return sample_noise(self.pattern, self.config.dt, n_steps, seed)

    def _increments(self, path: NoisePath | None, n_steps: int) -> np.ndarray:
        if self._scheme == K.HEUN_DETERMINISTIC or path is None:
            if self._scheme != K.HEUN_DETERMINISTIC and len(self._cols):
                raise ValueError(f"{self.config.scheme} with forcing requires a noise path")
            return np.zeros((n_steps, len(self._cols)))
        if path.dt != self.config.dt:
            raise ValueError(f"path dt {path.dt!r} differs from config dt {self.config.dt!r}")
        if path.n_forced != len(self._cols):
            raise ValueError("path columns do not match the forced components")
        return np.ascontiguousarray(path.increments)

    # -- integration ---------------------------------------------------
    def step(self, q, path: NoisePath | None, step_index: int) -> np.ndarray:
        q = _check_state(q, self.d)
        if path is not None and not 0 <= step_index < path.n_steps:
            raise IndexError(f"step_index {step_index} outside [0, {path.n_steps})")
        incr = self._increments(path, step_index + 1)
        out = np.empty(self.d)
        S, F = np.empty((4, self.d)), np.empty((4, self.d))
        K.step(q, incr[step_index], self._cols, self._amps, self.config.dt, self._scheme,
               *self._args, self._diss, out, S, F)
        return out

    def trajectory(self, x0, path: NoisePath | None, t: float,
                   record_every: int = 1) -> np.ndarray:
        """States at every ``record_every``-th grid time in ``[0, t]``."""
        x0 = _check_state(x0, self.d)
        n = _grid_steps(t, self.config.dt)
        if path is not None and n > path.n_steps:
            raise ValueError(f"t={t!r} exceeds the path horizon {path.horizon!r}")
        if record_every < 1:
            raise ValueError("record_every must be >= 1")
        incr = self._increments(path, n)
        states, done = K.integrate(x0, incr, 0, n, int(record_every), self._cols, self._amps,
                                   self.config.dt, self._scheme, *self._args, self._diss)
        if done < n:
            raise BlowUpError((done + 1) * self.config.dt, done)
        return states

    def flow(self, x0, path: NoisePath | None, t: float) -> np.ndarray:
        n = _grid_steps(t, self.config.dt)
        if n == 0:
            return _check_state(x0, self.d).copy()
        return self.trajectory(x0, path, t, record_every=n)[-1]

    def flow_at(self, x0, path: NoisePath | None, times: Sequence[float]) -> np.ndarray:
        """States at the given non-decreasing grid times, in one pass."""
        steps = [_grid_steps(t, self.config.dt) for t in times]
        if any(b < a for a, b in zip(steps, steps[1:])):
            raise ValueError("times must be non-decreasing")
        out = np.empty((len(steps), self.d))
        q = _check_state(x0, self.d)
        cur = 0
        for r, n in enumerate(steps):
            if n > cur:
                q = self.flow(q, shift_path(path, cur * self.config.dt) if path is not None
                              else None, (n - cur) * self.config.dt)
                cur = n
            out[r] = q
        return out


def enstrophy(q) -> float:
    q = np.asarray(q, dtype=float)
    return float(np.dot(q, q))


def energy(q, lattice: TruncationLattice) -> float:
    q = np.asarray(q, dtype=float)
    return float(np.sum(q * q / lattice.component_norm2))


def make_state(lattice: TruncationLattice, amplitudes: Mapping | str = "zero") -> np.ndarray:
    """State from ``{(k1, k2, c): value}`` or ``{(k1, k2): (a1, a2)}``; ``"zero"`` gives 0."""
    x = np.zeros(lattice.d)
    if isinstance(amplitudes, str):
        if amplitudes != "zero":
            raise ValueError(f"unknown initial condition {amplitudes!r}")
        return x
    for key, val in amplitudes.items():
        if len(key) == 3:
            x[lattice.component_index(key[:2], key[2])] = val
        else:
            a1, a2 = val
            x[lattice.component_index(key, 1)] = a1
            x[lattice.component_index(key, 2)] = a2
    return x
