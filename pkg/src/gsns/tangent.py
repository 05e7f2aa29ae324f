"""Tangent flow, Lyapunov spectra by QR re-orthonormalization, log-moment diagnostics."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from .dynamics import GSNS, NoisePath, _check_state, _grid_steps


class FrameCollapseError(RuntimeError):
    def __init__(self, step: int, reason: str = "frame collapsed (R_ii underflow)"):
        super().__init__(f"{reason} at step {step}")
        self.step = step


def _scratch(d: int):
    return np.empty((d, d)), np.empty((4, d)), np.empty((4, d))


def tangent_step(model: GSNS, q, V, path: NoisePath | None = None, step_index: int = 0) -> np.ndarray:
    """Push the frame ``V`` (d x p) through the linearized step map at ``q``.

    The noise is additive, so it only enters through the stage points of the
    multi-stage schemes.
    """
    q = _check_state(q, model.d)
    V = np.asarray(V, dtype=float)
    squeeze = V.ndim == 1
    V = np.ascontiguousarray(V.reshape(model.d, -1))
    if V.shape[0] != model.d:
        raise ValueError(f"frame must have {model.d} rows, got {V.shape[0]}")
    incr = model._increments(path, step_index + 1)
    J, S, F = _scratch(model.d)
    out = K.tangent_step(q, V, incr[step_index], model._cols, model._amps, model.config.dt,
                         model._scheme, *model._args, model._diss, J, S, F)
    return out[:, 0] if squeeze else out


def flow_jacobian(model: GSNS, x0, path: NoisePath | None, t: float) -> np.ndarray:
    """``d_x Phi^t`` as a dense d x d matrix."""
    x0 = _check_state(x0, model.d)
    n = _grid_steps(t, model.config.dt)
    incr = model._increments(path, n)
    _, _, V, status = K.benettin(x0, np.eye(model.d), incr, 0, n, n + 1, model._cols,
                                 model._amps, model.config.dt, model._scheme, *model._args,
                                 model._diss)
    if status >= 0 or not np.all(np.isfinite(V)):
        raise FrameCollapseError(status, "non-finite tangent map")
    return V


@dataclass
class LyapunovReport:
    """Lyapunov exponent estimates (1/time), sorted non-increasing.

    ``history[r]`` is the running estimate after the r-th post-burn-in
    re-orthonormalization; ``stderr`` comes from batch means.
    """

    p: int
    d: int
    exponents: np.ndarray
    stderr: np.ndarray
    history: np.ndarray = field(repr=False)
    t_elapsed: float
    n_batches: int
    config: dict = field(default_factory=dict)

    def to_dict(self, with_history: bool = False) -> dict:
        out = {
            "p": self.p,
            "d": self.d,
            "exponents": [float(x) for x in self.exponents],
            "stderr": [float(x) for x in self.stderr],
            "t_elapsed": float(self.t_elapsed),
            "n_batches": self.n_batches,
            "config": self.config,
        }
        if with_history:
            out["history"] = self.history.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "LyapunovReport":
        ex = np.asarray(data["exponents"], dtype=float)
        return cls(
            p=int(data.get("p", len(ex))),
            d=int(data.get("d", len(ex))),
            exponents=ex,
            stderr=np.asarray(data.get("stderr", np.zeros_like(ex)), dtype=float),
            history=np.asarray(data.get("history", ex[None, :]), dtype=float),
            t_elapsed=float(data.get("t_elapsed", np.nan)),
            n_batches=int(data.get("n_batches", 0)),
            config=data.get("config", {}),
        )


def batch_means_stderr(increments: np.ndarray, dt_per_row: float, n_batches: int):
    """Per-column standard error of a time-average from contiguous batches.

    ``increments`` holds additive contributions per row (e.g. ``log R_ii``);
    each batch yields its own rate. Returns ``(stderr, batches_used)``.
    """
    n = increments.shape[0]
    b = min(n_batches, n)
    if b < 2:
        return np.full(increments.shape[1], np.nan), b
    chunks = np.array_split(increments, b)
    rates = np.array([c.sum(axis=0) / (len(c) * dt_per_row) for c in chunks])
    return rates.std(axis=0, ddof=1) / np.sqrt(b), b


def lyapunov_spectrum(
    model: GSNS,
    x0,
    path: NoisePath | None,
    p: int | None = None,
    reorth_every: int = 10,
    t_total: float = 100.0,
    burn_in: float = 0.1,
    n_batches: int = 20,
    frame: str | np.ndarray = "identity",
) -> LyapunovReport:
    """Benettin estimate of the top ``p`` exponents along one trajectory.

    Parameters
    ----------
    burn_in : float
        Fraction of the re-orthonormalization intervals discarded before
        accumulating.
    frame : {"identity", "random"} or array
        Initial frame; ``"random"`` draws an orthonormal frame seeded by the
        path seed.
    """
    d = model.d
    p = d if p is None else int(p)
    if not 1 <= p <= d:
        raise ValueError(f"p must be in [1, {d}], got {p}")
    if reorth_every < 1:
        raise ValueError("reorth_every must be >= 1")
    if not 0 <= burn_in < 1:
        raise ValueError("burn_in must be a fraction in [0, 1)")
    x0 = _check_state(x0, d)
    n = _grid_steps(t_total, model.config.dt, "t_total")
    if n < reorth_every:
        raise ValueError("t_total shorter than one re-orthonormalization interval")
    if path is not None and n > path.n_steps:
        raise ValueError(f"t_total={t_total!r} exceeds the path horizon {path.horizon!r}")

    if isinstance(frame, str):
        if frame == "identity":
            V0 = np.eye(d)[:, :p].copy()
        elif frame == "random":
            seed = path.seed if path is not None else 0
            V0, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((d, p)))
        else:
            raise ValueError(f"unknown frame {frame!r}")
    else:
        V0 = np.asarray(frame, dtype=float)
        if V0.shape != (d, p):
            raise ValueError(f"frame must have shape ({d}, {p})")
    V0 = np.ascontiguousarray(V0)

    incr = model._increments(path, n)
    logs, _, _, status = K.benettin(x0, V0, incr, 0, n, int(reorth_every), model._cols,
                                    model._amps, model.config.dt, model._scheme,
                                    *model._args, model._diss)
    if status >= 0:
        raise FrameCollapseError(status)

    skip = int(burn_in * len(logs))
    kept = logs[skip:]
    interval = reorth_every * model.config.dt
    elapsed = np.arange(1, len(kept) + 1) * interval
    history = np.cumsum(kept, axis=0) / elapsed[:, None]
    exponents = history[-1].copy()
    stderr, used = batch_means_stderr(kept, interval, n_batches)

    order = np.argsort(-exponents, kind="stable")
    return LyapunovReport(
        p=p,
        d=d,
        exponents=exponents[order],
        stderr=stderr[order],
        history=history[:, order],
        t_elapsed=float(elapsed[-1]),
        n_batches=used,
        config={
            "N": model.N,
            **asdict(model.config),
            "reorth_every": int(reorth_every),
            "t_total": float(t_total),
            "burn_in": float(burn_in),
            "seed": None if path is None else path.seed,
        },
    )


@dataclass
class LogMomentReport:
    mean_log_norm: float
    stderr_log_norm: float
    mean_log_inv_norm: float
    stderr_log_inv_norm: float
    n_used: int
    singular: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def log_moment_diagnostics(model: GSNS, samples, n_samples: int, seed: int,
                           t: float = 1.0, cond_limit: float = 1e14) -> LogMomentReport:
    """Monte Carlo estimates of ``E log+ |d_x Phi^1|`` and ``E log+ |(d_x Phi^1)^-1|``.

    Each draw pairs a state picked from ``samples`` with an independent noise
    path of length ``t``. Draws whose time-``t`` Jacobian has condition number
    above ``cond_limit`` are reported in ``singular`` and left out.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[1] != model.d or len(samples) == 0:
        raise ValueError(f"samples must be a nonempty (n, {model.d}) array")
    rng = np.random.default_rng(seed)
    n_steps = _grid_steps(t, model.config.dt)
    forced = len(model._cols) > 0 and model.config.scheme != "heun_deterministic"
    a, b, singular = [], [], []
    for draw in range(int(n_samples)):
        x = samples[rng.integers(len(samples))]
        path = None
        if forced:
            path = model.sample_noise(n_steps, int(rng.integers(2**63 - 1)))
        s = np.linalg.svd(flow_jacobian(model, x, path, t), compute_uv=False)
        if s[-1] <= 0 or s[0] / s[-1] > cond_limit:
            singular.append(draw)
            continue
        a.append(max(np.log(s[0]), 0.0))
        b.append(max(-np.log(s[-1]), 0.0))
    a, b = np.array(a), np.array(b)

    def se(v):
        return float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else float("nan")

    return LogMomentReport(
        mean_log_norm=float(a.mean()) if len(a) else float("nan"),
        stderr_log_norm=se(a),
        mean_log_inv_norm=float(b.mean()) if len(b) else float("nan"),
        stderr_log_inv_norm=se(b),
        n_used=len(a),
        singular=singular,
    )
