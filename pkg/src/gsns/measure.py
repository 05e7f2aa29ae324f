"""Empirical stationary measure, moment and tail diagnostics, Pesin entropy."""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .dynamics import GSNS, _check_state, _grid_steps, shift_path
from .hypoellipticity import check_hypoelliptic
from .tangent import LyapunovReport, batch_means_stderr


@dataclass
class EmpiricalMeasure:
    samples: np.ndarray  # (n, d), equal weights
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if self.meta.get("thin", 1) < 1:
            raise ValueError("thinning interval must be >= 1")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def d(self) -> int:
        return self.samples.shape[1]


def sample_stationary(model: GSNS, burn_in: float, n_samples: int, thin: int, seed: int,
                      x0=None) -> EmpiricalMeasure:
    """Record every ``thin``-th state of one long trajectory after ``burn_in``.

    Raises :class:`~gsns.dynamics.BlowUpError` (carrying the time stamp) if the
    state stops being finite.
    """
    if n_samples < 1 or thin < 1:
        raise ValueError("n_samples and thin must be >= 1")
    dt = model.config.dt
    b = _grid_steps(burn_in, dt, "burn_in")
    x0 = np.zeros(model.d) if x0 is None else _check_state(x0, model.d)

    driven = model.pattern.driven_modes
    if not driven:
        warnings.warn("forcing is zero: the stationary measure is the point mass at 0",
                      stacklevel=2)
    elif not check_hypoelliptic(driven, model.N).hypoelliptic:
        warnings.warn(f"forcing set {driven} is not hypoelliptic; uniqueness is not assured",
                      stacklevel=2)

    total = b + n_samples * thin
    path = model.sample_noise(total, seed) if model.pattern.forced_components() else None
    q = model.flow(x0, path, b * dt) if b else x0
    rest = shift_path(path, b * dt) if path is not None else None
    states = model.trajectory(q, rest, n_samples * thin * dt, record_every=thin)
    return EmpiricalMeasure(
        samples=states[1:],
        meta={
            "burn_in": float(burn_in),
            "thin": int(thin),
            "seed": int(seed),
            "N": model.N,
            "epsilon": model.config.epsilon,
            "dt": dt,
            "scheme": model.config.scheme,
        },
    )


@dataclass
class MomentReport:
    mean_norm: float
    mean_sq_norm: float
    mode_variances: np.ndarray
    tail_slope: float
    stderr_mean_norm: float
    stderr_mean_sq_norm: float
    n_samples: int

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mode_variances"] = [float(v) for v in self.mode_variances]
        return out


def tail_slope(sq_norms, quantile: float = 0.95, n_bins: int = 20) -> float:
    """Least-squares slope of log bin counts against ``|x|^2`` above ``quantile``.

    Empty bins are skipped. Returns nan when fewer than two bins are occupied.
    """
    r2 = np.sort(np.asarray(sq_norms, dtype=float))
    thr = np.quantile(r2, quantile)
    tail = r2[r2 >= thr]
    if len(tail) < 2 or tail[-1] <= tail[0]:
        return float("nan")
    counts, edges = np.histogram(tail, bins=n_bins, range=(tail[0], tail[-1]))
    centers = 0.5 * (edges[1:] + edges[:-1])
    keep = counts > 0
    if keep.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(centers[keep], np.log(counts[keep]), 1)
    return float(slope)


def moments(measure: EmpiricalMeasure, n_batches: int = 20) -> MomentReport:
    """Plug-in moments with batch-means standard errors over the sample order."""
    x = measure.samples
    if len(x) < 100:
        raise ValueError(f"need at least 100 samples, got {len(x)}")
    sq = np.einsum("ij,ij->i", x, x)
    nrm = np.sqrt(sq)
    se, _ = batch_means_stderr(np.column_stack([nrm, sq]), 1.0, n_batches)
    return MomentReport(
        mean_norm=float(nrm.mean()),
        mean_sq_norm=float(sq.mean()),
        mode_variances=x.var(axis=0),
        tail_slope=tail_slope(sq),
        stderr_mean_norm=float(se[0]),
        stderr_mean_sq_norm=float(se[1]),
        n_samples=len(x),
    )


def stationary_sq_norm(model: GSNS) -> float:
    """Exact stationary ``E|q|^2`` from the energy balance.

    The nonlinearity conserves ``sum q^2 / |k|^2``, so at stationarity the
    dissipation ``2 eps E|q|^2`` matches the injection
    ``sum_r a_r^2 / |k_r|^2`` over forced components with coefficient ``a_r``.
    """
    norm2 = model.lattice.component_norm2[model._cols]
    return float(np.sum(model._amps**2 / norm2) / (2 * model.config.epsilon))


class EntropyEstimate(NamedTuple):
    value: float
    stderr: float


def pesin_entropy(report: LyapunovReport) -> EntropyEstimate:
    """Sum of positive exponents; needs the full spectrum."""
    if report.p < report.d:
        raise ValueError(f"entropy needs all {report.d} exponents, report has {report.p}")
    ex = np.asarray(report.exponents, dtype=float)
    pos = ex > 0
    se = np.asarray(report.stderr, dtype=float)
    return EntropyEstimate(float(ex[pos].sum()), float(np.sqrt(np.sum(se[pos] ** 2))))
