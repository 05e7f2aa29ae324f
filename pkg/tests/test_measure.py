import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gsns.dynamics import GSNS, BlowUpError, SimConfig
from gsns.measure import (
    EmpiricalMeasure,
    moments,
    pesin_entropy,
    sample_stationary,
    stationary_sq_norm,
    tail_slope,
)
from gsns.tangent import LyapunovReport, lyapunov_spectrum

FORCING = {(0, 1): (1.0, 1.0), (1, 1): (1.0, 1.0)}


def model(eps=0.01, dt=1e-2, scheme="rk4", forcing=FORCING, N=2):
    return GSNS(N, SimConfig(eps, dt, scheme), forcing)


def report(ex, se=None):
    ex = np.asarray(ex, dtype=float)
    se = np.zeros_like(ex) if se is None else np.asarray(se, dtype=float)
    return LyapunovReport(p=len(ex), d=len(ex), exponents=ex, stderr=se, history=ex[None],
                          t_elapsed=1.0, n_batches=20)


def test_unforced_measure_collapses_with_warning():
    m = model(forcing=None)
    with pytest.warns(UserWarning):
        mu = sample_stationary(m, 1.0, 100, 10, 0, x0=np.ones(m.d) * 0.1)
    # the nonlinearity conserves |q|, dissipation contracts it at rate >= eps
    norms = np.linalg.norm(mu.samples, axis=1)
    assert np.all(np.diff(norms) < 0)
    assert norms[-1] <= 0.1 * np.sqrt(m.d) * np.exp(-0.01 * 11.0)


def test_zero_measure_moments():
    rep = moments(EmpiricalMeasure(np.zeros((100, 4))))
    assert rep.mean_norm == 0 and rep.mean_sq_norm == 0


def test_symmetric_measure_moments():
    v = np.array([3.0, 4.0, 0.0])
    x = np.array([v, -v] * 60)
    rep = moments(EmpiricalMeasure(x))
    assert rep.mean_norm == pytest.approx(5.0)
    np.testing.assert_allclose(x.mean(axis=0), 0.0)


def test_moments_need_samples():
    with pytest.raises(ValueError):
        moments(EmpiricalMeasure(np.zeros((99, 2))))


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (120, 3), elements=st.floats(-10, 10)), st.integers(0, 2**31))
def test_moments_permutation_invariant_and_jensen(x, seed):
    a = moments(EmpiricalMeasure(x))
    b = moments(EmpiricalMeasure(np.random.default_rng(seed).permutation(x)))
    assert a.mean_norm == pytest.approx(b.mean_norm, rel=1e-12, abs=1e-12)
    assert a.mean_sq_norm == pytest.approx(b.mean_sq_norm, rel=1e-12, abs=1e-12)
    assert a.mean_sq_norm >= a.mean_norm**2 * (1 - 1e-12)


def test_tail_slope_exponential_is_negative():
    r2 = np.random.default_rng(0).exponential(2.0, size=200_000)
    assert tail_slope(r2) == pytest.approx(-0.5, rel=0.2)


def test_exact_sq_norm_value():
    assert stationary_sq_norm(model(eps=0.01)) == pytest.approx(37.5)
    assert stationary_sq_norm(model(eps=0.005)) == pytest.approx(75.0)


def test_stationary_run_matches_energy_balance():
    m = model()
    mu = sample_stationary(m, 500.0, 2000, 200, 3)
    rep = moments(mu)
    assert abs(rep.mean_sq_norm - 37.5) < 4 * rep.stderr_mean_sq_norm
    assert rep.tail_slope < 0
    assert mu.meta["thin"] == 200 and len(mu) == 2000


def test_non_hypoelliptic_forcing_warns():
    m = model(forcing={(0, 1): (1.0, 1.0)})
    with pytest.warns(UserWarning, match="not hypoelliptic"):
        sample_stationary(m, 0.0, 10, 1, 0)


def test_blow_up_carries_time():
    m = model(dt=0.5, scheme="euler_maruyama")
    with pytest.raises(BlowUpError) as info:
        sample_stationary(m, 0.0, 100, 10, 0, x0=np.full(m.d, 50.0))
    assert info.value.time > 0


def test_sampling_deterministic():
    m = model()
    a = sample_stationary(m, 10.0, 50, 10, 4)
    b = sample_stationary(m, 10.0, 50, 10, 4)
    assert np.array_equal(a.samples, b.samples)


@pytest.mark.parametrize("ex,expected", [((0.3, -0.1, -0.5), 0.3), ((-0.1, -0.2), 0.0),
                                         ((0.2, 0.1, -0.4, -0.9), 0.3)])
def test_pesin_examples(ex, expected):
    assert pesin_entropy(report(ex)).value == pytest.approx(expected)


def test_pesin_rejects_partial_spectrum():
    rep = report([0.3, 0.1])
    rep.d = 4
    with pytest.raises(ValueError):
        pesin_entropy(rep)


def test_pesin_stderr_over_positive_terms():
    h = pesin_entropy(report([0.3, 0.1, -0.5], [0.03, 0.04, 0.5]))
    assert h.stderr == pytest.approx(0.05)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30))
def test_pesin_nonnegative_and_bounds_top(ex):
    ex = sorted(ex, reverse=True)
    h = pesin_entropy(report(ex)).value
    assert h >= 0
    assert (h == 0) == (ex[0] <= 0)
    assert h >= max(ex[0], 0)


def test_unforced_entropy_is_zero():
    m = model(forcing=None, dt=1e-2)
    rep = lyapunov_spectrum(m, np.ones(m.d) * 0.01, None, t_total=10.0)
    assert pesin_entropy(rep).value == 0
