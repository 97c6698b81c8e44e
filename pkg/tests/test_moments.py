import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tsfit.core import ArmaModel, LaggedCovariance, RegularSeries, model_autocovariance, simulate
from tsfit.errors import DomainError, SingularMomentMatrixError
from tsfit.moments import (JOINT, PER_LAG, acf_to_dict, autocorrelation, autocovariance,
                           autocovariance_joint, autocovariance_per_lag, center, mean, pacf,
                           significance_band)
from tsfit.overlap import Engine, partition


def cov_from(gammas):
    g = np.asarray(gammas, dtype=float)
    if g.ndim == 1:
        g = g[:, None, None]
    return LaggedCovariance(g, 1000, PER_LAG)


@pytest.fixture(scope="module")
def ar1_long():
    return simulate(ArmaModel([[[0.5]]], [], [[1.0]]), 200_000, seed=21)


def test_mean_examples():
    assert mean(RegularSeries([[1.0], [2.0], [3.0]]))[0] == 2.0
    x = simulate(ArmaModel([], [], np.eye(2)), 100_000, seed=5)
    assert np.all(np.abs(mean(x)) < 0.02)
    assert mean(x, 4).tobytes() == mean(x, 1).tobytes()


def test_center_examples():
    s = RegularSeries([[1.0], [3.0]])
    np.testing.assert_array_equal(center(s, [2.0]).values, [[-1.0], [1.0]])
    assert center(s, [0.0]).values.tobytes() == s.values.tobytes()
    x = simulate(ArmaModel([], [], np.eye(3)), 1000, seed=6)
    assert np.all(np.abs(mean(center(x, mean(x)))) < 1e-12)
    with pytest.raises(DomainError):
        center(s, [1.0, 2.0])


def test_per_lag_worked_example():
    cov = autocovariance_per_lag(RegularSeries([1.0, -1.0, 1.0, -1.0]), None, 1)
    assert cov.at(0)[0, 0] == pytest.approx(4 / 3, abs=1e-15)
    assert cov.at(1)[0, 0] == pytest.approx(-1.5, abs=1e-15)
    assert cov.normalization == PER_LAG


def test_per_lag_matches_direct_formula():
    x = np.random.default_rng(7).normal(size=(300, 3))
    cov = autocovariance_per_lag(RegularSeries(x), 3, 5)
    n = len(x)
    for h in range(6):
        ref = x[:n - h].T @ x[h:] / (n - h - 1)
        np.testing.assert_allclose(cov.at(h), ref, rtol=1e-12, atol=1e-14)
        np.testing.assert_array_equal(cov.at(-h), cov.at(h).T)


def test_joint_matches_direct_formula():
    x = np.random.default_rng(8).normal(size=(200, 2))
    n, hm = len(x), 4
    cov = autocovariance_joint(RegularSeries(x), 3, hm)
    assert cov.normalization == JOINT
    for h in range(hm + 1):
        t = np.arange(hm, n - hm)
        ref = x[t].T @ x[t + h] / (n - 2 * hm - 1)
        np.testing.assert_allclose(cov.at(h), ref, rtol=1e-12, atol=1e-14)
        np.testing.assert_array_equal(cov.at(-h), cov.at(h).T)


def test_zero_series():
    z = RegularSeries(np.zeros((50, 2)))
    for est in ("per-lag", "joint"):
        assert np.all(autocovariance(z, None, 3, est).gamma == 0.0)


def test_lag_range_errors():
    s = RegularSeries(np.zeros(10))
    with pytest.raises(DomainError):
        autocovariance_per_lag(s, None, 9)
    with pytest.raises(DomainError):
        autocovariance_joint(s, None, 5)
    with pytest.raises(DomainError):
        autocovariance(s, None, 2, "textbook")


def test_ar1_estimates(ar1_long):
    pl = autocovariance_per_lag(ar1_long, 4, 3)
    assert abs(pl.at(0)[0, 0] - 4 / 3) < 0.03 and abs(pl.at(1)[0, 0] - 2 / 3) < 0.03
    jt = autocovariance_joint(ar1_long, 4, 3)
    assert np.max(np.abs(jt.gamma - pl.gamma)) < 0.05
    n, hm = ar1_long.n, 3
    bound = 10 * (2 * hm + 2) * np.abs(pl.gamma).max() / n
    assert np.max(np.abs(jt.gamma - pl.gamma)) < bound


@pytest.mark.parametrize("estimator", ["per-lag", "joint"])
def test_partition_count_independence(estimator):
    x = simulate(ArmaModel([np.diag([0.6, -0.4, 0.2])], [], np.eye(3)), 3000, seed=9)
    ref = autocovariance(x, 1, 6, estimator).gamma.tobytes()
    for k in (2, 3, 8):
        assert autocovariance(x, Engine(partitions=k, threads=4), 6, estimator).gamma.tobytes() == ref


def test_autocorrelation_examples():
    rho = autocorrelation(cov_from([1.25, 0.5]))
    assert rho.at(1)[0, 0] == pytest.approx(0.4)
    rho = autocorrelation(cov_from([4 * np.eye(2), 2 * np.eye(2)]))
    np.testing.assert_allclose(rho.at(1), 0.5 * np.eye(2))
    np.testing.assert_allclose(np.diag(rho.at(0)), 1.0)


def test_autocorrelation_degenerate_coordinate():
    g0 = np.diag([1.0, 0.0])
    with pytest.raises(DomainError, match="coordinate 1"):
        autocorrelation(cov_from([g0, g0]))


@given(arrays(np.float64, st.tuples(st.integers(40, 120), st.integers(1, 3)),
              elements=st.floats(-100, 100)))
def test_autocorrelation_bounded(values):
    values = values + np.random.default_rng(len(values)).normal(size=values.shape)
    s = RegularSeries(values)
    s = center(s, mean(s))
    rho = autocorrelation(autocovariance_per_lag(s, None, 3)).rho
    assert np.all(np.abs(rho) <= 1 + 1e-8 + 4.0 / s.n * 10)
    np.testing.assert_allclose(np.diag(rho[0]), 1.0, atol=1e-10)


def test_pacf_examples():
    ar1 = cov_from(0.5 ** np.arange(4) * 4 / 3)
    k = pacf(ar1, 2)
    assert k.at(1)[0, 0] == pytest.approx(0.5, abs=1e-10)
    assert abs(k.at(2)[0, 0]) < 1e-10
    wn = cov_from([np.eye(2), np.zeros((2, 2)), np.zeros((2, 2))])
    assert np.all(pacf(wn, 2).kappa[1:] == 0.0)


def test_pacf_cutoff_on_exact_ar():
    m = ArmaModel([np.array([[0.5, 0.1], [0.0, 0.3]]), np.array([[0.2, 0.0], [0.1, -0.2]])], [],
                  [[1.0, 0.2], [0.2, 1.0]])
    k = pacf(model_autocovariance(m, 6, k_trunc=500), 6)
    assert np.max(np.abs(k.kappa[3:])) < 1e-6
    np.testing.assert_allclose(k.at(2), m.ar[1], atol=1e-8)


def test_pacf_cutoff_on_simulated_ar2():
    m = ArmaModel([[[0.5]], [[0.25]]], [], [[1.0]])
    x = simulate(m, 200_000, seed=10)
    k = pacf(autocovariance_per_lag(x, 4, 3), 3)
    assert abs(k.at(3)[0, 0]) < 0.02


def test_pacf_singular_reports_order():
    g = np.ones((3, 2, 2))  # perfectly collinear coordinates
    with pytest.raises(SingularMomentMatrixError) as err:
        pacf(cov_from(g), 2)
    assert err.value.order == 1
    # a ridge makes it solvable
    assert np.all(np.isfinite(pacf(cov_from(g), 2, ridge=1e-3).kappa))


def test_significance_band():
    assert significance_band(10_000) == pytest.approx(0.0196)
    assert significance_band(4) == pytest.approx(0.98)
    assert significance_band(400) == pytest.approx(significance_band(100) / 2)


def test_acf_json_shape():
    cov = cov_from([1.25, 0.5, 0.0])
    out = acf_to_dict(autocorrelation(cov), 100, cov.normalization)
    assert out["h_max"] == 2 and out["d"] == 1 and len(out["values"]) == 3
    assert out["normalization"] == PER_LAG and out["band"] == pytest.approx(0.196)


def test_estimators_leave_no_refused_reads():
    x = RegularSeries(np.random.default_rng(11).normal(size=(500, 2)))
    parts = partition(x, 8, 5)
    from tsfit.moments import joint_kernel
    from tsfit.overlap import communication_counter, map_reduce
    map_reduce(parts, joint_kernel(5))
    assert communication_counter(parts) == 0
