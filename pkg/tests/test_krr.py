import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drsk import distributions as dist
from drsk import krr
from drsk.stein import SteinKernel, gram, median_bandwidth


@pytest.fixture
def setup():
    t = dist.gaussian_iso(0.0, 2)
    x = t.sample(20, 0)
    z = np.sin(x.sum(axis=1)) + 0.3
    k = SteinKernel.for_target(t, 1.5)
    return t, x, z, k


def test_lambda_rule():
    rule = krr.LambdaRule()
    assert rule(100) == pytest.approx(0.001)
    assert krr.LambdaRule(1.0, -1.0)(4) == 0.25


def test_scalar_system():
    t = dist.gaussian_iso(0.0, 1)
    k = SteinKernel.for_target(t, 1.0)
    x = np.array([[0.4]])
    c = 1.0 + k.k0(x[0], x[0])
    lam, z1 = 0.3, 1.7
    model = krr.fit(x, [z1], k, lam)
    assert model.beta[0] == pytest.approx(z1 / (c + lam), rel=1e-14)
    assert krr.predict(model, x)[0] == pytest.approx(c * z1 / (c + lam), rel=1e-14)
    assert krr.target_mean(model) == pytest.approx(z1 / (c + lam), rel=1e-14)


def test_zero_targets(setup):
    _, x, _, k = setup
    model = krr.fit(x, np.zeros(len(x)), k, 0.01)
    assert np.all(model.beta == 0)
    assert np.all(krr.predict(model, x) == 0)


def test_matches_independent_dense_solve(setup):
    _, x, z, k = setup
    lam = 0.01
    model = krr.fit(x, z, k, lam)
    Kp = np.array([[1.0 + k.k0(a, b) for b in x] for a in x])
    ref = np.linalg.solve(Kp + lam * len(x) * np.eye(len(x)), z)
    np.testing.assert_allclose(model.beta, ref, rtol=1e-8, atol=1e-10 * np.abs(ref).max())
    assert krr.residual(model, z) <= 1e-8 * np.linalg.norm(z)


def test_interpolates_as_ridge_vanishes(setup):
    _, x, z, k = setup
    model = krr.fit(x, z, k, 1e-10)
    np.testing.assert_allclose(krr.predict(model, x), z, atol=1e-4)


def test_constant_absorbed_by_surrogate():
    """A constant is absorbed only in the limit: the interpolant's target mean
    approaches the constant as the design fills out, it is not exact at finite m."""
    t = dist.gaussian_iso(0.0, 2)
    x = t.sample(80, 0)
    k = SteinKernel.for_target(t, median_bandwidth(x))
    c = np.full(len(x), 2.5)
    model = krr.fit(x, c, k, 1e-10)
    np.testing.assert_allclose(krr.cf_adjust(model, x, c), 2.5, atol=1e-3)


def test_cf_adjust_with_zero_model_is_identity(setup):
    _, x, z, k = setup
    zero = krr.KrrModel(np.zeros(len(x)), x, 0.01, k)
    np.testing.assert_array_equal(krr.cf_adjust(zero, x, z), z)
    assert np.all(krr.predict(zero, x[:3]) == 0)


def test_rejects_bad_inputs(setup):
    _, x, z, k = setup
    with pytest.raises(ValueError):
        krr.fit(x, z, k, 0.0)
    with pytest.raises(ValueError):
        krr.fit(x, z, k, -1.0)
    bad = z.copy()
    bad[0] = np.nan
    with pytest.raises(ValueError):
        krr.fit(x, bad, k, 0.01)
    with pytest.raises(ValueError):
        krr.fit(x, z[:-1], k, 0.01)


def test_objective_dominance(setup):
    _, x, z, k = setup
    model = krr.fit(x, z, k, 0.01)
    Kp = gram(k, x).Kplus
    best = krr.objective(model, z, Kplus=Kp)
    rng = np.random.default_rng(0)
    for _ in range(100):
        delta = rng.normal(scale=10 ** rng.uniform(-4, 0), size=len(x))
        assert best <= krr.objective(model, z, beta=model.beta + delta, Kplus=Kp) + 1e-14


def test_target_mean_monte_carlo(setup):
    t, x, z, k = setup
    model = krr.fit(x, z, k, 0.01)
    draws = t.sample(200_000, 9)
    s = krr.predict(model, draws)
    se = s.std(ddof=1) / np.sqrt(s.size)
    assert abs(s.mean() - krr.target_mean(model)) <= 4 * se


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 30))
def test_fit_is_linear_in_targets(seed, m):
    t = dist.gaussian_iso(0.0, 1)
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(m, 1))
    k = SteinKernel.for_target(t, 1.0)
    z1, z2 = rng.normal(size=m), rng.normal(size=m)
    b1 = krr.fit(x, z1, k, 0.01).beta
    b2 = krr.fit(x, z2, k, 0.01).beta
    b12 = krr.fit(x, z1 + z2, k, 0.01).beta
    np.testing.assert_allclose(b12, b1 + b2, atol=1e-10 * max(1.0, np.abs(b12).max()))
