import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drsk import distributions as dist
from drsk.stein import SteinKernel, gram, median_bandwidth, rbf
from oracles import stein_k0_fd_oracle


def kernel_for(target, h2=1.0):
    return SteinKernel.for_target(target, h2)


# -- rbf ---------------------------------------------------------------------


def test_rbf_values():
    assert rbf([0.3, 1.0], [0.3, 1.0], 2.0) == 1.0
    assert rbf([0.0], [1.0], 1.0) == pytest.approx(np.exp(-1.0), rel=1e-15)
    assert rbf([0.0, 5.0], [3.0, -1.0], 1e12) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        rbf([0.0], [1.0], 0.0)


# -- closed-form k0 ----------------------------------------------------------


def test_k0_standard_gaussian_diagonal():
    k = kernel_for(dist.gaussian_iso(0.0, 1))
    assert k.k0([0.0], [0.0]) == pytest.approx(2.0, abs=1e-15)
    for a in (-1.5, 0.7, 3.0):
        assert k.k0([a], [a]) == pytest.approx(2.0 + a * a, rel=1e-14)


@pytest.mark.parametrize(
    "target,h2,x,y,expected",
    [
        # values from symbolic differentiation of the defining formula
        (dist.gaussian_iso(0.0, 2), 1.5, [0.3, -0.7], [1.1, 0.4], -0.88528878027782588914),
        (dist.student_t_product(3.0, 1.0, 1.0, 1), 2.0, [0.5], [2.5], -0.97709100095004987444),
        (dist.gamma_product([50.0], [65.0]), 0.1, [0.5], [0.8], -146.46671992155083006),
    ],
)
def test_k0_symbolic_values(target, h2, x, y, expected):
    assert kernel_for(target, h2).k0(x, y) == pytest.approx(expected, rel=1e-13)


def test_k0_zero_score_on_diagonal_is_2d_over_h2():
    flat = SteinKernel(0.8, lambda x: np.zeros_like(np.asarray(x, float)), 3)
    assert flat.k0(np.ones(3), np.ones(3)) == pytest.approx(6 / 0.8)
    assert stein_k0_fd_oracle(flat.score, 0.8, np.ones(3), np.ones(3)) == pytest.approx(6 / 0.8, rel=1e-6)


def test_fd_oracle_rejects_large_steps():
    with pytest.raises(ValueError):
        stein_k0_fd_oracle(lambda x: -x, 1.0, [0.0], [0.0], step=1e-2)


def test_matrix_matches_pairwise():
    t = dist.gaussian_mixture_product([0.7, 0.3], [2.0, 1.0], [1.0, 1.0], 2)
    k = kernel_for(t, 1.7)
    x = t.sample(6, 0)
    y = t.sample(4, 1)
    M = k.k0_matrix(x, y)
    for i in range(6):
        for j in range(4):
            assert M[i, j] == pytest.approx(k.k0(x[i], y[j]), rel=1e-10, abs=1e-12)


def test_diag_and_kappa():
    t = dist.gaussian_iso(0.0, 2)
    k = kernel_for(t, 2.0)
    x = t.sample(5, 0)
    np.testing.assert_allclose(k.diag(x), [k.k0(r, r) for r in x], rtol=1e-12)
    assert k.kappa(x) == pytest.approx(np.sqrt(1 + k.diag(x).max()))
    assert np.all(k.diag(x) + 1 >= 1)


def test_dimension_checked():
    k = kernel_for(dist.gaussian_iso(0.0, 2))
    with pytest.raises(ValueError):
        k.k0_matrix(np.zeros((3, 3)))


def test_invalid_bandwidth():
    with pytest.raises(ValueError):
        SteinKernel(0.0, lambda x: -x, 1)
    with pytest.raises(ValueError):
        SteinKernel(np.inf, lambda x: -x, 1)


# -- gram --------------------------------------------------------------------


def test_gram_single_point():
    g = gram(kernel_for(dist.gaussian_iso(0.0, 1)), np.array([[0.0]]))
    assert g.K0.tolist() == [[2.0]]
    assert g.Kplus.tolist() == [[3.0]]


def test_gram_structure_and_duplicates():
    t = dist.gaussian_iso(0.0, 2)
    x = t.sample(3, 0)
    x = np.vstack([x, x[:1]])
    g = gram(kernel_for(t, 1.3), x)
    np.testing.assert_array_equal(g.Kplus - g.K0, np.ones((4, 4)))
    np.testing.assert_array_equal(g.K0, g.K0.T)
    np.testing.assert_allclose(g.K0[0], g.K0[3], rtol=1e-12)
    assert np.linalg.matrix_rank(g.K0) < 4


def test_gram_near_psd():
    t = dist.student_t_product(3.0, 1.0, 1.0, 2)
    x = t.sample(80, 2)
    K0 = gram(kernel_for(t, median_bandwidth(x)), x).K0
    ev = np.linalg.eigvalsh(K0)
    assert ev.min() >= -1e-8 * np.linalg.norm(K0, 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gram_permutation_equivariant(seed):
    t = dist.gaussian_iso(0.0, 2)
    x = t.sample(7, seed)
    perm = np.random.default_rng(seed).permutation(7)
    k = kernel_for(t, 1.1)
    np.testing.assert_allclose(gram(k, x[perm]).K0, gram(k, x).K0[np.ix_(perm, perm)], rtol=1e-12, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=2, max_size=2),
    st.lists(st.floats(-3, 3), min_size=2, max_size=2),
    st.floats(0.1, 10),
)
def test_k0_symmetric(x, y, h2):
    k = kernel_for(dist.gaussian_mixture_product([0.7, 0.3], [2.0, 1.0], [1.0, 1.0], 2), h2)
    assert abs(k.k0(x, y) - k.k0(y, x)) <= 1e-12 * max(1.0, abs(k.k0(x, y)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12))
def test_simplex_quadratic_form_near_nonnegative(seed, n):
    t = dist.gaussian_iso(0.0, 3)
    x = t.sample(n, seed)
    K0 = gram(kernel_for(t, 2.0), x).K0
    w = np.random.default_rng(seed).dirichlet(np.ones(n))
    assert w @ K0 @ w >= -1e-8 * np.linalg.norm(K0, 2)


# -- median heuristic ----------------------------------------------------------


@pytest.mark.parametrize(
    "pts,expected",
    [([0.0, 2.0], 4.0), ([0.0, 1.0, 3.0], 4.0), ([0.0, 1.0, 2.0, 3.0], 2.5)],
)
def test_median_bandwidth_values(pts, expected):
    assert median_bandwidth(np.array(pts)) == expected


def test_median_bandwidth_errors():
    with pytest.raises(ValueError):
        median_bandwidth(np.array([[1.0, 2.0]]))
    with pytest.raises(ValueError):
        median_bandwidth(np.ones((5, 2)))
