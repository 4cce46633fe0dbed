import numpy as np
import pytest
from hypothesis import given, strategies as st

from sslh.compatibility import (
    CompatibilityMatrix,
    Form,
    affine_basis,
    center_compatibility,
    from_h,
    grad_to_h,
    n_free_params,
    planted_pattern,
    to_h,
)
from sslh.errors import DimensionError, RepresentationError


def test_k3_reconstruction_formula():
    h1, h2, h3 = 0.2, 0.5, 0.1
    expected = np.array([
        [h1, h2, 1 - h1 - h2],
        [h2, h3, 1 - h2 - h3],
        [1 - h1 - h2, 1 - h2 - h3, h1 + 2 * h2 + h3 - 1],
    ])
    assert np.allclose(from_h([h1, h2, h3], 3), expected, atol=1e-15)


@given(st.integers(2, 7), st.integers(0, 10**6))
def test_h_round_trip_and_invariants(k, seed):
    h = np.random.default_rng(seed).normal(size=n_free_params(k))
    H = from_h(h, k)
    assert np.allclose(to_h(H), h, atol=1e-14)
    C = CompatibilityMatrix(H).check()
    R = C.residual().check()
    assert np.allclose(R.doubly_stochastic().values, H, atol=1e-15)
    assert np.allclose(C.h, h, atol=1e-14)


@given(st.integers(2, 6))
def test_affine_basis(k):
    H0, E = affine_basis(k)
    h = np.arange(1, n_free_params(k) + 1) / 10.0
    assert np.allclose(H0 + np.tensordot(h, E, axes=1), from_h(h, k))


@given(st.integers(2, 5), st.integers(0, 10**6))
def test_grad_to_h_chain_rule(k, seed):
    rng = np.random.default_rng(seed)
    T = rng.normal(size=(k, k))
    h = rng.normal(size=n_free_params(k))

    def f(hh):
        return float(np.sum((from_h(hh, k) - T) ** 2))

    g = grad_to_h(2 * (from_h(h, k) - T))
    num = np.array([(f(h + 1e-6 * e) - f(h - 1e-6 * e)) / 2e-6 for e in np.eye(h.size)])
    assert np.allclose(g, num, atol=1e-6)


def test_wrong_length():
    with pytest.raises(DimensionError):
        from_h([0.1, 0.2], 3)


def test_planted_pattern():
    assert np.allclose(planted_pattern(8), [[0.1, 0.8, 0.1], [0.8, 0.1, 0.1], [0.1, 0.1, 0.8]])
    assert np.allclose(planted_pattern(3), [[0.2, 0.6, 0.2], [0.6, 0.2, 0.2], [0.2, 0.2, 0.6]])


@pytest.mark.parametrize("h, rho", [(8, 0.7), (5, 4 / 7), (3, 0.4), (2, 0.25)])
def test_residual_spectral_radius(h, rho):
    R = CompatibilityMatrix.planted(h).residual().values
    assert np.isclose(np.abs(np.linalg.eigvalsh(R)).max(), rho, atol=1e-12)


def test_check_rejects_nonsymmetric():
    with pytest.raises(RepresentationError):
        CompatibilityMatrix(np.array([[0.5, 0.5], [0.4, 0.6]])).check()


def test_center_compatibility_requires_stochastic():
    R = CompatibilityMatrix.identity(3)
    assert R.form is Form.RESIDUAL
    with pytest.raises(RepresentationError):
        center_compatibility(R)


def test_dict_round_trip():
    C = CompatibilityMatrix.planted(5)
    D = CompatibilityMatrix.from_dict(C.to_dict())
    assert np.array_equal(C.values, D.values) and D.form is C.form
    R = C.residual()
    assert np.allclose(CompatibilityMatrix.from_dict(R.to_dict()).values, R.values)


# modulation properties on random instances

@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.sampled_from([0.0, 1.0, 2.5]))
def test_row_sum_preservation(seed, k, r):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=k)
    s = 0.0 if r == 0.0 else r
    x += (s - x.sum()) / k
    H = rng.normal(size=(k, k))
    H += (r - H.sum(axis=1, keepdims=True)) / k
    assert abs((x @ H).sum() - r * s) < 1e-12 * max(1.0, np.abs(x).sum() * np.abs(H).max() * k)


@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.floats(-5, 5))
def test_centering_invariance(seed, k, delta):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=k)
    x -= x.mean()
    H = rng.normal(size=(k, k))
    assert np.abs(x @ (H + delta) - x @ H).max() < 1e-12 * max(1.0, abs(delta)) * k
