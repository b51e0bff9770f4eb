import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

from oracles import align_signs, kpca_oracle, kpca_oracle_transform, procrustes_residual
from provsem.errors import ConfigError, ProjectionError, ShapeError
from provsem.reduce import KpcaModel, classical_mds, default_gamma, kpca_fit_transform, kpca_transform


@pytest.mark.filterwarnings("ignore:kernel PCA kept")
@pytest.mark.parametrize("seed", range(5))
def test_kpca_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    n, d = rng.integers(4, 11), rng.integers(1, 6)
    X = rng.normal(size=(n, d))
    gamma = 0.3
    k = n - 1
    model, Z = kpca_fit_transform(X, gamma, k)
    vals, proj, _ = kpca_oracle(X, gamma, k)
    keep = vals > 1e-10
    np.testing.assert_allclose(model.eigenvalues, vals[keep], atol=1e-10)
    np.testing.assert_allclose(Z, align_signs(Z, proj[:, keep]), atol=1e-8)


def test_kpca_transform_of_new_points_matches_oracle():
    rng = np.random.default_rng(3)
    X, Y = rng.normal(size=(9, 3)), rng.normal(size=(4, 3))
    model, Z = kpca_fit_transform(X, 0.5, 5)
    vals, proj, K = kpca_oracle(X, 0.5, 5)
    proj = align_signs(Z, proj)
    np.testing.assert_allclose(kpca_transform(model, Y), kpca_oracle_transform(X, Y, 0.5, K, vals, proj), atol=1e-8)


@pytest.mark.filterwarnings("ignore:kernel PCA kept")
@settings(max_examples=25, deadline=None)
@given(st.integers(3, 10), st.integers(1, 5), st.integers(0, 10_000))
def test_kpca_self_transform_and_ordering(n, d, seed):
    X = np.random.default_rng(seed).normal(size=(n, d))
    model, Z = kpca_fit_transform(X, default_gamma(X), n - 1)
    assert np.all(np.diff(model.eigenvalues) <= 0)
    assert np.all(model.eigenvalues > 1e-10)
    np.testing.assert_allclose(kpca_transform(model, X), Z, atol=1e-8)
    # the largest-magnitude entry of each eigenvector is positive
    idx = np.argmax(np.abs(model.eigenvectors), axis=0)
    assert np.all(model.eigenvectors[idx, np.arange(model.k)] > 0)


def test_kpca_rank_deficiency_warns():
    X = np.array([[0.0], [0.0], [0.0], [1.0]])
    with pytest.warns(RuntimeWarning):
        model, Z = kpca_fit_transform(X, 1.0, 3)
    assert model.warning and model.k == 1 and Z.shape == (4, 1)


def test_kpca_argument_checks():
    X = np.random.default_rng(0).normal(size=(5, 2))
    with pytest.raises(ConfigError):
        kpca_fit_transform(X, 1.0, 5)
    with pytest.raises(ConfigError):
        kpca_fit_transform(X, 1.0, 0)
    with pytest.raises(ConfigError):
        kpca_fit_transform(X, 0.0, 2)
    model, _ = kpca_fit_transform(X, 1.0, 2)
    with pytest.raises(ShapeError):
        kpca_transform(model, np.ones((2, 3)))
    assert kpca_transform(model, np.zeros((0, 2))).shape == (0, 2)


def test_kpca_save_load(tmp_path):
    X = np.random.default_rng(0).normal(size=(7, 3))
    model, _ = kpca_fit_transform(X, 0.7, 4)
    model.save(tmp_path / "k")
    back = KpcaModel.load(tmp_path / "k")
    Y = np.random.default_rng(1).normal(size=(3, 3))
    np.testing.assert_array_equal(kpca_transform(back, Y), kpca_transform(model, Y))


def test_default_gamma_heuristics():
    X = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
    # per-feature variance 8/9 each -> 1 / (2 * 8/9)
    assert default_gamma(X, "scale") == pytest.approx(9 / 16)
    # squared distances 4, 4, 8 -> median 4
    assert default_gamma(X, "median") == pytest.approx(0.25)
    with pytest.raises(ConfigError):
        default_gamma(X, "other")


def test_mds_unit_square():
    sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    c = classical_mds(cdist(sq, sq), 2)
    assert procrustes_residual(sq, c.points) < 1e-9
    assert c.stress < 1e-9
    np.testing.assert_allclose(c.points.mean(axis=0), 0.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 25), st.integers(0, 10_000))
def test_mds_recovers_planar_sets(n, seed):
    P = np.random.default_rng(seed).uniform(-5, 5, size=(n, 2))
    c = classical_mds(cdist(P, P), 2)
    assert procrustes_residual(P, c.points) < 1e-9
    assert c.stress < 1e-9


def test_mds_rejects_invalid_matrices():
    with pytest.raises(ProjectionError):
        classical_mds(np.zeros((2, 3)))
    with pytest.raises(ProjectionError):
        classical_mds(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ProjectionError):
        classical_mds(np.array([[1.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ProjectionError):
        classical_mds(np.array([[0.0, -1.0], [-1.0, 0.0]]))


def test_mds_non_euclidean_has_positive_stress():
    # three points with a violated triangle inequality cannot embed exactly
    D = np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]])
    assert classical_mds(D, 2).stress > 0.01
