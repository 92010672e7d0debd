import numpy as np
import pytest

from fetalctg import dataset as ds
from fetalctg import dimred, linalg
from fetalctg.errors import DegenerateError, SchemaError


@pytest.fixture(scope="module")
def standardized(ctg_like):
    return ds.fit_scaler(ctg_like).transform(ctg_like.features), ctg_like.labels


def test_pca_rank_one_line():
    t = np.linspace(-2, 2, 9)
    p = dimred.pca_fit(np.column_stack([t, t]), 2)
    r = 1 / np.sqrt(2)
    np.testing.assert_allclose(np.abs(p.components[:, 0]), [r, r], atol=1e-12)
    assert p.explained[1] == pytest.approx(0.0, abs=1e-12)


def test_pca_isotropic(rng):
    # centred orthogonal columns scaled so the sample covariance is exactly I
    q, _ = np.linalg.qr(rng.normal(size=(40, 4)) - 0)
    q -= q.mean(axis=0)
    q, _ = np.linalg.qr(q)
    x = q * np.sqrt(39)
    x -= x.mean(axis=0)
    cov = x.T @ x / 39
    x = x @ np.linalg.inv(np.linalg.cholesky(cov)).T
    p = dimred.pca_fit(x, 4)
    np.testing.assert_allclose(p.explained, 0.25, atol=1e-9)


def test_pca_full_rank_against_svd(standardized):
    x, _ = standardized
    p = dimred.pca_fit(x, 21)
    z = dimred.project(p, x)
    cov = np.cov(z, rowvar=False)
    sv = np.linalg.svd(x - x.mean(axis=0), compute_uv=False)
    np.testing.assert_allclose(np.diag(cov), sv ** 2 / (x.shape[0] - 1), atol=1e-6)
    off = cov - np.diag(np.diag(cov))
    assert np.abs(off).max() <= 1e-6
    np.testing.assert_allclose(p.components.T @ p.components, np.eye(21), atol=1e-8)
    assert np.all(np.diff(p.explained) <= 1e-15)
    assert p.explained.sum() == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(dimred.inverse_project(p, z), x, atol=1e-8)


def test_pca_variance_target(standardized):
    x, _ = standardized
    full = dimred.pca_fit(x, 21)
    p = dimred.pca_fit(x, 0.95)
    cumulative = np.cumsum(full.explained)
    assert cumulative[p.k - 1] >= 0.95 - 1e-12
    assert p.k == 1 or cumulative[p.k - 2] < 0.95


def test_pca_argument_errors(standardized):
    x, _ = standardized
    for k in (0, 22, 1.5, 0.0):
        with pytest.raises(ValueError):
            dimred.pca_fit(x, k)


def test_project_centres_the_mean(standardized):
    x, y = standardized
    for p in (dimred.pca_fit(x), dimred.lda_fit(x, y)):
        np.testing.assert_allclose(dimred.project(p, x.mean(axis=0)[None, :]), 0.0, atol=1e-12)


def test_project_is_affine(standardized, rng):
    x, y = standardized
    p = dimred.lda_fit(x, y)
    a, b = x[3], x[10]
    alpha = rng.uniform()
    lhs = dimred.project(p, (alpha * a + (1 - alpha) * b)[None, :])
    rhs = alpha * dimred.project(p, a[None, :]) + (1 - alpha) * dimred.project(p, b[None, :])
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_project_single_row_by_hand(standardized):
    x, y = standardized
    p = dimred.lda_fit(x, y)
    row = x[0]
    expected = [sum((row[i] - p.mean[i]) * p.components[i, j] for i in range(21)) for j in range(2)]
    np.testing.assert_allclose(dimred.project(p, row[None, :])[0], expected, atol=1e-12)


def test_project_column_mismatch(standardized):
    x, y = standardized
    with pytest.raises(SchemaError):
        dimred.project(dimred.pca_fit(x), x[:, :5])


def test_lda_isotropic_clouds_align_with_mean_difference():
    offsets = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
    mu_a, mu_b = np.array([0.0, 0.0]), np.array([3.0, 1.0])
    x = np.vstack([mu_a + offsets, mu_b + offsets])
    y = np.array([1] * 4 + [2] * 4)
    p = dimred.lda_fit(x, y, k=1)
    diff = (mu_b - mu_a) / np.linalg.norm(mu_b - mu_a)
    angle = np.arccos(min(1.0, abs(p.components[:, 0] @ diff)))
    assert angle < 1e-3


def test_lda_three_classes_at_most_two(standardized):
    x, y = standardized
    p = dimred.lda_fit(x, y)
    assert p.k == 2
    with pytest.raises(ValueError):
        dimred.lda_fit(x, y, k=3)


def test_lda_generalized_eigen_residual(standardized):
    x, y = standardized
    p = dimred.lda_fit(x, y)
    s_w, s_b = dimred.scatter_matrices(x, y)
    for j in range(p.k):
        w = p.components[:, j]
        lam = (w @ s_b @ w) / (w @ s_w @ w)
        assert lam == pytest.approx(p.explained[j], rel=1e-8)
        assert np.abs(s_b @ w - lam * s_w @ w).max() <= 1e-6
    np.testing.assert_allclose(np.linalg.norm(p.components, axis=0), 1.0)


def test_lda_shift_invariance(standardized):
    x, y = standardized
    a = dimred.lda_fit(x, y)
    b = dimred.lda_fit(x + np.arange(21) * 0.37, y)
    np.testing.assert_allclose(a.components, b.components, atol=1e-8)


def test_lda_singular_within_scatter_uses_ridge(rng, caplog):
    x = rng.normal(size=(60, 4))
    x[:, 3] = x[:, 0] + x[:, 1]
    y = np.repeat([1, 2, 3], 20)
    p = dimred.lda_fit(x, y)
    assert np.all(np.isfinite(p.components))


def test_lda_degenerate_class(rng):
    x = rng.normal(size=(10, 3))
    y = np.array([1] * 5 + [2] * 4 + [3])
    with pytest.raises(DegenerateError):
        dimred.lda_fit(x, y)


def test_projection_text_round_trip(standardized, tmp_path):
    x, y = standardized
    p = dimred.lda_fit(x, y)
    p.save(tmp_path / "lda.txt")
    q = dimred.Projection.from_text((tmp_path / "lda.txt").read_text())
    assert q.kind == "lda" and q.k == 2
    np.testing.assert_array_equal(q.components, p.components)
    np.testing.assert_array_equal(q.mean, p.mean)


def test_eigensolver_on_covariance(standardized):
    x, _ = standardized
    cov = np.cov(x, rowvar=False)
    eig = linalg.sym_eigen(cov, tol=1e-8)
    assert np.abs(cov @ eig.eigenvectors - eig.eigenvectors * eig.eigenvalues).max() <= 1e-8 * linalg.inf_norm(cov)
