import itertools
import math

import numpy as np
import pytest

from fetalctg import svm
from fetalctg.errors import SchemaError


def test_kernel_examples():
    rbf = svm.KernelSpec("rbf", 0.5)
    assert svm.kernel_eval(rbf, [1.0, 2.0], [1.0, 2.0]) == 1.0
    assert svm.kernel_eval(svm.KernelSpec("linear"), [1, 2], [3, 4]) == 11
    assert svm.kernel_eval(rbf, [0, 0], [1, 1]) == pytest.approx(math.exp(-1.0), abs=1e-15)
    assert svm.kernel_eval(rbf, [0, 0], [1, 1]) == pytest.approx(0.367879, abs=1e-6)


def test_kernel_errors():
    with pytest.raises(SchemaError):
        svm.kernel_eval(svm.KernelSpec("linear"), [1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        svm.KernelSpec("rbf", -1.0)


def test_kernel_matrix_matches_scalar(rng):
    k = svm.KernelSpec("rbf", 0.3)
    a, b = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
    m = k.matrix(a, b)
    for i, j in itertools.product(range(4), range(5)):
        assert m[i, j] == pytest.approx(svm.kernel_eval(k, a[i], b[j]), rel=1e-12)


def test_two_point_problem():
    m = svm.smo_train_binary(np.array([[0.0], [1.0]]), np.array([-1.0, 1.0]), svm.KernelSpec("linear"),
                             c=10.0, tol=1e-6)
    assert m.decision_function(np.array([[0.5]]))[0] == pytest.approx(0.0, abs=1e-6)
    assert len(m.support_vectors) == 2


def blobs(rng, n=40, gap=4.0):
    a = rng.normal(size=(n, 2)) * 0.5
    b = rng.normal(size=(n, 2)) * 0.5 + gap
    return np.vstack([a, b]), np.array([-1.0] * n + [1.0] * n)


def test_separable_blobs(rng):
    x, y = blobs(rng)
    m = svm.smo_train_binary(x, y, svm.KernelSpec("linear"), c=1000.0)
    assert np.all(np.sign(m.decision_function(x)) == y)


def test_xor_rbf():
    x = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
    y = np.array([-1, -1, 1, 1], dtype=float)
    m = svm.smo_train_binary(x, y, svm.KernelSpec("rbf", 1.0), c=10.0)
    assert np.all(np.sign(m.decision_function(x)) == y)


def full_alpha(m, n):
    alpha = np.zeros(n)
    alpha[m.support_indices] = np.abs(m.dual_coef)
    return alpha


@pytest.mark.parametrize("kernel", [svm.KernelSpec("linear"), svm.KernelSpec("rbf", 0.5)])
def test_dual_feasibility_and_kkt(rng, kernel):
    x = rng.normal(size=(80, 3))
    y = np.where(x[:, 0] + 0.5 * x[:, 1] ** 2 + 0.3 * rng.normal(size=80) > 0.3, 1.0, -1.0)
    c, tol = 2.0, 1e-3
    m = svm.smo_train_binary(x, y, kernel, c=c, tol=tol)
    assert m.converged
    alpha = full_alpha(m, len(y))
    assert np.all(alpha >= 0) and np.all(alpha <= c)
    assert abs(m.dual_coef.sum()) <= 1e-8
    margin = y * m.decision_function(x)
    free = (alpha > 0) & (alpha < c)
    assert np.all(margin[alpha == 0] >= 1 - tol)
    assert np.all(np.abs(margin[free] - 1) <= tol)
    assert np.all(margin[alpha == c] <= 1 + tol)
    assert np.all(np.sign(margin[free]) == 1)


def test_dual_objective_non_decreasing(rng):
    x = rng.normal(size=(60, 2))
    y = np.where(x[:, 0] * x[:, 1] > 0, 1.0, -1.0)
    m = svm.smo_train_binary(x, y, svm.KernelSpec("rbf", 1.0), c=5.0, record_objective=True)
    obj = np.array(m.objective_trace)
    assert len(obj) > 5
    assert np.all(np.diff(obj) >= -1e-10)


def test_iteration_cap_warns(rng):
    x = rng.normal(size=(60, 2))
    y = np.where(x[:, 0] * x[:, 1] > 0, 1.0, -1.0)
    with pytest.warns(svm.ConvergenceWarning, match="violators"):
        m = svm.smo_train_binary(x, y, svm.KernelSpec("rbf", 1.0), c=5.0, max_iter=3)
    assert not m.converged


def test_binary_input_checks(rng):
    x = rng.normal(size=(4, 2))
    with pytest.raises(ValueError):
        svm.smo_train_binary(x, np.ones(4), svm.KernelSpec("linear"))
    with pytest.raises(ValueError):
        svm.smo_train_binary(x, np.array([1.0, -1, 1, -1]), svm.KernelSpec("linear"), c=0.0)


def test_three_far_clusters(rng):
    centers = np.array([[0, 0], [10, 0], [0, 10]], dtype=float)
    x = np.vstack([c + rng.normal(size=(10, 2)) * 0.3 for c in centers])
    y = np.repeat([1, 2, 3], 10)
    model = svm.svm_fit(x, y)
    assert len(model.machines) == 3
    np.testing.assert_array_equal(svm.svm_predict(model, x), y)


def test_deterministic(rng):
    x = rng.normal(size=(50, 3))
    y = rng.integers(1, 4, size=50)
    a, b = svm.svm_fit(x, y), svm.svm_fit(x, y)
    for key in a.machines:
        np.testing.assert_array_equal(a.machines[key].dual_coef, b.machines[key].dual_coef)
        assert a.machines[key].bias == b.machines[key].bias


def test_vote_tie_goes_to_lowest_class():
    lin = svm.KernelSpec("linear")

    def constant(sign):
        return svm.BinarySvm(np.zeros((1, 1)), np.zeros(1), sign, lin)

    model = svm.SvmModel((1, 2, 3), {(1, 2): constant(1.0), (1, 3): constant(-1.0), (2, 3): constant(1.0)})
    np.testing.assert_array_equal(model.decision_votes(np.zeros((1, 1))), [[1, 1, 1]])
    assert model.predict(np.zeros((1, 1)))[0] == 1


def test_scale_gamma():
    x = np.array([[0.0, 2.0], [2.0, 0.0]])
    assert svm.scale_gamma(x) == pytest.approx(1 / (2 * 1.0))
