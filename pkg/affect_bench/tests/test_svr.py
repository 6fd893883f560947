# Copyright the affect-bench contributors.
# All Rights Reserved.
#
# This program is Free Software; you can redistribute it and/or
# modify it under the terms of the GNU General Public License
# as published by the Free Software Foundation; either version 2
# of the License, or (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, write to the Free Software
# Foundation, Inc., 59 Temple Place - Suite 330, Boston, MA  02111-1307, USA.

import numpy as np
import pytest

from .. import LengthMismatch, NonConverged
from ..svr import (
    fit_svr_params,
    kernel_matrix,
    resolve_gamma,
    smo_solve,
    svr_predict,
)


@pytest.fixture
def wave():
    rng = np.random.default_rng(20)
    X = rng.uniform(-2, 2, size=(60, 2))
    y = np.sin(X[:, 0]) + 0.3 * X[:, 1] + rng.normal(scale=0.05, size=60)
    return X, y


def test_kernels():
    A = np.array([[1.0, 2.0], [0.0, -1.0]])
    B = np.array([[3.0, 1.0]])
    assert kernel_matrix(A, B, "linear").tolist() == [[5], [-1]]
    assert np.allclose(
        kernel_matrix(A, B, "rbf", gamma=0.5), [[np.exp(-2.5)], [np.exp(-6.5)]]
    )
    assert np.allclose(
        kernel_matrix(A, B, "poly", gamma=0.5, degree=3), [[3.5**3], [0.5**3]]
    )
    with pytest.raises(ValueError):
        kernel_matrix(A, B, "sigmoid")


def test_resolve_gamma():
    X = np.array([[0.0, 2.0], [2.0, 0.0]])
    assert resolve_gamma("scale", X) == pytest.approx(1 / (2 * 1.0))
    assert resolve_gamma(0.25, X) == 0.25
    assert resolve_gamma("scale", np.ones((3, 2))) == 1
    with pytest.raises(ValueError):
        resolve_gamma(0, X)


@pytest.mark.parametrize(
    "kernel, C", [("linear", 0.5), ("rbf", 1.0), ("rbf", 10.0), ("poly", 1.0)]
)
def test_box_constraints(wave, kernel, C):
    X, y = wave
    gamma = resolve_gamma("scale", X)
    K = kernel_matrix(X, X, kernel, gamma, 3)
    beta, _, diagnostics = smo_solve(K, y, C, 0.1, tol=1e-6)
    assert diagnostics["converged"]
    assert diagnostics["kkt_violation"] < 1e-6
    assert np.all(np.abs(beta) <= C + 1e-12)
    # Equality constraint of the dual.
    assert abs(beta.sum()) < 1e-9 * max(1.0, C)


@pytest.mark.parametrize("epsilon", [0.05, 0.2, 0.5])
def test_epsilon_tube(wave, epsilon):
    X, y = wave
    C = 2.0
    params, diagnostics = fit_svr_params(X, y, "rbf", C, epsilon, tol=1e-6)
    residual = y - svr_predict(params, X)

    beta = np.zeros(len(y))
    for vector, coef in zip(params["support_vectors"], params["dual_coef"]):
        beta[np.flatnonzero(np.all(X == vector, axis=1))] = coef

    inside = beta == 0
    free = (np.abs(beta) > 1e-9) & (np.abs(beta) < C - 1e-9)
    assert np.all(np.abs(residual[inside]) <= epsilon + 1e-4)
    assert np.allclose(np.abs(residual[free]), epsilon, atol=1e-4)
    # Support vectors sit on or outside the tube, on their side.
    assert np.all(np.sign(beta[~inside]) == np.sign(residual[~inside]))
    assert diagnostics["n_support"] == np.count_nonzero(beta)


def test_wider_tube_is_sparser(wave):
    X, y = wave
    counts = [
        fit_svr_params(X, y, "rbf", 1.0, epsilon)[1]["n_support"]
        for epsilon in (0.01, 0.1, 0.3)
    ]
    assert counts[0] > counts[1] > counts[2]


def test_constant_target():
    X = np.linspace(0, 1, 12).reshape(-1, 2)
    params, diagnostics = fit_svr_params(X, np.full(6, 0.4), "rbf", 1.0, 0.1)
    assert diagnostics["n_support"] == 0
    assert params["bias"] == pytest.approx(0.4)
    assert np.allclose(svr_predict(params, [[5.0, -3.0]]), [0.4])


def test_linear_fit():
    rng = np.random.default_rng(21)
    X = rng.normal(size=(50, 3))
    y = X @ [0.5, -0.2, 0.1] + 0.3
    params, _ = fit_svr_params(X, y, "linear", C=100.0, epsilon=0.001, tol=1e-6)
    X_test = rng.normal(size=(10, 3))
    expected = X_test @ [0.5, -0.2, 0.1] + 0.3
    assert np.allclose(svr_predict(params, X_test), expected, atol=0.01)


def test_rbf_fit(wave):
    X, y = wave
    params, _ = fit_svr_params(X, y, "rbf", C=10.0, epsilon=0.05)
    residual = y - svr_predict(params, X)
    assert np.sqrt(np.mean(residual**2)) < 0.1


def test_non_converged(wave):
    X, y = wave
    with pytest.warns(NonConverged):
        _, diagnostics = fit_svr_params(X, y, "rbf", 1.0, 0.01, max_iter=3)
    assert not diagnostics["converged"]
    assert diagnostics["iterations"] == 3


@pytest.mark.parametrize("C, epsilon", [(0, 0.1), (-1, 0.1), (1, -0.1)])
def test_invalid_parameters(wave, C, epsilon):
    X, y = wave
    with pytest.raises(ValueError):
        fit_svr_params(X, y, "rbf", C, epsilon)


def test_length_mismatch(wave):
    X, y = wave
    with pytest.raises(LengthMismatch):
        fit_svr_params(X, y[:-1])


@pytest.mark.parametrize("kernel", ["linear", "rbf"])
def test_row_order(wave, kernel):
    X, y = wave
    order = np.random.default_rng(22).permutation(len(y))
    params, _ = fit_svr_params(X, y, kernel, 1.0, 0.1, tol=1e-7)
    shuffled, _ = fit_svr_params(X[order], y[order], kernel, 1.0, 0.1, tol=1e-7)
    assert shuffled["gamma"] == params["gamma"]
    assert shuffled["bias"] == pytest.approx(params["bias"], abs=1e-5)
    assert np.allclose(svr_predict(shuffled, X), svr_predict(params, X), atol=1e-5)
    if kernel == "linear":
        weights = params["dual_coef"] @ params["support_vectors"]
        shuffled_weights = shuffled["dual_coef"] @ shuffled["support_vectors"]
        assert np.allclose(shuffled_weights, weights, atol=1e-5)
