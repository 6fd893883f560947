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

"""Epsilon-insensitive support vector regression.

The dual is solved by sequential minimal optimization with second-order
working set selection. The ``2n`` dual variables are the ``alpha`` of the
upper tube side followed by the ``alpha*`` of the lower side.
"""

import warnings

import numpy as np
from boltons.dictutils import FrozenDict
from scipy.spatial.distance import cdist

from . import LengthMismatch, NonConverged, logger

DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 100000

# Floor of the curvature along a working pair.
TAU = 1e-12


def linear_kernel(A, B, gamma=None, degree=None):
    return A @ B.T


def rbf_kernel(A, B, gamma, degree=None):
    return np.exp(-gamma * cdist(A, B, "sqeuclidean"))


def poly_kernel(A, B, gamma, degree):
    return (gamma * (A @ B.T) + 1) ** degree


KERNELS = FrozenDict(
    {
        "linear": linear_kernel,
        "rbf": rbf_kernel,
        "poly": poly_kernel,
    }
)


def resolve_gamma(gamma, X):
    """``"scale"`` stands for ``1 / (n_features * var(X))``."""
    if gamma != "scale":
        if not gamma > 0:
            raise ValueError(f"Kernel coefficient {gamma!r} must be positive.")
        return float(gamma)
    variance = float(np.var(X))
    if variance == 0:
        return 1.0
    return 1.0 / (X.shape[1] * variance)


def kernel_matrix(A, B, kernel, gamma=None, degree=3):
    if kernel not in KERNELS:
        raise ValueError(f"Unknown {kernel} kernel.")
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    return KERNELS[kernel](A, B, gamma=gamma, degree=degree)


def _clip_pair(a, i, j, opposite, C):
    """Project an updated pair back into the ``[0, C]`` box.

    Keeps ``a[i] - a[j]`` constant for pairs of opposite signs and
    ``a[i] + a[j]`` for pairs of same sign.
    """
    if opposite:
        diff = a[i] - a[j]
        if diff > 0:
            if a[j] < 0:
                a[j], a[i] = 0.0, diff
            if a[i] > C:
                a[i], a[j] = C, C - diff
        else:
            if a[i] < 0:
                a[i], a[j] = 0.0, -diff
            if a[j] > C:
                a[j], a[i] = C, C + diff
    else:
        total = a[i] + a[j]
        if total > C:
            if a[i] > C:
                a[i], a[j] = C, total - C
            if a[j] > C:
                a[j], a[i] = C, total - C
        else:
            if a[j] < 0:
                a[j], a[i] = 0.0, total
            if a[i] < 0:
                a[i], a[j] = 0.0, total


def smo_solve(K, y, C, epsilon, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Solve the SVR dual for a precomputed kernel matrix.

    Returns the dual coefficients ``beta = alpha - alpha*``, the bias and a
    dict of solver diagnostics. Stops when the maximal KKT violation falls
    under ``tol``, or after ``max_iter`` iterations with a ``NonConverged``
    warning.
    """
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n_rows = y.size
    if K.shape != (n_rows, n_rows):
        raise LengthMismatch(f"Kernel matrix {K.shape} does not match {n_rows} rows.")
    if not C > 0:
        raise ValueError(f"Box constraint {C!r} must be positive.")
    if epsilon < 0:
        raise ValueError(f"Tube width {epsilon!r} must be non-negative.")

    sign = np.concatenate([np.ones(n_rows), -np.ones(n_rows)])
    sample = np.concatenate([np.arange(n_rows), np.arange(n_rows)])
    diag = K.diagonal()[sample]
    alphas = np.zeros(2 * n_rows)
    # Gradient of the dual objective, starting from the linear term.
    grad = np.concatenate([epsilon - y, epsilon + y])

    converged = False
    violation = np.inf
    iteration = 0
    for iteration in range(max_iter):
        scores = -sign * grad
        up = np.where(sign > 0, alphas < C, alphas > 0)
        low = np.where(sign > 0, alphas > 0, alphas < C)
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(scores[up])])
        violation = scores[i] - scores[low].min()
        if violation < tol:
            converged = True
            break

        # Pick j maximizing the decrease of the second-order approximation.
        k_i = K[sample[i]][sample]
        gains = scores[i] - scores
        curvature = diag[i] + diag - 2 * k_i
        curvature = np.where(curvature > 0, curvature, TAU)
        candidates = low & (gains > 0)
        objective = np.where(candidates, -(gains**2) / curvature, np.inf)
        j = int(np.argmin(objective))

        old_i, old_j = alphas[i], alphas[j]
        quad = max(diag[i] + diag[j] - 2 * K[sample[i], sample[j]], TAU)
        opposite = sign[i] != sign[j]
        if opposite:
            delta = (-grad[i] - grad[j]) / quad
            alphas[i] += delta
            alphas[j] += delta
        else:
            delta = (grad[i] - grad[j]) / quad
            alphas[i] -= delta
            alphas[j] += delta
        _clip_pair(alphas, i, j, opposite, C)

        delta_i = alphas[i] - old_i
        delta_j = alphas[j] - old_j
        grad += sign * (
            sign[i] * k_i * delta_i + sign[j] * K[sample[j]][sample] * delta_j
        )
    else:
        iteration = max_iter

    if converged:
        logger.debug(f"SMO converged in {iteration} iterations.")
    else:
        warnings.warn(
            NonConverged(
                f"SMO stopped after {max_iter} iterations "
                f"with a KKT violation of {violation:.3g}."
            )
        )

    bias = -_rho(alphas, grad, sign, C)
    beta = alphas[:n_rows] - alphas[n_rows:]
    diagnostics = {
        "converged": converged,
        "iterations": iteration,
        "kkt_violation": float(violation) if np.isfinite(violation) else 0.0,
    }
    return beta, bias, diagnostics


def _rho(alphas, grad, sign, C):
    """Offset of the decision function.

    Averaged over free variables, or the middle of the feasible interval if
    all variables are at a bound.
    """
    signed = sign * grad
    at_upper = alphas >= C
    at_lower = alphas <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        return float(signed[free].mean())
    ub_side = (at_upper & (sign < 0)) | (at_lower & (sign > 0))
    lb_side = (at_upper & (sign > 0)) | (at_lower & (sign < 0))
    upper = signed[ub_side].min(initial=np.inf)
    lower = signed[lb_side].max(initial=-np.inf)
    return float((upper + lower) / 2)


def fit_svr_params(
    X,
    y,
    kernel="rbf",
    C=1.0,
    epsilon=0.1,
    gamma="scale",
    degree=3,
    tol=DEFAULT_TOL,
    max_iter=DEFAULT_MAX_ITER,
):
    """ Fit an SVR and keep its support vectors. """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"Expected a 2-D matrix, got {X.ndim} dimensions.")
    if X.shape[0] != y.size:
        raise LengthMismatch(f"{X.shape[0]} rows but {y.size} targets.")
    gamma = resolve_gamma(gamma, X) if kernel != "linear" else None
    K = kernel_matrix(X, X, kernel, gamma, degree)
    beta, bias, diagnostics = smo_solve(K, y, C, epsilon, tol, max_iter)

    support = np.flatnonzero(beta)
    diagnostics["n_support"] = int(support.size)
    params = {
        "kernel": kernel,
        "gamma": gamma,
        "degree": degree,
        "support_vectors": X[support],
        "dual_coef": beta[support],
        "bias": bias,
    }
    return params, diagnostics


def svr_predict(params, X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if not params["dual_coef"].size:
        return np.full(X.shape[0], params["bias"])
    K = kernel_matrix(
        X,
        params["support_vectors"],
        params["kernel"],
        params["gamma"],
        params["degree"],
    )
    return K @ params["dual_coef"] + params["bias"]
