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

"""Linear regressors: least squares, lasso and elastic net.

Intercepts are never penalized: solvers work on centered data and recover
the intercept from the means.
"""

import warnings

import numpy as np

from . import LengthMismatch, NonConverged, logger

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 10000


def _center(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"Expected a 2-D matrix, got {X.ndim} dimensions.")
    if X.shape[0] != y.size:
        raise LengthMismatch(f"{X.shape[0]} rows but {y.size} targets.")
    if not y.size:
        raise ValueError("Can't fit on zero rows.")
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    return X - x_mean, y - y_mean, x_mean, y_mean


def least_squares(X, y):
    """Ordinary least squares with an intercept.

    Rank-deficient designs get the minimum-norm coefficients.
    """
    X_centered, y_centered, x_mean, y_mean = _center(X, y)
    coef = np.linalg.lstsq(X_centered, y_centered, rcond=None)[0]
    return {"coef": coef, "intercept": y_mean - float(x_mean @ coef)}


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0)


def duality_gap(X, y, coef, l1, l2):
    """Duality gap of the elastic-net objective on centered data.

    Objective is ``1/(2n) |y - Xw|^2 + l1 |w|_1 + l2/2 |w|^2``.
    """
    n_rows = y.size
    alpha, beta = l1 * n_rows, l2 * n_rows
    residual = y - X @ coef
    XtA = X.T @ residual - beta * coef
    dual_norm = np.max(np.abs(XtA), initial=0.0)
    residual_norm2 = residual @ residual
    if dual_norm > alpha:
        const = alpha / dual_norm
        gap = 0.5 * (residual_norm2 + residual_norm2 * const**2)
    else:
        const = 1.0
        gap = residual_norm2
    gap += (
        alpha * np.abs(coef).sum()
        - const * (residual @ y)
        + 0.5 * beta * (1 + const**2) * (coef @ coef)
    )
    return float(gap / n_rows)


def coordinate_descent(
    X, y, alpha, l1_ratio=1.0, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER
):
    """Cyclic coordinate descent on the elastic-net objective.

    Minimizes ``1/(2n) |y - Xw - b|^2 + alpha * l1_ratio * |w|_1
    + alpha * (1 - l1_ratio) / 2 * |w|^2``. Stops once a full sweep moves
    no coefficient by more than ``tol``. Running out of sweeps emits a
    ``NonConverged`` warning and returns the last iterate.

    Returns the parameters and a dict of solver diagnostics.
    """
    if alpha < 0:
        raise ValueError(f"Penalty {alpha!r} must be non-negative.")
    if not 0 <= l1_ratio <= 1:
        raise ValueError(f"Mixing ratio {l1_ratio!r} not within [0, 1].")
    X_centered, y_centered, x_mean, y_mean = _center(X, y)
    n_rows, n_cols = X_centered.shape
    l1 = alpha * l1_ratio
    l2 = alpha * (1 - l1_ratio)

    col_norms = np.sum(X_centered**2, axis=0) / n_rows
    coef = np.zeros(n_cols)
    residual = y_centered.copy()
    converged = False
    sweep = 0
    for sweep in range(1, max_iter + 1):
        max_step = 0.0
        for j in range(n_cols):
            if col_norms[j] == 0:
                continue
            old = coef[j]
            rho = X_centered[:, j] @ residual / n_rows + col_norms[j] * old
            new = soft_threshold(rho, l1) / (col_norms[j] + l2)
            if new != old:
                residual -= X_centered[:, j] * (new - old)
                coef[j] = new
                max_step = max(max_step, abs(new - old))
        if max_step < tol:
            converged = True
            break

    gap = duality_gap(X_centered, y_centered, coef, l1, l2)
    if converged:
        logger.debug(f"Coordinate descent converged in {sweep} sweeps, gap {gap:.3g}.")
    else:
        warnings.warn(
            NonConverged(
                f"Coordinate descent stopped after {max_iter} sweeps "
                f"with a duality gap of {gap:.3g}."
            )
        )
    params = {"coef": coef, "intercept": y_mean - float(x_mean @ coef)}
    diagnostics = {"converged": converged, "sweeps": sweep, "duality_gap": gap}
    return params, diagnostics


def linear_predict(params, X):
    return np.asarray(X, dtype=np.float64) @ params["coef"] + params["intercept"]
