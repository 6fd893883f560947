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

"""Two-layer perceptron regressor.

A single ``tanh`` hidden layer feeds a linear output. Training is plain
full-batch gradient descent on the mean squared error.
"""

import numpy as np

from . import DivergedLoss, LengthMismatch, logger

DEFAULT_HIDDEN_UNITS = 100
DEFAULT_EPOCHS = 200
DEFAULT_LEARNING_RATE = 1e-3

PARAMETER_KEYS = ("W1", "b1", "W2", "b2")


def init_parameters(n_inputs, hidden_units, seed):
    """Uniform initialization within ``1 / sqrt(fan_in)`` of zero."""
    if n_inputs < 1 or hidden_units < 1:
        raise ValueError("Network needs at least one input and one hidden unit.")
    rng = np.random.default_rng(seed)
    bound_1 = 1 / np.sqrt(n_inputs)
    bound_2 = 1 / np.sqrt(hidden_units)
    return {
        "W1": rng.uniform(-bound_1, bound_1, (n_inputs, hidden_units)),
        "b1": rng.uniform(-bound_1, bound_1, hidden_units),
        "W2": rng.uniform(-bound_2, bound_2, hidden_units),
        "b2": float(rng.uniform(-bound_2, bound_2)),
    }


def mlp_predict(params, X):
    hidden = np.tanh(np.asarray(X, dtype=np.float64) @ params["W1"] + params["b1"])
    return hidden @ params["W2"] + params["b2"]


def loss_and_gradient(params, X, y):
    """Mean squared error of the network and its gradient by back-propagation.

    The gradient is a dict with the same keys as ``params``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    hidden = np.tanh(X @ params["W1"] + params["b1"])
    error = hidden @ params["W2"] + params["b2"] - y
    loss = float(np.mean(error**2))

    d_output = 2 * error / y.size
    d_hidden = np.outer(d_output, params["W2"]) * (1 - hidden**2)
    gradient = {
        "W1": X.T @ d_hidden,
        "b1": d_hidden.sum(axis=0),
        "W2": hidden.T @ d_output,
        "b2": float(d_output.sum()),
    }
    return loss, gradient


def train_mlp(
    X,
    y,
    hidden_units=DEFAULT_HIDDEN_UNITS,
    epochs=DEFAULT_EPOCHS,
    learning_rate=DEFAULT_LEARNING_RATE,
    seed=0,
):
    """Train from a seeded initialization.

    Returns the parameters and diagnostics holding the loss before each
    epoch, plus the final loss.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"Expected a 2-D matrix, got {X.ndim} dimensions.")
    if X.shape[0] != y.size:
        raise LengthMismatch(f"{X.shape[0]} rows but {y.size} targets.")
    if epochs < 0 or not learning_rate > 0:
        raise ValueError("Epochs must be non-negative and learning rate positive.")

    params = init_parameters(X.shape[1], hidden_units, seed)
    loss_trace = []
    for epoch in range(epochs + 1):
        loss, gradient = loss_and_gradient(params, X, y)
        if not np.isfinite(loss):
            raise DivergedLoss(f"Loss diverged at epoch {epoch}.")
        loss_trace.append(loss)
        if epoch == epochs:
            break
        for key in PARAMETER_KEYS:
            params[key] = params[key] - learning_rate * gradient[key]

    logger.debug(
        f"MLP trained {epochs} epochs, "
        f"loss {loss_trace[0]:.4g} -> {loss_trace[-1]:.4g}."
    )
    return params, {"loss_trace": loss_trace, "final_loss": loss_trace[-1]}
