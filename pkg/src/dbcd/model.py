"""Loss kernels, the regularized objective, and l1 optimality measures.

The trained model is a linear classifier ``score = x . w`` with objective

    F(w) = (1/n) * sum_i loss(y_i; c_i) + lam * ||w||_1,      y = X w,

where ``c`` holds labels in {-1, +1} (least-squares treats them as
regression targets).  Everything here is a pure function of arrays so the
same kernels serve both the whole-problem view and per-node block views.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError

__all__ = [
    "LossKind",
    "LOSSES",
    "get_loss",
    "objective_value",
    "gradient_block",
    "kkt_violation",
    "min_norm_subgradient",
    "l1_penalty_delta",
    "ModelState",
]


def _logistic_value(y, c):
    # log(1 + exp(-c*y)) via logaddexp, safe for large |y|
    return np.logaddexp(0.0, -(np.asarray(c, dtype=float) * y))


def _logistic_deriv(y, c):
    c = np.asarray(c, dtype=float)
    return -c * expit(-(c * y))


def _logistic_second(y, c):
    z = np.asarray(c, dtype=float) * y
    return expit(z) * expit(-z)


def _squared_hinge_value(y, c):
    r = np.maximum(1.0 - np.asarray(c, dtype=float) * y, 0.0)
    return 0.5 * r * r


def _squared_hinge_deriv(y, c):
    c = np.asarray(c, dtype=float)
    return -c * np.maximum(1.0 - c * y, 0.0)


def _squared_hinge_second(y, c):
    # generalized second derivative: 1 on the active side and at the kink
    z = np.asarray(c, dtype=float) * y
    return np.where(z <= 1.0, 1.0, 0.0)


def _least_squares_value(y, c):
    r = np.asarray(y, dtype=float) - c
    return 0.5 * r * r


def _least_squares_deriv(y, c):
    return np.asarray(y, dtype=float) - c


def _least_squares_second(y, c):
    return np.ones_like(np.asarray(y, dtype=float))


@dataclass(frozen=True)
class LossKind:
    """One scalar loss: value/derivatives in the score y, plus a curvature bound."""

    name: str
    curvature_bound: float  # global bound on the second derivative
    value: Callable = field(repr=False)
    deriv: Callable = field(repr=False)
    second_deriv: Callable = field(repr=False)


LOSSES = {
    "logistic": LossKind(
        "logistic", 0.25, _logistic_value, _logistic_deriv, _logistic_second
    ),
    "squared-hinge": LossKind(
        "squared-hinge",
        1.0,
        _squared_hinge_value,
        _squared_hinge_deriv,
        _squared_hinge_second,
    ),
    "least-squares": LossKind(
        "least-squares",
        1.0,
        _least_squares_value,
        _least_squares_deriv,
        _least_squares_second,
    ),
}


def get_loss(name: str) -> LossKind:
    try:
        return LOSSES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown loss {name!r}; expected one of {sorted(LOSSES)}"
        ) from None


def objective_value(loss: LossKind, y, c, w, lam: float) -> float:
    """F(w) = mean loss over examples + lam * ||w||_1, evaluated from y = Xw."""
    if lam < 0:
        raise ConfigurationError(f"lam must be >= 0, got {lam}")
    return float(np.mean(loss.value(y, c)) + lam * np.abs(w).sum())


def gradient_block(matrix, block, b) -> np.ndarray:
    """Gradient of the smooth part over one feature block: g_B = X_B^T b.

    ``b`` is the shared example-space vector loss'(y_i)/n, so each block
    gradient is computable from the node's own columns only.
    """
    block = np.asarray(block)
    return matrix.tocsc()[:, block].T @ np.asarray(b, dtype=float)


def kkt_violation(w, g, lam: float):
    """Per-coordinate violation of the l1 optimality conditions.

    |g_j + lam*sign(w_j)| where w_j != 0, and max(0, |g_j| - lam) at zero.
    The aggregate reported by the driver is the max norm of this vector.
    """
    if lam <= 0:
        raise ConfigurationError(f"lam must be > 0, got {lam}")
    w = np.asarray(w, dtype=float)
    g = np.asarray(g, dtype=float)
    return np.where(
        w != 0.0,
        np.abs(g + lam * np.sign(w)),
        np.maximum(np.abs(g) - lam, 0.0),
    )


def min_norm_subgradient(w, g, lam: float):
    """Minimum-norm element (xi, delta) with xi in the l1 subdifferential.

    xi_j = lam*sign(w_j) off zero; at zero it is the choice in [-lam, lam]
    that cancels as much of g_j as possible.  delta = g + xi is then the
    smallest-magnitude subgradient of the full objective.
    """
    if lam < 0:
        raise ConfigurationError(f"lam must be >= 0, got {lam}")
    w = np.asarray(w, dtype=float)
    g = np.asarray(g, dtype=float)
    xi = np.where(w != 0.0, lam * np.sign(w), np.clip(-g, -lam, lam))
    return xi, g + xi


def l1_penalty_delta(w, d):
    """Per-coordinate |w + d| - |w| without rounding noise from w + d.

    When the step cannot cross zero (|d| < |w|/2) the difference equals
    sign(w)*d exactly; using the direct form there would pick up the
    rounding of fl(w+d), which matters when accumulated descent
    guarantees are checked with zero tolerance.
    """
    w = np.asarray(w, dtype=float)
    d = np.asarray(d, dtype=float)
    direct = np.abs(w + d) - np.abs(w)
    return np.where(np.abs(d) < 0.5 * np.abs(w), np.sign(w) * d, direct)


@dataclass
class ModelState:
    """Primal iterate plus the replicated output vector y = Xw.

    ``objective`` and ``penalty`` carry the bookkeeping values the driver
    committed to (penalty is the lam*||w||_1 part), so descent checks are
    performed on one consistent float stream.
    """

    w: np.ndarray
    y: np.ndarray
    objective: float = float("nan")
    penalty: float = 0.0

    def drift(self, matrix) -> float:
        """max_i |y_i - (Xw)_i|; the replicated y must track Xw."""
        exact = matrix.tocsc() @ self.w
        if self.y.size == 0:
            return 0.0
        return float(np.max(np.abs(self.y - exact)))

    def refresh(self, matrix, tol: float = 1e-10) -> bool:
        """Recompute y = Xw when drift exceeds tol * (1 + ||y||_inf).

        Returns True when y was overwritten.  The guard keeps a no-op
        refresh from perturbing objective bookkeeping by a final ulp;
        the default tolerance sits well under the 1e-8 replica contract
        but above ordinary rounding accumulation.
        """
        exact = matrix.tocsc() @ self.w
        scale = 1.0 + (float(np.max(np.abs(self.y))) if self.y.size else 0.0)
        if self.y.size and float(np.max(np.abs(self.y - exact))) > tol * scale:
            self.y = exact
            return True
        return False
