"""Per-node subproblem machinery: 1-d steps, working-set selection, inner solves.

Every method in the driver reduces to the same scalar building block: for
coordinate j with partial gradient g, curvature h > 0 and penalty weight
lam, the step d minimizes

    q(d) = g*d + (h/2)*d^2 + lam*|w + d| - lam*|w|.

Block methods differ in how many such steps they chain (one decoupled
pass vs. cycles of coordinate descent on a proximal subproblem) and in
how coordinates enter the working set (random cycling vs. greedy scores).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LossKind, l1_penalty_delta, min_norm_subgradient

__all__ = [
    "minimize_1d",
    "GreedyScores",
    "greedy_scores",
    "select_greedy",
    "CyclicSelector",
    "InnerResult",
    "solve_prox_jacobi",
    "decoupled_step",
    "approx_stop_satisfied",
]


def minimize_1d(g, h, lam, w):
    """Closed-form minimizer of g*d + (h/2)d^2 + lam(|w+d| - |w|).

    Accepts scalars or arrays (elementwise).  Requires h > 0.
    """
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(h <= 0.0):
        raise ValueError("curvature h must be positive")
    d = np.where(
        g - lam >= h * w,
        -(g - lam) / h,
        np.where(g + lam <= h * w, -(g + lam) / h, -w),
    )
    if d.ndim == 0:
        return float(d)
    return d


@dataclass
class GreedyScores:
    """Optimal 1-d steps and their predicted objective changes q_bar <= 0."""

    d_star: np.ndarray
    q_bar: np.ndarray


def greedy_scores(w, g, h_diag, nu, lam) -> GreedyScores:
    """Score every coordinate by the decrease its 1-d step would achieve.

    The score is evaluated in the algebraically equivalent form
    q_bar = -(h/2) d^2 + lam*(s*w - |w|) with s the (sub)gradient sign at
    w + d; both terms are nonpositive by construction, so q_bar <= 0
    holds exactly in floating point and q_bar = 0 iff d = 0.
    """
    w = np.asarray(w, dtype=float)
    g = np.asarray(g, dtype=float)
    curv = np.asarray(h_diag, dtype=float) + nu
    d = np.asarray(minimize_1d(g, curv, lam, w))
    wd = w + d
    if lam > 0:
        s = np.where(wd != 0.0, np.sign(wd), np.clip(-(g + curv * d) / lam, -1.0, 1.0))
        q = -0.5 * curv * d * d + lam * (s * w - np.abs(w))
    else:
        q = -0.5 * curv * d * d
    return GreedyScores(d_star=d, q_bar=q)


def select_greedy(q_bar, wss: int) -> np.ndarray:
    """Positions of the ``wss`` most negative scores, ascending.

    Ties go to the lowest index (stable sort); wss is clamped to the
    number of scores.
    """
    q_bar = np.asarray(q_bar)
    take = min(int(wss), q_bar.size)
    picked = np.argsort(q_bar, kind="stable")[:take]
    return np.sort(picked)


class CyclicSelector:
    """Random cyclic working sets: each cycle is a fresh permutation of the
    block split into ceil(|block|/wss) chunks, so every coordinate is
    visited exactly once per cycle.

    The permutation RNG is reseeded from (seed, node_id, cycle) at each
    cycle boundary, which keeps selections independent of how node tasks
    are interleaved.
    """

    def __init__(self, block, wss: int, seed: int, node_id: int):
        self.block = np.asarray(block, dtype=np.int64)
        self.wss = max(1, int(wss))
        self.n_chunks = max(1, -(-self.block.size // self.wss))
        self.seed = int(seed)
        self.node_id = int(node_id)
        self.cycle = 0
        self._chunks = []
        self._pos = 0

    def next_set(self) -> np.ndarray:
        if self._pos >= len(self._chunks):
            ss = np.random.SeedSequence((self.seed, self.node_id, self.cycle))
            rng = np.random.Generator(np.random.PCG64(ss))
            perm = rng.permutation(self.block)
            self._chunks = np.array_split(perm, self.n_chunks)
            self._pos = 0
            self.cycle += 1
        out = np.sort(self._chunks[self._pos])
        self._pos += 1
        return out


@dataclass
class InnerResult:
    """Outcome of one node-local inner solve over a working set."""

    d: np.ndarray
    cycles_used: int
    stop_reason: str  # "cycle-budget" | "approx-criterion"
    objective_trace: list | None = None


def _subproblem_objective(loss, y_loc, labels, n, w_loc, w_start, lam, mu):
    f = float(np.sum(loss.value(y_loc, labels))) / n
    prox = 0.5 * mu * float(np.sum((w_loc - w_start) ** 2))
    return f + prox + lam * float(np.sum(np.abs(w_loc)))


def solve_prox_jacobi(
    columns,
    labels,
    n: int,
    loss: LossKind,
    y,
    w_start,
    lam: float,
    mu: float,
    cycles: int,
    eps: float | None = None,
    curv_floor: float = 1e-12,
    beta_ls: float = 0.5,
    sigma: float = 0.01,
    max_ls_trials: int = 60,
    track_objective: bool = False,
) -> InnerResult:
    """Cyclic coordinate-descent Newton on one node's proximal subproblem.

    Minimizes, over the working-set coordinates only,

        (1/n) sum_i loss(y_i) + (mu/2)||w_S - w_S^start||^2 + lam ||w_S||_1

    where y tracks the node-local output vector (other blocks frozen).
    ``columns`` is a sequence of (row indices, values) pairs, one per
    working-set coordinate; coordinates are visited in the given order
    each cycle.  Each coordinate takes the closed-form 1-d Newton step
    guarded by a backtracking test on the subproblem objective itself.

    With ``eps`` given, cycles stop early once every coordinate satisfies
    |delta_j| <= eps * |d_j| for the subproblem's minimum-norm
    subgradient delta and accumulated displacement d (zero displacement
    requires a zero residual).  Otherwise the ``cycles`` budget is run in
    full.
    """
    size = len(columns)
    if size == 0:
        reason = "approx-criterion" if eps is not None else "cycle-budget"
        return InnerResult(np.zeros(0), 0, reason, [] if track_objective else None)

    w_start = np.asarray(w_start, dtype=float)
    w_loc = w_start.copy()
    y_loc = np.asarray(y, dtype=float).copy()
    trace = None
    if track_objective:
        trace = [_subproblem_objective(loss, y_loc, labels, n, w_loc, w_start, lam, mu)]

    cycles_used = 0
    stop_reason = "cycle-budget"
    for _cycle in range(int(cycles)):
        for j in range(size):
            rows, vals = columns[j]
            z = y_loc[rows]
            cj = labels[rows]
            g = float(vals @ loss.deriv(z, cj)) / n + mu * (w_loc[j] - w_start[j])
            h = float((vals * vals) @ loss.second_deriv(z, cj)) / n + mu
            h = max(h, curv_floor)
            d1 = minimize_1d(g, h, lam, w_loc[j])
            if d1 == 0.0:
                continue
            gain = g * d1 + lam * float(l1_penalty_delta(w_loc[j], d1))
            if gain >= 0.0:
                # numerically stale coordinate: no certified decrease left
                continue
            f0 = float(np.sum(loss.value(z, cj))) / n
            prox0 = 0.5 * mu * (w_loc[j] - w_start[j]) ** 2
            noise = 8.0 * np.finfo(float).eps * (abs(f0) + prox0 + lam * abs(w_loc[j]))
            if -gain <= noise:
                # the certified gain sits at the rounding floor of the
                # partial objective, where a backtracking test measures
                # only quantization noise; the gain bound |gain| >= h d^2/2
                # also caps the step, so take it on the model's certificate
                y_loc[rows] = z + d1 * vals
                w_loc[j] = w_loc[j] + d1
                continue
            alpha = 1.0
            accepted = False
            for _trial in range(max_ls_trials + 1):
                step = alpha * d1
                w_new = w_loc[j] + step
                f_new = float(np.sum(loss.value(z + step * vals, cj))) / n
                prox_new = 0.5 * mu * (w_new - w_start[j]) ** 2
                change = (
                    f_new
                    - f0
                    + prox_new
                    - prox0
                    + lam * float(l1_penalty_delta(w_loc[j], step))
                )
                if change <= alpha * sigma * gain:
                    accepted = True
                    break
                alpha *= beta_ls
            if not accepted:
                # the certified gain is below the rounding floor of the
                # partial loss sum; leave the coordinate where it is
                continue
            y_loc[rows] = z + step * vals
            w_loc[j] = w_new
        cycles_used += 1
        if track_objective:
            trace.append(
                _subproblem_objective(loss, y_loc, labels, n, w_loc, w_start, lam, mu)
            )
        if eps is not None:
            resid = np.empty(size)
            disp = w_loc - w_start
            for j in range(size):
                rows, vals = columns[j]
                z = y_loc[rows]
                cj = labels[rows]
                g = float(vals @ loss.deriv(z, cj)) / n + mu * disp[j]
                _, delta = min_norm_subgradient(w_loc[j], g, lam)
                resid[j] = delta
            if approx_stop_satisfied(resid, disp, eps):
                stop_reason = "approx-criterion"
                break

    return InnerResult(w_loc - w_start, cycles_used, stop_reason, trace)


def decoupled_step(g, coeffs, lam, w) -> np.ndarray:
    """One simultaneous pass of independent 1-d steps with fixed coefficients.

    Each coordinate minimizes its own quadratic model with curvature
    coeffs[j] (a Lipschitz constant or Hessian diagonal); coordinates do
    not see each other's updates.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if np.any(coeffs <= 0.0):
        raise ValueError("step coefficients must be positive")
    return np.asarray(minimize_1d(g, coeffs, lam, w), dtype=float)


def approx_stop_satisfied(delta, d, eps: float) -> bool:
    """True when |delta_j| <= eps*|d_j| for all j (d_j = 0 forces delta_j = 0)."""
    delta = np.asarray(delta, dtype=float)
    d = np.asarray(d, dtype=float)
    return bool(np.all(np.abs(delta) <= eps * np.abs(d)))
