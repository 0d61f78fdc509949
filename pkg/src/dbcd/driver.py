"""Outer loop shared by all six methods, plus the sequential reference.

Every method follows the same per-iteration skeleton on P simulated
nodes, each owning one feature block:

  (a) pick a per-node working set S_p (random cyclic or greedy),
  (b) build a direction d on S_p from a local model of the objective,
  (c) agree on a global step size alpha (fixed at 1, or by a shared
      backtracking line search),
  (d) AllReduce delta_y = sum_p X_p d_p so every node can update its
      replica of y = Xw,
  (e) stop on a max-norm optimality tolerance, an iteration budget, an
      objective-gap target, or a divergence guard.

Methods differ only in steps (a)-(c):

  hydra   random sets, one decoupled step with conservative Lipschitz
          coefficients (omega * ||X_j||^2 * bound / n), fixed alpha = 1
  grock   greedy sets scored by the same decoupled model with the exact
          single-coordinate Lipschitz constant (omega = 1), alpha = 1
  pcd-r/s decoupled Newton step (Hessian diagonal + nu) with line search
  dbcd-r/s cycles of coordinate-descent Newton on a node-local proximal
          subproblem (strength mu), with line search

The line search is cooperative: one alpha for all nodes, accepted by the
standard sufficient-decrease test F(w + alpha d) <= F(w) + alpha*sigma*Delta
with Delta = g.d + lam(||w + d||_1 - ||w||_1) <= 0.  Each trial costs one
scalar AllReduce (the l1 part); the loss part is computable replica-locally
from y + alpha*delta_y.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .cluster import ClusterConfig, CostLedger, SimulatedCluster
from .datasets import Dataset, Partition, partition_features
from .errors import ConfigurationError, LineSearchError
from .metrics import (
    FIXED_STEP_METHODS,
    GREEDY_METHODS,
    IterationRecord,
    METHODS,
    computation_cost,
    rfvd,
)
from .model import (
    ModelState,
    get_loss,
    kkt_violation,
    l1_penalty_delta,
)
from .subproblems import (
    CyclicSelector,
    decoupled_step,
    greedy_scores,
    select_greedy,
    solve_prox_jacobi,
)

__all__ = [
    "MethodConfig",
    "Trajectory",
    "ReferenceSolution",
    "compute_delta",
    "line_search",
    "run_method",
    "reference_solve",
    "METHODS",
]

EPS_MODES = ("fixed-k", "eps-mu-over-2")
DIVERGENCE_FACTOR = 1e6
REFRESH_PERIOD = 50
REFRESH_DRIFT_TOL = 1e-10
MAX_LS_TRIALS = 60


@dataclass
class MethodConfig:
    """Everything that determines a run (data and thread count aside)."""

    method: str
    lam: float
    n_nodes: int = 4
    wss_frac: float = 0.1  # working set fraction r; WSS = ceil(r * m / P)
    mu: float = 1e-12
    nu: float = 1e-12
    inner_cycles: int = 10
    beta_ls: float = 0.5
    sigma: float = 0.01
    max_outer: int = 800
    kkt_tol: float = 1e-6
    seed: int = 0
    eps_mode: str = "fixed-k"
    omega: float = 2.0  # hydra's Lipschitz multiplier
    beta_comm: float = 100.0
    threads: int = 1
    rfvd_target: float | None = None

    def validate(self):
        if self.method not in METHODS:
            raise ConfigurationError(
                f"unknown method {self.method!r}; expected one of {METHODS}"
            )
        if not self.lam > 0:
            raise ConfigurationError(f"lam must be > 0, got {self.lam}")
        if self.n_nodes < 1:
            raise ConfigurationError(f"n_nodes must be >= 1, got {self.n_nodes}")
        if not 0 < self.wss_frac <= 1:
            raise ConfigurationError(
                f"wss_frac must lie in (0, 1], got {self.wss_frac}"
            )
        if self.mu < 0:
            raise ConfigurationError(f"mu must be >= 0, got {self.mu}")
        if not self.nu > 0:
            raise ConfigurationError(f"nu must be > 0, got {self.nu}")
        if self.inner_cycles < 1:
            raise ConfigurationError(
                f"inner_cycles must be >= 1, got {self.inner_cycles}"
            )
        if not 0 < self.beta_ls < 1:
            raise ConfigurationError(f"beta_ls must lie in (0, 1), got {self.beta_ls}")
        if not 0 < self.sigma < 1:
            raise ConfigurationError(f"sigma must lie in (0, 1), got {self.sigma}")
        if self.max_outer < 1:
            raise ConfigurationError(f"max_outer must be >= 1, got {self.max_outer}")
        if not self.kkt_tol > 0:
            raise ConfigurationError(f"kkt_tol must be > 0, got {self.kkt_tol}")
        if self.eps_mode not in EPS_MODES:
            raise ConfigurationError(
                f"eps_mode must be one of {EPS_MODES}, got {self.eps_mode!r}"
            )
        if not self.omega > 0:
            raise ConfigurationError(f"omega must be > 0, got {self.omega}")
        if self.beta_comm < 0:
            raise ConfigurationError(f"beta_comm must be >= 0, got {self.beta_comm}")
        if self.threads < 1:
            raise ConfigurationError(f"threads must be >= 1, got {self.threads}")

    def wss(self, m: int) -> int:
        return max(1, math.ceil(self.wss_frac * m / self.n_nodes))


@dataclass
class Trajectory:
    """Per-iteration records plus the final state of a run."""

    records: list
    state: ModelState
    stop_reason: str  # converged | max-outer | rfvd-target | diverged
    initial_objective: float
    final_kkt: float
    ledger: CostLedger
    config: MethodConfig
    partition: Partition


@dataclass
class ReferenceSolution:
    w: np.ndarray
    objective: float
    kkt: float
    n_iter: int
    converged: bool


def compute_delta(g_sel, d_sel, w_sel, lam: float) -> float:
    """Predicted change Delta = g.d + lam(||w+d||_1 - ||w||_1) over a set.

    Summed per coordinate so that directions made of certified-descent
    steps give a nonpositive float sum with no cancellation surprises.
    """
    g_sel = np.asarray(g_sel, dtype=float)
    d_sel = np.asarray(d_sel, dtype=float)
    w_sel = np.asarray(w_sel, dtype=float)
    if g_sel.size == 0:
        return 0.0
    return float(np.sum(g_sel * d_sel + lam * l1_penalty_delta(w_sel, d_sel)))


def line_search(
    loss,
    labels,
    y,
    dy,
    f_base: float,
    u_base: float,
    w_parts,
    d_parts,
    lam: float,
    delta: float,
    beta_ls: float,
    sigma: float,
    cluster: SimulatedCluster,
    u_delta_first: float | None = None,
    max_trials: int = MAX_LS_TRIALS,
):
    """Largest alpha in {1, beta, beta^2, ...} passing sufficient decrease.

    Per trial, the loss part of F(w + alpha d) is evaluated replica-locally
    from y + alpha*dy and the l1 part as one scalar AllReduce of per-node
    penalty changes.  ``u_delta_first`` lets the caller reuse the alpha = 1
    penalty change it already aggregated (for Delta), keeping the charge at
    exactly one scalar per trial.

    Returns (alpha, trials, f_new, u_new, y_new).  Raises LineSearchError
    when no trial within the budget passes, which signals a non-descent
    direction or numerical breakdown.
    """
    alpha = 1.0
    for k in range(max_trials + 1):
        y_trial = y + alpha * dy
        f_new = float(np.mean(loss.value(y_trial, labels)))
        if k == 0 and u_delta_first is not None:
            u_delta = u_delta_first
        else:
            u_delta = cluster.allreduce_scalar(
                [
                    lam * float(np.sum(l1_penalty_delta(wp, alpha * dp)))
                    for wp, dp in zip(w_parts, d_parts)
                ]
            )
        u_new = u_base + u_delta
        if f_new + u_new <= (f_base + u_base) + alpha * sigma * delta:
            return alpha, k + 1, f_new, u_new, y_trial
        alpha *= beta_ls
    raise LineSearchError(
        f"no sufficient decrease in {max_trials + 1} trials (delta={delta:.3e})"
    )


class _Node:
    """One simulated node: its feature block and column-local matrices."""

    def __init__(self, node_id, block, matrix, config, loss):
        self.node_id = node_id
        self.block = block
        csc = matrix.tocsc()[:, block]
        csc.sort_indices()
        self.X = csc
        self.X2 = csc.copy()
        self.X2.data = self.X2.data**2
        self.col_nnz = np.diff(csc.indptr)
        colsq = np.asarray(self.X2.sum(axis=0)).ravel()
        bound = loss.curvature_bound / matrix.n
        self.lip_hydra = np.maximum(config.omega * bound * colsq, 1e-12)
        self.lip_grock = np.maximum(bound * colsq, 1e-12)
        if config.method in ("hydra", "pcd-r", "dbcd-r"):
            self.selector = CyclicSelector(
                block, config.wss(matrix.m), config.seed, node_id
            )
        else:
            self.selector = None

    def columns(self, local_ids):
        cols = []
        for j in local_ids:
            lo, hi = self.X.indptr[j], self.X.indptr[j + 1]
            cols.append((self.X.indices[lo:hi], self.X.data[lo:hi]))
        return cols


def _greedy_curvature(node, method, dd, nu):
    """Curvature diagonal used by greedy scoring on one node's block."""
    if method == "grock":
        return node.lip_grock - nu  # scores add nu back
    return np.asarray((node.X2.T @ dd).ravel())


def run_method(config: MethodConfig, dataset: Dataset, f_star: float | None = None) -> Trajectory:
    """Run one method on a simulated cluster; returns the full trajectory.

    The iterate starts at w = 0.  One record is appended per outer
    iteration; convergence (max-norm optimality violation <= kkt_tol) is
    checked against the start-of-iteration gradient once at least one
    record exists, so even an immediately optimal problem logs one
    iteration.
    """
    config.validate()
    loss = get_loss(dataset.loss)
    n, m = dataset.n, dataset.m
    if n < 1 or m < 1:
        raise ConfigurationError("dataset must have at least one row and column")
    if config.n_nodes > m:
        raise ConfigurationError(
            f"cannot split {m} features over {config.n_nodes} nodes"
        )

    partition = partition_features(m, config.n_nodes, config.seed)
    cluster = SimulatedCluster(
        ClusterConfig(config.n_nodes, beta=config.beta_comm, threads=config.threads)
    )
    nodes = [
        _Node(p, block, dataset.matrix, config, loss)
        for p, block in enumerate(partition.blocks)
    ]

    method = config.method
    fixed_step = method in FIXED_STEP_METHODS
    greedy = method in GREEDY_METHODS
    labels = dataset.labels
    Xcsc = dataset.matrix.tocsc()
    nz = dataset.matrix.nnz
    eps = 0.5 * config.mu if config.eps_mode == "eps-mu-over-2" else None
    wss = config.wss(m)

    w = np.zeros(m)
    y = np.zeros(n)
    f_val = float(np.mean(loss.value(y, labels)))
    u_val = 0.0
    f_initial = f_val
    guard = DIVERGENCE_FACTOR * max(f_initial, np.finfo(float).tiny)

    records = []
    stop_reason = "max-outer"
    kkt_now = math.inf

    for t in range(config.max_outer):
        tick = time.perf_counter()
        comm_mark = cluster.ledger.comm_units

        b = loss.deriv(y, labels) / n
        dd = loss.second_deriv(y, labels) / n if (greedy or method == "pcd-r") else None

        def node_task(node):
            g_p = np.asarray((node.X.T @ b).ravel())
            if greedy:
                h_p = _greedy_curvature(node, method, dd, config.nu)
                scores = greedy_scores(w[node.block], g_p, h_p, config.nu, config.lam)
                sel = select_greedy(scores.q_bar, wss)
            else:
                s_global = node.selector.next_set()
                sel = np.searchsorted(node.block, s_global)
            w_sel = w[node.block[sel]]
            g_sel = g_p[sel]
            cycles_used = 0
            if method in ("hydra", "grock"):
                lip = node.lip_hydra if method == "hydra" else node.lip_grock
                d_p = decoupled_step(g_sel, lip[sel], config.lam, w_sel)
            elif method in ("pcd-r", "pcd-s"):
                if greedy:
                    h_sel = h_p[sel] + config.nu
                else:
                    h_sel = np.asarray((node.X2[:, sel].T @ dd).ravel()) + config.nu
                d_p = decoupled_step(g_sel, h_sel, config.lam, w_sel)
            else:  # dbcd-r / dbcd-s
                inner = solve_prox_jacobi(
                    node.columns(sel),
                    labels,
                    n,
                    loss,
                    y,
                    w_sel,
                    config.lam,
                    config.mu,
                    config.inner_cycles,
                    eps=eps,
                    beta_ls=config.beta_ls,
                    sigma=config.sigma,
                )
                d_p = inner.d
                cycles_used = inner.cycles_used
            if not fixed_step and d_p.size:
                # numerical hygiene: drop steps that cannot move w or
                # whose certified gain is not strictly negative, so the
                # aggregated Delta is nonpositive by construction
                d_p = d_p.copy()
                d_p[w_sel + d_p == w_sel] = 0.0
                gain = g_sel * d_p + config.lam * l1_penalty_delta(w_sel, d_p)
                d_p[gain >= 0.0] = 0.0
            dy_p = np.zeros(n)
            for pos, dj in zip(sel, d_p):
                if dj != 0.0:
                    lo, hi = node.X.indptr[pos], node.X.indptr[pos + 1]
                    dy_p[node.X.indices[lo:hi]] += dj * node.X.data[lo:hi]
            return g_p, sel, d_p, dy_p, cycles_used

        outputs = cluster.barrier_run(
            [lambda node=node: node_task(node) for node in nodes]
        )

        g_full = np.empty(m)
        for node, (g_p, _, _, _, _) in zip(nodes, outputs):
            g_full[node.block] = g_p
        kkt_now = float(np.max(kkt_violation(w, g_full, config.lam)))
        if kkt_now <= config.kkt_tol and records:
            stop_reason = "converged"
            break

        sel_global = [node.block[out[1]] for node, out in zip(nodes, outputs)]
        d_parts = [out[2] for out in outputs]
        w_parts = [w[s] for s in sel_global]
        g_parts = [out[0][out[1]] for out in outputs]
        s_size = int(sum(len(s) for s in sel_global))
        inner_used = max(out[4] for out in outputs)

        dy = cluster.allreduce_sum([out[3] for out in outputs])

        if fixed_step:
            alpha, tau = 1.0, 0
            delta = float("nan")
            y_new = y + dy
            f_new = float(np.mean(loss.value(y_new, labels)))
            pd_total = sum(
                float(np.sum(l1_penalty_delta(wp, dp)))
                for wp, dp in zip(w_parts, d_parts)
            )
            u_new = u_val + config.lam * pd_total
        else:
            u_delta_first = cluster.allreduce_scalar(
                [
                    config.lam * float(np.sum(l1_penalty_delta(wp, dp)))
                    for wp, dp in zip(w_parts, d_parts)
                ]
            )
            delta = float(
                np.sum(
                    [
                        compute_delta(gp, dp, wp, config.lam)
                        for gp, dp, wp in zip(g_parts, d_parts, w_parts)
                    ]
                )
            )
            alpha, tau, f_new, u_new, y_new = line_search(
                loss,
                labels,
                y,
                dy,
                f_val,
                u_val,
                w_parts,
                d_parts,
                config.lam,
                delta,
                config.beta_ls,
                config.sigma,
                cluster,
                u_delta_first=u_delta_first,
            )

        for s, d_p in zip(sel_global, d_parts):
            w[s] += alpha * d_p
        y = y_new
        f_val, u_val = f_new, u_new
        objective = f_val + u_val

        y_exact = Xcsc @ w
        drift = float(np.max(np.abs(y - y_exact)))
        scale = 1.0 + float(np.max(np.abs(y)))
        if (t + 1) % REFRESH_PERIOD == 0 and drift > REFRESH_DRIFT_TOL * scale:
            # safety net for pathological drift only: the threshold sits two
            # decades under the 1e-8 replica contract but far above ordinary
            # ulp accumulation, so rewriting y (and with it the objective
            # bookkeeping) never perturbs healthy monotone runs
            y = y_exact
            f_val = float(np.mean(loss.value(y, labels)))

        if greedy and s_size and nz:
            nnz_sel = int(sum(int(node.col_nnz[out[1]].sum()) for node, out in zip(nodes, outputs)))
            q = min(max(nnz_sel * m / (nz * s_size), 1.0), m / s_size)
        else:
            q = 1.0
        comp = computation_cost(
            method,
            nz,
            config.n_nodes,
            s_size,
            m,
            n,
            tau_ls=tau,
            k=config.inner_cycles,
            q=q,
        )
        comm = cluster.ledger.comm_units - comm_mark
        cluster.ledger.comp_units += comp

        rfvd_val = rfvd(objective, f_star) if f_star is not None else float("nan")
        records.append(
            IterationRecord(
                t=t,
                objective=objective,
                rfvd=rfvd_val,
                kkt=kkt_now,
                alpha=alpha,
                s_size=s_size,
                nnz_pct=100.0 * np.count_nonzero(w) / m,
                comp_model=comp,
                comm_model=comm,
                tau_ls=tau,
                wall_ms=(time.perf_counter() - tick) * 1e3,
                delta=delta,
                y_drift=drift / scale,
                inner_cycles=inner_used,
            )
        )

        if not math.isfinite(objective) or objective > guard:
            stop_reason = "diverged"
            break
        if (
            f_star is not None
            and config.rfvd_target is not None
            and rfvd_val <= config.rfvd_target
        ):
            stop_reason = "rfvd-target"
            break

    b = loss.deriv(y, labels) / n
    g_final = np.empty(m)
    for node in nodes:
        g_final[node.block] = np.asarray((node.X.T @ b).ravel())
    final_kkt = float(np.max(kkt_violation(w, g_final, config.lam)))

    state = ModelState(w=w, y=y, objective=f_val + u_val, penalty=u_val)
    return Trajectory(
        records=records,
        state=state,
        stop_reason=stop_reason,
        initial_objective=f_initial,
        final_kkt=final_kkt,
        ledger=cluster.ledger,
        config=config,
        partition=partition,
    )


def reference_solve(
    dataset: Dataset,
    lam: float,
    kkt_tol: float = 1e-10,
    max_outer: int = 5000,
    inner_cycles: int = 30,
    seed: int = 0,
) -> ReferenceSolution:
    """Sequential high-precision solve used as the ground-truth objective.

    Runs the proximal inner-solver method on a single node with the full
    feature set as working set and a tight optimality tolerance; the
    resulting objective serves as F* for relative-gap metrics.
    """
    config = MethodConfig(
        method="dbcd-s",
        lam=lam,
        n_nodes=1,
        wss_frac=1.0,
        inner_cycles=inner_cycles,
        kkt_tol=kkt_tol,
        max_outer=max_outer,
        seed=seed,
        beta_comm=0.0,
    )
    traj = run_method(config, dataset)
    return ReferenceSolution(
        w=traj.state.w,
        objective=traj.state.objective,
        kkt=traj.final_kkt,
        n_iter=len(traj.records),
        converged=traj.stop_reason == "converged",
    )
