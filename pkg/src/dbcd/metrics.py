"""Run metrics, the per-iteration cost model, CSV output, synthetic data.

The cost model counts, per outer iteration and per node, multiples of a
few primitive quantities: passes over the node's nonzeros (nz/P), passes
over the selected columns' share ((nz/P)(|S|/m)), per-coordinate updates
(|S|), and example-space work (n).  Communication is beta scalars per
tree level, with log2(P) levels.  Methods that pick coordinates by score
touch denser-than-average columns; the skew factor q in [1, m/|S|]
scales their selected-column terms.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset, SparseMatrix
from .errors import ConfigurationError

__all__ = [
    "IterationRecord",
    "CSV_COLUMNS",
    "rfvd",
    "auprc",
    "CostParams",
    "cost_estimate",
    "computation_cost",
    "communication_cost",
    "emit_csv",
    "synth_correlated_dataset",
    "synth_dataset",
    "save_reference",
    "load_reference",
    "FIXED_STEP_METHODS",
    "LINE_SEARCH_METHODS",
    "METHODS",
]

FIXED_STEP_METHODS = ("hydra", "grock")
LINE_SEARCH_METHODS = ("pcd-r", "pcd-s", "dbcd-r", "dbcd-s")
METHODS = FIXED_STEP_METHODS + LINE_SEARCH_METHODS

# methods whose working set comes from greedy scores over the whole block
GREEDY_METHODS = ("grock", "pcd-s", "dbcd-s")


@dataclass
class IterationRecord:
    """One outer iteration of any method.

    ``objective`` is F(w^{t+1}) as committed by the update; ``kkt`` is the
    max-norm optimality violation at the start-of-iteration iterate;
    ``y_drift`` is the replica residual ||y - Xw||_inf / (1 + ||y||_inf).
    ``wall_ms`` and the trailing diagnostic fields are in-memory only: the
    CSV contract is deterministic, so measured times stay out of it.
    """

    t: int
    objective: float
    rfvd: float
    kkt: float
    alpha: float
    s_size: int
    nnz_pct: float
    comp_model: float
    comm_model: float
    tau_ls: int
    wall_ms: float = 0.0
    delta: float = float("nan")
    y_drift: float = float("nan")
    inner_cycles: int = 0


CSV_COLUMNS = (
    "t",
    "F",
    "rfvd",
    "kkt",
    "alpha",
    "S_size",
    "nnz_pct",
    "comp_model",
    "comm_model",
    "tau_ls",
)

_CSV_FIELDS = (
    "t",
    "objective",
    "rfvd",
    "kkt",
    "alpha",
    "s_size",
    "nnz_pct",
    "comp_model",
    "comm_model",
    "tau_ls",
)


def rfvd(f_t: float, f_star: float) -> float:
    """log10 relative objective gap, clamped to -16 near (or below) f_star."""
    if not f_star > 0:
        raise ValueError(f"reference objective must be positive, got {f_star}")
    gap = f_t - f_star
    if gap <= 1e-16 * f_star:
        return -16.0
    return float(np.log10(gap / f_star))


def auprc(scores, labels) -> float:
    """Area under the precision-recall curve with tie-aware grouping.

    Points are emitted once per distinct score (descending); the area is
    the staircase sum (R_i - R_{i-1}) * P_i starting from recall 0.  With
    every score equal this degenerates to the positive fraction.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-d and aligned")
    pos = labels > 0
    n_pos = int(np.count_nonzero(pos))
    if n_pos == 0:
        raise ValueError("AUPRC undefined without positive labels")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    tp = np.cumsum(pos[order])
    # last position of each tie group
    last = np.nonzero(np.append(s[1:] != s[:-1], True))[0]
    tp_g = tp[last].astype(float)
    count_g = (last + 1).astype(float)
    recall = tp_g / n_pos
    precision = tp_g / count_g
    prev_recall = np.concatenate(([0.0], recall[:-1]))
    # fsum: the result is the correctly rounded sum of the stair terms,
    # independent of accumulation order
    return math.fsum((recall - prev_recall) * precision)


@dataclass
class CostParams:
    """Inputs to the per-iteration cost rows."""

    nz: int
    n: int
    m: int
    n_nodes: int
    s_size: int
    beta: float = 100.0
    tau_ls: int = 0
    k: int = 0
    q: float = 1.0

    def __post_init__(self):
        if min(self.nz, self.n, self.m) < 0 or self.n_nodes < 1:
            raise ConfigurationError("cost parameters out of range")
        if not 0 <= self.s_size <= self.m:
            raise ConfigurationError(f"s_size must lie in [0, m], got {self.s_size}")
        if self.q < 1.0:
            raise ConfigurationError(f"skew factor q must be >= 1, got {self.q}")


def computation_cost(
    method: str,
    nz: int,
    n_nodes: int,
    s_size: int,
    m: int,
    n: int,
    tau_ls: int = 0,
    k: int = 0,
    q: float = 1.0,
) -> float:
    """Modeled per-node computation for one outer iteration of ``method``.

    Row shape: c1*(nz/P) + c2*(nz/P)(|S|/m) + c3*|S| + c4*n + c5*(nz/P)(|S|/m)
    with (c1..c5) per method; greedy methods carry the skew factor q and
    line-search methods repeat the |S| and n terms tau_ls times.
    """
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}")
    full = nz / n_nodes
    sel = full * (s_size / m) if m else 0.0
    tau = float(tau_ls)
    rows = {
        "hydra": (0.0, 1.0, 1.0, 0.0, 1.0),
        "grock": (1.0, q, 1.0, 0.0, q),
        "pcd-r": (0.0, 1.0, tau, tau, 1.0),
        "pcd-s": (1.0, q, tau, tau, q),
        "dbcd-r": (0.0, float(k), tau, tau, 1.0),
        "dbcd-s": (1.0, float(k) * q, tau, tau, q),
    }
    c1, c2, c3, c4, c5 = rows[method]
    return c1 * full + c2 * sel + c3 * s_size + c4 * n + c5 * sel


def communication_cost(
    method: str, n: int, n_nodes: int, beta: float, tau_ls: int = 0
) -> float:
    """Modeled per-iteration communication: beta scalars per tree level.

    Fixed-step methods move the n-vector delta-y once; line-search
    methods additionally move one scalar per trial.  Uses a smooth
    log2(P) (the runtime ledger uses the integer tree depth instead).
    """
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}")
    if n_nodes == 1:
        return 0.0
    scalars = n + (tau_ls if method in LINE_SEARCH_METHODS else 0)
    return beta * scalars * math.log2(n_nodes)


def cost_estimate(method: str, params: CostParams):
    """(computation, communication) per outer iteration for ``method``."""
    comp = computation_cost(
        method,
        params.nz,
        params.n_nodes,
        params.s_size,
        params.m,
        params.n,
        tau_ls=params.tau_ls,
        k=params.k,
        q=params.q,
    )
    comm = communication_cost(
        method, params.n, params.n_nodes, params.beta, tau_ls=params.tau_ls
    )
    return comp, comm


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def emit_csv(trajectory, target) -> None:
    """Write per-iteration records as CSV (12 significant digits).

    Only deterministic fields are written, so re-running an identical
    configuration reproduces the file byte for byte.
    """
    records = getattr(trajectory, "records", trajectory)
    if not records:
        raise ValueError("trajectory has no records to emit")
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="utf-8", newline="\n") as fh:
            emit_csv(trajectory, fh)
        return
    target.write(",".join(CSV_COLUMNS) + "\n")
    for rec in records:
        target.write(",".join(_fmt(getattr(rec, f)) for f in _CSV_FIELDS) + "\n")


def synth_dataset(
    n: int,
    m: int,
    density: float,
    sparsity_target: float,
    seed: int = 0,
    noise: float = 0.1,
    loss: str = "logistic",
):
    """Random sparse design with a planted sparse linear separator.

    Entries are standard normal, placed independently per column with the
    given density.  The planted weight vector has
    ceil(sparsity_target * m) standard-normal nonzeros; labels are
    sign(Xw* + noise * eps).  Returns (Dataset, w_star).
    """
    if not 0.0 <= density <= 1.0:
        raise ConfigurationError(f"density must lie in [0, 1], got {density}")
    if not 0.0 <= sparsity_target <= 1.0:
        raise ConfigurationError(
            f"sparsity_target must lie in [0, 1], got {sparsity_target}"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    indptr = np.zeros(m + 1, dtype=np.int64)
    row_chunks = []
    val_chunks = []
    for j in range(m):
        k = int(rng.binomial(n, density)) if density < 1.0 else n
        rows = np.sort(rng.choice(n, size=k, replace=False))
        row_chunks.append(rows)
        val_chunks.append(rng.standard_normal(k))
        indptr[j + 1] = indptr[j] + k
    rows = np.concatenate(row_chunks) if m else np.zeros(0, dtype=np.int64)
    vals = np.concatenate(val_chunks) if m else np.zeros(0)
    matrix = SparseMatrix(n, m, indptr, rows, vals)

    support_size = math.ceil(sparsity_target * m)
    w_star = np.zeros(m)
    if support_size:
        support = rng.choice(m, size=support_size, replace=False)
        w_star[support] = rng.standard_normal(support_size)
    margin = matrix.tocsc() @ w_star
    if noise > 0:
        margin = margin + noise * rng.standard_normal(n)
    labels = np.where(margin > 0, 1.0, -1.0)
    return Dataset(matrix, labels, loss=loss), w_star


def synth_correlated_dataset(
    n: int,
    m: int,
    density: float,
    group: int,
    sparsity_target: float,
    seed: int = 0,
    noise: float = 0.1,
    jitter: float = 0.2,
    loss: str = "logistic",
):
    """Grouped sparse design whose columns are correlated inside each group.

    Columns come in ceil(m / group) groups.  Each group draws one row
    support of about density * n rows and one base value vector; every
    member column is base + jitter * (its own perturbation) on exactly
    those rows, giving intra-group correlation near 1 / (1 + jitter^2)
    while independent-column structure holds across groups.  Planted
    weights and labels follow synth_dataset.  Returns (Dataset, w_star).
    """
    if not 0.0 < density <= 1.0:
        raise ConfigurationError(f"density must lie in (0, 1], got {density}")
    if not 0.0 <= sparsity_target <= 1.0:
        raise ConfigurationError(
            f"sparsity_target must lie in [0, 1], got {sparsity_target}"
        )
    if group < 1:
        raise ConfigurationError(f"group must be >= 1, got {group}")
    rng = np.random.Generator(np.random.PCG64(seed))
    k = min(n, max(1, int(round(density * n))))
    indptr = np.zeros(m + 1, dtype=np.int64)
    row_chunks = []
    val_chunks = []
    j = 0
    while j < m:
        width = min(group, m - j)
        group_rows = np.sort(rng.choice(n, size=k, replace=False))
        base = rng.standard_normal(k)
        for _ in range(width):
            row_chunks.append(group_rows)
            val_chunks.append(base + jitter * rng.standard_normal(k))
            indptr[j + 1] = indptr[j] + k
            j += 1
    matrix = SparseMatrix(n, m, indptr, np.concatenate(row_chunks), np.concatenate(val_chunks))

    support_size = math.ceil(sparsity_target * m)
    w_star = np.zeros(m)
    if support_size:
        support = rng.choice(m, size=support_size, replace=False)
        w_star[support] = rng.standard_normal(support_size)
    margin = matrix.tocsc() @ w_star
    if noise > 0:
        margin = margin + noise * rng.standard_normal(n)
    labels = np.where(margin > 0, 1.0, -1.0)
    return Dataset(matrix, labels, loss=loss), w_star


def save_reference(path, f_star: float, **extra) -> None:
    """Cache a high-precision reference objective next to a run."""
    payload = {"f_star": float(f_star)}
    payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_reference(path) -> float:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return float(payload["f_star"])
