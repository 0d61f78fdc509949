"""Command line interface: solve, estimate-cost, synth.

Examples::

    dbcd synth --n 2000 --m 500 --density 0.01 --sparsity 0.1 --seed 7 \
        --out train.svm
    dbcd solve --data train.svm --method dbcd-s --lambda 0.01 --nodes 4 \
        --wss-frac 0.1 --out run.csv
    dbcd estimate-cost --method dbcd-s --nz 10000 --n 2000 --m 500 \
        --nodes 4 --s-size 50 --beta-comm 100 --tau-ls 2 --k 10 --q 1.5

``SOLVER_THREADS`` sets how many worker threads execute node tasks; it
affects speed only, never results.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .datasets import load_libsvm, to_libsvm
from .driver import METHODS, MethodConfig, reference_solve, run_method
from .errors import ConfigurationError, DataFormatError, LineSearchError
from .metrics import (
    CostParams,
    auprc,
    cost_estimate,
    emit_csv,
    load_reference,
    save_reference,
    synth_correlated_dataset,
    synth_dataset,
)

__all__ = ["main"]


def _threads_from_env() -> int:
    raw = os.environ.get("SOLVER_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"SOLVER_THREADS must be an integer, got {raw!r}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbcd",
        description="Feature-partitioned l1 classifier solvers on a simulated cluster",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one method on a LIBSVM file")
    solve.add_argument("--data", required=True, help="LIBSVM training file")
    solve.add_argument("--method", required=True, choices=METHODS)
    solve.add_argument("--lambda", dest="lam", type=float, required=True,
                       help="l1 penalty weight")
    solve.add_argument("--nodes", type=int, default=4)
    solve.add_argument("--wss-frac", type=float, default=0.1)
    solve.add_argument("--mu", type=float, default=1e-12)
    solve.add_argument("--k", type=int, default=10, help="inner cycles per iteration")
    solve.add_argument("--nu", type=float, default=1e-12)
    solve.add_argument("--sigma", type=float, default=0.01)
    solve.add_argument("--beta-ls", type=float, default=0.5)
    solve.add_argument("--beta-comm", type=float, default=100.0)
    solve.add_argument("--max-outer", type=int, default=800)
    solve.add_argument("--kkt-tol", type=float, default=1e-6)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--loss", default="logistic",
                       choices=("logistic", "squared-hinge", "least-squares"))
    solve.add_argument("--eps-mode", default="fixed-k",
                       choices=("fixed-k", "eps-mu-over-2"))
    solve.add_argument("--features", type=int, default=None,
                       help="pin the feature dimension instead of inferring it")
    solve.add_argument("--fstar", default=None,
                       help="reference objective sidecar (computed and cached "
                            "when missing)")
    solve.add_argument("--rfvd-target", type=float, default=None,
                       help="stop once log10 relative gap falls below this "
                            "(needs --fstar)")
    solve.add_argument("--eval", dest="eval_path", default=None,
                       help="LIBSVM file to score with AUPRC after solving")
    solve.add_argument("--out", required=True, help="per-iteration CSV path")

    cost = sub.add_parser("estimate-cost", help="per-iteration cost model")
    cost.add_argument("--method", required=True, choices=METHODS)
    cost.add_argument("--nz", type=int, required=True)
    cost.add_argument("--n", type=int, required=True)
    cost.add_argument("--m", type=int, required=True)
    cost.add_argument("--nodes", type=int, required=True)
    cost.add_argument("--s-size", type=int, required=True)
    cost.add_argument("--beta-comm", type=float, default=100.0)
    cost.add_argument("--tau-ls", type=int, default=0)
    cost.add_argument("--k", type=int, default=0)
    cost.add_argument("--q", type=float, default=1.0)

    synth = sub.add_parser("synth", help="generate a planted-model dataset")
    synth.add_argument("--n", type=int, required=True)
    synth.add_argument("--m", type=int, required=True)
    synth.add_argument("--density", type=float, required=True)
    synth.add_argument("--sparsity", type=float, required=True,
                       help="fraction of features in the planted support")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--noise", type=float, default=0.1)
    synth.add_argument("--group", type=int, default=0,
                       help="columns per correlated group (0 = independent "
                            "columns)")
    synth.add_argument("--jitter", type=float, default=0.2,
                       help="per-column perturbation scale inside a group")
    synth.add_argument("--out", required=True)
    return parser


def _cmd_solve(args) -> int:
    dataset = load_libsvm(args.data, n_features=args.features, loss=args.loss)

    f_star = None
    if args.fstar is not None:
        if os.path.exists(args.fstar):
            f_star = load_reference(args.fstar)
        else:
            ref = reference_solve(dataset, args.lam, seed=args.seed)
            f_star = ref.objective
            save_reference(args.fstar, f_star, lam=args.lam, kkt=ref.kkt)
            print(f"reference objective {f_star:.12g} cached to {args.fstar}")

    config = MethodConfig(
        method=args.method,
        lam=args.lam,
        n_nodes=args.nodes,
        wss_frac=args.wss_frac,
        mu=args.mu,
        nu=args.nu,
        inner_cycles=args.k,
        beta_ls=args.beta_ls,
        sigma=args.sigma,
        max_outer=args.max_outer,
        kkt_tol=args.kkt_tol,
        seed=args.seed,
        eps_mode=args.eps_mode,
        beta_comm=args.beta_comm,
        threads=_threads_from_env(),
        rfvd_target=args.rfvd_target,
    )
    trajectory = run_method(config, dataset, f_star=f_star)
    emit_csv(trajectory, args.out)

    last = trajectory.records[-1]
    print(
        f"method={args.method} stop={trajectory.stop_reason} "
        f"iters={len(trajectory.records)} F={last.objective:.12g} "
        f"kkt={trajectory.final_kkt:.6g} "
        f"nnz_pct={last.nnz_pct:.3g} comm={trajectory.ledger.comm_units:.6g}"
    )

    if args.eval_path is not None:
        eval_set = load_libsvm(
            args.eval_path, n_features=dataset.m, loss=args.loss
        )
        scores = eval_set.matrix.tocsc() @ trajectory.state.w
        print(f"eval_auprc={auprc(scores, eval_set.labels):.12g}")
    return 0


def _cmd_estimate_cost(args) -> int:
    params = CostParams(
        nz=args.nz,
        n=args.n,
        m=args.m,
        n_nodes=args.nodes,
        s_size=args.s_size,
        beta=args.beta_comm,
        tau_ls=args.tau_ls,
        k=args.k,
        q=args.q,
    )
    comp, comm = cost_estimate(args.method, params)
    print(f"comp_per_iter={comp:.12g}")
    print(f"comm_per_iter={comm:.12g}")
    return 0


def _cmd_synth(args) -> int:
    if args.group > 0:
        dataset, w_star = synth_correlated_dataset(
            args.n,
            args.m,
            args.density,
            args.group,
            args.sparsity,
            seed=args.seed,
            noise=args.noise,
            jitter=args.jitter,
        )
    else:
        dataset, w_star = synth_dataset(
            args.n,
            args.m,
            args.density,
            args.sparsity,
            seed=args.seed,
            noise=args.noise,
        )
    to_libsvm(dataset, args.out)
    print(
        f"wrote {args.out}: n={dataset.n} m={dataset.m} "
        f"nnz={dataset.matrix.nnz} support={int((w_star != 0).sum())}"
    )
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "estimate-cost":
            return _cmd_estimate_cost(args)
        return _cmd_synth(args)
    except (DataFormatError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LineSearchError as exc:
        print(f"error: line search failed: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
