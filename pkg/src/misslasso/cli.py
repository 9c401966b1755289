"""Command-line interface: ``misslasso generate|impute|fit|experiment``.

Options can also come from a JSON file given with ``--config``; its keys are
the long option names (dashes or underscores). Command-line flags override
the file, which overrides the built-in defaults. Unknown keys are rejected.

Exit status: 0 ok, 2 usage, 3 data, 4 numeric. Errors go to stderr as
``<CODE>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import csvio, experiments, impute, synth
from .core import CovarianceKind, ModelTruth, RegressionProblem, Solver, SparsityGraph
from .errors import MethodRequirementsMissing, MissLassoError, UnreadableInput, UsageError
from .solvers import SCHEDULE_KINDS, LambdaSchedule, fit, lambda_value

log = logging.getLogger("misslasso")

DEFAULTS = {
    "generate": dict(
        model="identity", n=100, p=50, alpha=0.8, phi=0.5, bandwidth=3, sigma=0.0, seed=0, out_dir=".", prefix=""
    ),
    "impute": dict(
        input=None, method="zero", phi=None, estimate_phi=False, alpha=None, graph=None, covariance=None,
        output="imputed.csv",
    ),
    "fit": dict(
        design=None, response=None, solver="lasso", **{"lambda": None}, schedule=None, n=None, p=None, s=None,
        alpha=None, sigma=None, sigma_x=1.0, R=None, lambda_max_sigma=None, scale=1.0, tol=1e-8, max_iter=100_000,
        intercept=False, standardize=False, coef_out="coef.txt",
    ),
    "experiment": dict(
        experiment="fig1", n=None, p=None, trials=None, alphas=None, seed=0, sigma=0.0, lambda_scale=1.0, phi=None,
        bandwidth=3, p_list=None, paper_scale=False, jobs=1, out_dir=".",
    ),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{UsageError.code}: {message}\n")
        sys.exit(UsageError.exit_status)


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="misslasso", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    # every option defaults to None so config-file values can be told apart from flags
    g = sub.add_parser("generate", help="simulate a design with missing entries")
    g.add_argument("--config")
    g.add_argument("--model", choices=["identity", "ar1", "banded"], default=None)
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--p", type=int, default=None)
    g.add_argument("--alpha", type=float, default=None)
    g.add_argument("--phi", type=float, default=None)
    g.add_argument("--bandwidth", type=int, default=None)
    g.add_argument("--sigma", type=float, default=None, help="noise standard deviation")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out-dir", default=None)
    g.add_argument("--prefix", default=None, help="file name prefix")

    m = sub.add_parser("impute", help="fill missing entries of a design CSV")
    m.add_argument("--config")
    m.add_argument("--input", default=None)
    m.add_argument("--method", choices=["zero", "ar1", "graphical"], default=None)
    m.add_argument("--phi", type=float, default=None)
    m.add_argument("--estimate-phi", action="store_true", default=None)
    m.add_argument("--alpha", type=float, default=None, help="observation probability (default: observed fraction)")
    m.add_argument("--graph", default=None, help="edge-list file of the precision sparsity pattern")
    m.add_argument("--covariance", default=None, help="CSV of the exact covariance (graphical only)")
    m.add_argument("--output", default=None)

    f = sub.add_parser("fit", help="fit LASSO or square-root LASSO")
    f.add_argument("--config")
    f.add_argument("--design", default=None)
    f.add_argument("--response", default=None)
    f.add_argument("--solver", choices=["lasso", "sqrt-lasso"], default=None)
    f.add_argument("--lambda", type=float, default=None, dest="lambda")
    f.add_argument("--schedule", choices=[k for k in SCHEDULE_KINDS if k != "manual"], default=None)
    f.add_argument("--s", type=int, default=None)
    f.add_argument("--alpha", type=float, default=None)
    f.add_argument("--sigma", type=float, default=None)
    f.add_argument("--sigma-x", type=float, default=None)
    f.add_argument("--R", type=float, default=None, dest="R")
    f.add_argument("--lambda-max-sigma", type=float, default=None)
    f.add_argument("--scale", type=float, default=None)
    f.add_argument("--tol", type=float, default=None)
    f.add_argument("--max-iter", type=int, default=None)
    f.add_argument("--intercept", action="store_true", default=None)
    f.add_argument("--standardize", action="store_true", default=None)
    f.add_argument("--coef-out", default=None)

    e = sub.add_parser("experiment", help="run a Monte Carlo sweep and write .dat tables")
    e.add_argument("--config")
    e.add_argument("--experiment", choices=list(experiments.EXPERIMENTS), default=None)
    e.add_argument("--n", type=int, default=None)
    e.add_argument("--p", type=int, default=None)
    e.add_argument("--trials", type=int, default=None)
    e.add_argument("--alphas", type=_floats, default=None)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--sigma", type=float, default=None)
    e.add_argument("--lambda-scale", type=float, default=None)
    e.add_argument("--phi", type=float, default=None)
    e.add_argument("--bandwidth", type=int, default=None)
    e.add_argument("--p-list", type=_ints, default=None)
    e.add_argument("--paper-scale", action="store_true", default=None)
    e.add_argument("--jobs", type=int, default=None)
    e.add_argument("--out-dir", default=None)
    return ap


def resolve_options(command: str, args: argparse.Namespace) -> dict:
    """defaults <- config file <- flags."""
    opts = dict(DEFAULTS[command])
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise UnreadableInput(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in cfg.items():
            k = key.replace("-", "_")
            if k not in opts:
                raise UsageError(f"unknown config key {key!r} for {command}")
            opts[k] = value
    for k in opts:
        v = getattr(args, k, None)
        if v is not None:
            opts[k] = v
    return opts


def cmd_generate(o: dict) -> int:
    n, p, alpha, seed = int(o["n"]), int(o["p"]), float(o["alpha"]), int(o["seed"])
    if not (0 < alpha <= 1):
        raise UsageError(f"--alpha must lie in (0, 1], got {alpha}")
    seeds = [synth.derive_seed(seed, k) for k in range(3)]
    graph = None
    if o["model"] == "identity":
        X = synth.gen_identity_gaussian(n, p, seeds[0])
        sigma_x = None
        kind = CovarianceKind("identity")
    elif o["model"] == "ar1":
        phi = float(o["phi"])
        X = synth.gen_ar1(n, p, phi, seeds[0])
        sigma_x = synth.ar1_covariance(p, phi)
        graph = SparsityGraph.from_edges(p, [(a, a + 1) for a in range(p - 1)])
        kind = CovarianceKind("ar1", phi=phi)
    else:
        phi, bw = float(o["phi"]), int(o["bandwidth"])
        X, graph, sigma_x = synth.gen_banded_precision(n, p, phi, bw, seeds[0])
        kind = CovarianceKind("banded", phi=phi, bandwidth=bw)
    beta0, _ = synth.gen_beta0_sqrt_sparsity(p)
    y = synth.gen_response(X, beta0, float(o["sigma"]), seeds[2])
    Z = synth.apply_mcar(X, alpha, seeds[1])

    out = Path(o["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    pre = o["prefix"]
    csvio.write_masked_csv(Z, out / f"{pre}design.csv")
    csvio.write_vector(y, out / f"{pre}response.csv")
    truth = ModelTruth(beta0=beta0, sigma=float(o["sigma"]), alpha=alpha, covariance_kind=kind)
    (out / f"{pre}truth.json").write_text(json.dumps(truth.to_dict(), indent=2, sort_keys=True) + "\n")
    if graph is not None:
        csvio.write_graph(graph, out / f"{pre}graph.txt")
        csvio.write_dense_csv(sigma_x, out / f"{pre}covariance.csv")
    print(f"wrote {n}x{p} design to {out / (pre + 'design.csv')} (observed fraction {Z.observed_fraction():.4f})")
    return 0


def cmd_impute(o: dict) -> int:
    if not o["input"]:
        raise UsageError("impute needs --input")
    table = csvio.read_masked_csv(o["input"])
    Z = table.masked
    if o["alpha"] is not None:
        alpha = float(o["alpha"])
    else:
        # with nothing observed every estimator degenerates anyway; keep alpha valid
        alpha = Z.observed_fraction() or 1.0
    method = o["method"]
    if method == "zero":
        result = impute.zero_impute(Z)
    elif method == "ar1":
        if o["estimate_phi"]:
            params = impute.estimate_phi(Z, alpha)
            print(f"estimated phi = {params.phi:.6g}")
        elif o["phi"] is not None:
            params = impute.Ar1Params(float(o["phi"]))
        else:
            raise MethodRequirementsMissing("ar1 imputation needs --phi or --estimate-phi")
        result = impute.ar1_impute(Z, params)
    else:
        if not o["graph"]:
            raise MethodRequirementsMissing("graphical imputation needs --graph")
        graph = csvio.read_graph(o["graph"])
        if o["covariance"]:
            sigma = csvio.read_dense_csv(o["covariance"])
        else:
            sigma = impute.estimate_covariance_mcar(Z, alpha)
        result = impute.graphical_impute(Z, graph, sigma)
    csvio.write_dense_csv(result.data, o["output"], header=table.header, mask=Z.mask, tokens=table.tokens)
    print(f"wrote {o['output']} ({result.source.value}, {int((~Z.mask).sum())} cells imputed)")
    return 0


def cmd_fit(o: dict) -> int:
    if not o["design"] or not o["response"]:
        raise UsageError("fit needs --design and --response")
    X = csvio.read_dense_csv(o["design"])
    y = csvio.read_vector(o["response"])
    n, p = X.shape
    if o["lambda"] is not None:
        lam = float(o["lambda"])
    elif o["schedule"]:
        sched = LambdaSchedule(
            kind=o["schedule"], n=o["n"] or n, p=o["p"] or p, s=o["s"], alpha=o["alpha"], sigma=o["sigma"],
            sigma_x=o["sigma_x"], R=o["R"], lambda_max_sigma=o["lambda_max_sigma"], scale=float(o["scale"]),
        )
        lam = lambda_value(sched)
    else:
        raise UsageError("fit needs --lambda or --schedule")
    problem = RegressionProblem(
        X, y, lam, solver=Solver(o["solver"]), tol=float(o["tol"]), max_iter=int(o["max_iter"]),
        fit_intercept=bool(o["intercept"]), standardize=bool(o["standardize"]),
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = fit(problem)
    for w in caught:
        sys.stderr.write(f"warning: {w.message}\n")
    csvio.write_vector(res.beta, o["coef_out"])
    print(f"lambda {lam!r}")
    print(f"objective {res.objective!r}")
    print(f"kkt_residual {res.kkt_residual!r}")
    print(f"support_size {int(np.count_nonzero(res.beta))}")
    print(f"iterations {res.iters}")
    print(f"converged {str(res.converged).lower()}")
    if res.sigma_hat is not None:
        print(f"sigma_hat {res.sigma_hat!r}")
    if problem.fit_intercept:
        print(f"intercept {res.intercept!r}")
    return 0


def cmd_experiment(o: dict) -> int:
    base = experiments.PAPER_SCALE if o["paper_scale"] else experiments.DESK_SCALE
    kwargs = dict(
        experiment=o["experiment"], n=int(o["n"] or base["n"]), p=int(o["p"] or base["p"]),
        trials=int(o["trials"] or base["trials"]), seed=int(o["seed"]), sigma=float(o["sigma"]),
        lambda_scale=float(o["lambda_scale"]), phi=o["phi"], bandwidth=int(o["bandwidth"]), n_jobs=int(o["jobs"]),
    )
    if o["alphas"]:
        kwargs["alpha_grid"] = tuple(o["alphas"])
    if o["p_list"]:
        kwargs["p_list"] = tuple(o["p_list"])
    cfg = experiments.ExperimentConfig(**kwargs)
    result = experiments.run(cfg)
    for path in experiments.write_outputs(cfg, result, o["out_dir"]):
        print(f"wrote {path}")
    return 0


COMMANDS = {"generate": cmd_generate, "impute": cmd_impute, "fit": cmd_fit, "experiment": cmd_experiment}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        opts = resolve_options(args.command, args)
        return COMMANDS[args.command](opts)
    except MissLassoError as exc:
        sys.stderr.write(f"{exc.code}: {exc}\n")
        return exc.exit_status
    except OSError as exc:
        sys.stderr.write(f"E_IO: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
