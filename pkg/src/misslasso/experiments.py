"""Monte Carlo sweeps over the observation probability alpha.

Each trial draws its design, regression vector, noise and mask from seeds
derived from ``(cfg.seed, trial_index)``, so results do not depend on the
order (or process) in which trials execute. Within a trial the same design
and the same uniform draws are reused across the alpha grid; the masks are
therefore nested (a larger alpha observes a superset of entries).
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import impute, synth
from .core import MaskedMatrix, RegressionProblem, Solver
from .errors import EmptyTable, UsageError
from .solvers import LambdaSchedule, fit_lasso_continuation, fit_sqrt_lasso, lambda_value

log = logging.getLogger(__name__)

EXPERIMENTS = ("fig1", "fig2", "fig3", "sqrt-pivotal", "mnar")

DESK_SCALE = dict(n=400, p=480, trials=20)
PAPER_SCALE = dict(n=1000, p=1200, trials=100)

# per-trial stream indices passed to derive_seed
_DESIGN, _MASK, _NOISE = 0, 1, 2


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "fig1"
    n: int = DESK_SCALE["n"]
    p: int = DESK_SCALE["p"]
    trials: int = DESK_SCALE["trials"]
    alpha_grid: tuple = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    seed: int = 0
    sigma: float = 0.0
    lambda_scale: float = 1.0
    phi: Optional[float] = None
    bandwidth: int = 3
    p_list: Optional[tuple] = None
    sigma_grid: tuple = (0.1, 0.5, 1.0)
    radius_grid: tuple = (1.0, 5.0)
    n_jobs: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.trials < 1:
            raise UsageError("trials must be >= 1")
        if self.n < 2 or self.p < 2:
            raise UsageError("n and p must be >= 2")
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        if not self.alpha_grid or any(not (0 < a <= 1) for a in self.alpha_grid):
            raise UsageError(f"alpha_grid must be a nonempty subset of (0, 1], got {self.alpha_grid}")
        if self.sigma < 0:
            raise UsageError("sigma must be >= 0")
        if self.p_list is not None:
            object.__setattr__(self, "p_list", tuple(int(p) for p in self.p_list))

    @property
    def phi_value(self) -> float:
        if self.phi is not None:
            return float(self.phi)
        return 0.25 if self.experiment == "fig3" else 0.05


@dataclass
class SweepRow:
    alpha: float
    err: float
    min_err: float
    max_err: float
    apx_err: Optional[float] = None
    apx_min_err: Optional[float] = None
    apx_max_err: Optional[float] = None

    @classmethod
    def from_errors(cls, alpha, errs, apx_errs=None) -> "SweepRow":
        errs = np.asarray(errs, dtype=float)
        row = cls(alpha=float(alpha), err=float(errs.mean()), min_err=float(errs.min()), max_err=float(errs.max()))
        if apx_errs is not None:
            a = np.asarray(apx_errs, dtype=float)
            row.apx_err, row.apx_min_err, row.apx_max_err = float(a.mean()), float(a.min()), float(a.max())
        return row


def _trial_seeds(cfg: ExperimentConfig, trial: int) -> dict:
    base = synth.derive_seed(cfg.seed, trial)
    return {k: synth.derive_seed(base, idx) for k, idx in (("design", _DESIGN), ("mask", _MASK), ("noise", _NOISE))}


def _run_trials(fn, cfg: ExperimentConfig, *args) -> list:
    """Evaluate ``fn(cfg, trial, *args)`` for every trial, keyed by index."""
    idx = list(range(cfg.trials))
    if cfg.n_jobs == 1:
        return [fn(cfg, t, *args) for t in idx]
    workers = cfg.n_jobs if cfg.n_jobs > 0 else os.cpu_count()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, [cfg] * len(idx), idx, *[[a] * len(idx) for a in args]))


def _lasso_err(X_imputed, y, lam, beta0) -> float:
    res = fit_lasso_continuation(RegressionProblem(X_imputed, y, lam))
    return float(np.linalg.norm(res.beta - beta0))


def _fig1_trial(cfg, trial):
    seeds = _trial_seeds(cfg, trial)
    X = synth.gen_identity_gaussian(cfg.n, cfg.p, seeds["design"])
    beta0, _ = synth.gen_beta0_sqrt_sparsity(cfg.p)
    y = synth.gen_response(X, beta0, cfg.sigma, seeds["noise"])
    errs = []
    for alpha in cfg.alpha_grid:
        Z = synth.apply_mcar(X, alpha, seeds["mask"])
        lam = lambda_value(LambdaSchedule("identity-mcar", n=cfg.n, p=cfg.p, alpha=alpha, scale=cfg.lambda_scale))
        errs.append(_lasso_err(impute.zero_impute(Z).data, y, lam, beta0))
    return errs


def run_fig1(cfg: ExperimentConfig) -> list:
    """Identity-covariance design, zero imputation, noiseless response by default."""
    if cfg.experiment != "fig1":
        raise UsageError("run_fig1 needs experiment='fig1'")
    per_trial = np.array(_run_trials(_fig1_trial, cfg))
    return [SweepRow.from_errors(a, per_trial[:, k]) for k, a in enumerate(cfg.alpha_grid)]


def _fig2_trial(cfg, trial):
    seeds = _trial_seeds(cfg, trial)
    phi = cfg.phi_value
    X = synth.gen_ar1(cfg.n, cfg.p, phi, seeds["design"])
    beta0, _ = synth.gen_beta0_sqrt_sparsity(cfg.p)
    y = synth.gen_response(X, beta0, cfg.sigma, seeds["noise"])
    R = float(np.linalg.norm(beta0))
    exact, approx = [], []
    for alpha in cfg.alpha_grid:
        Z = synth.apply_mcar(X, alpha, seeds["mask"])
        lam = lambda_value(LambdaSchedule("ar1", n=cfg.n, p=cfg.p, alpha=alpha, R=R, scale=cfg.lambda_scale))
        X_exact = impute.ar1_impute(Z, impute.Ar1Params(phi))
        X_apx = impute.ar1_impute(Z, impute.estimate_phi(Z, alpha))
        exact.append(_lasso_err(X_exact.data, y, lam, beta0))
        approx.append(_lasso_err(X_apx.data, y, lam, beta0))
    return exact, approx


def run_fig2_ar1(cfg: ExperimentConfig) -> list:
    """AR(1) design imputed with the true phi (err) and with the estimate (apx_err)."""
    if cfg.experiment != "fig2":
        raise UsageError("run_fig2_ar1 needs experiment='fig2'")
    out = _run_trials(_fig2_trial, cfg)
    exact = np.array([o[0] for o in out])
    approx = np.array([o[1] for o in out])
    return [SweepRow.from_errors(a, exact[:, k], approx[:, k]) for k, a in enumerate(cfg.alpha_grid)]


def _fig3_trial(cfg, trial, p):
    seeds = _trial_seeds(cfg, trial)
    X, graph, sigma = synth.gen_banded_precision(cfg.n, p, cfg.phi_value, cfg.bandwidth, seeds["design"])
    beta0, _ = synth.gen_beta0_sqrt_sparsity(p)
    y = synth.gen_response(X, beta0, cfg.sigma, seeds["noise"])
    top_eig = float(np.linalg.eigvalsh(sigma)[-1])
    exact, approx = [], []
    for alpha in cfg.alpha_grid:
        Z = synth.apply_mcar(X, alpha, seeds["mask"])
        lam = lambda_value(
            LambdaSchedule("graphical", n=cfg.n, p=p, alpha=alpha, lambda_max_sigma=top_eig, scale=cfg.lambda_scale)
        )
        X_exact = impute.graphical_impute(Z, graph, sigma)
        X_apx = impute.graphical_impute(Z, graph, impute.estimate_covariance_mcar(Z, alpha))
        exact.append(_lasso_err(X_exact.data, y, lam, beta0))
        approx.append(_lasso_err(X_apx.data, y, lam, beta0))
    return exact, approx


def run_fig3_banded(cfg: ExperimentConfig) -> dict:
    """Banded-precision design imputed with the exact and the estimated covariance.

    Returns a mapping ``p -> rows`` over ``cfg.p_list`` (or just ``cfg.p``).
    """
    if cfg.experiment != "fig3":
        raise UsageError("run_fig3_banded needs experiment='fig3'")
    result = {}
    for p in cfg.p_list or (cfg.p,):
        out = _run_trials(_fig3_trial, cfg, p)
        exact = np.array([o[0] for o in out])
        approx = np.array([o[1] for o in out])
        result[p] = [SweepRow.from_errors(a, exact[:, k], approx[:, k]) for k, a in enumerate(cfg.alpha_grid)]
    return result


@dataclass
class PivotalityReport:
    alpha: float
    lam: float
    lambdas: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    loglog_slope: float = float("nan")

    @property
    def lambda_invariant(self) -> bool:
        return len(set(self.lambdas.values())) == 1

    def rows(self) -> list:
        return [
            (sigma, R, self.lambdas[(sigma, R)], float(np.mean(e)), float(np.min(e)), float(np.max(e)))
            for (sigma, R), e in sorted(self.errors.items())
        ]


def _pivot_trial(cfg, trial, alpha):
    seeds = _trial_seeds(cfg, trial)
    X = synth.gen_identity_gaussian(cfg.n, cfg.p, seeds["design"])
    pattern, s = synth.gen_beta0_sqrt_sparsity(cfg.p)
    Z = synth.apply_mcar(X, alpha, seeds["mask"])
    X_hat = impute.zero_impute(Z).data
    g = synth.make_rng(seeds["noise"]).standard_normal(cfg.n)
    out = {}
    for R in cfg.radius_grid:
        beta0 = pattern * (R / math.sqrt(s))
        for sigma in cfg.sigma_grid:
            lam = lambda_value(
                LambdaSchedule("sqrt-pivotal", n=cfg.n, p=cfg.p, sigma_x=1.0, sigma=sigma, R=R, scale=cfg.lambda_scale)
            )
            y = X @ beta0 + sigma * g
            res = fit_sqrt_lasso(RegressionProblem(X_hat, y, lam, solver=Solver.SqrtLasso))
            out[(sigma, R)] = (lam, float(np.linalg.norm(res.beta - beta0)))
    return out


def run_sqrt_pivotality(cfg: ExperimentConfig) -> PivotalityReport:
    """One fixed square-root LASSO penalty across a grid of noise levels and radii.

    Uses the first entry of ``cfg.alpha_grid``. The slope reported is the
    least-squares slope of log(err) on log(sigma + R sqrt(1 - alpha)).
    """
    if cfg.experiment != "sqrt-pivotal":
        raise UsageError("run_sqrt_pivotality needs experiment='sqrt-pivotal'")
    alpha = cfg.alpha_grid[0]
    out = _run_trials(_pivot_trial, cfg, alpha)
    report = PivotalityReport(alpha=alpha, lam=out[0][next(iter(out[0]))][0])
    for key in out[0]:
        report.lambdas[key] = out[0][key][0]
        report.errors[key] = [o[key][1] for o in out]
    xs, ys = [], []
    for (sigma, R), e in report.errors.items():
        level = sigma + R * math.sqrt(1 - alpha)
        if level > 0 and np.mean(e) > 0:
            xs.append(math.log(level))
            ys.append(math.log(np.mean(e)))
    if len(set(xs)) > 1:
        report.loglog_slope = float(np.polyfit(xs, ys, 1)[0])
    return report


def _mnar_trial(cfg, trial):
    seeds = _trial_seeds(cfg, trial)
    X = synth.gen_identity_gaussian(cfg.n, cfg.p, seeds["design"])
    beta0, _ = synth.gen_beta0_sqrt_sparsity(cfg.p)
    y = synth.gen_response(X, beta0, cfg.sigma, seeds["noise"])
    R = float(np.linalg.norm(beta0))
    errs = []
    for alpha in cfg.alpha_grid:
        # coordinates later in the row are observed less often
        probs = np.clip(alpha * (1.25 - 0.5 * np.arange(cfg.p) / max(cfg.p - 1, 1)), 0.0, 1.0)
        Z = synth.apply_mnar_rowpattern(X, synth.IndependentBernoulli(probs), seeds["mask"])
        lam = lambda_value(
            LambdaSchedule("mnar", n=cfg.n, p=cfg.p, sigma=cfg.sigma, sigma_x=1.0, R=R, scale=cfg.lambda_scale)
        )
        errs.append(_lasso_err(impute.zero_impute(Z).data, y, lam, beta0))
    return errs


def run_mnar_demo(cfg: ExperimentConfig) -> list:
    """Zero imputation under a coordinate-dependent (non-uniform) missingness pattern.

    Coordinate ``a`` is observed with probability
    ``min(1, alpha * (1.25 - 0.5 a / (p - 1)))``; the penalty follows the
    MNAR rule, which does not involve alpha.
    """
    if cfg.experiment != "mnar":
        raise UsageError("run_mnar_demo needs experiment='mnar'")
    per_trial = np.array(_run_trials(_mnar_trial, cfg))
    return [SweepRow.from_errors(a, per_trial[:, k]) for k, a in enumerate(cfg.alpha_grid)]


# ---------------------------------------------------------------------------
# .dat tables
# ---------------------------------------------------------------------------

BASE_COLUMNS = ("alpha", "err", "max_err", "min_err")
APX_COLUMNS = ("apx_err", "apx_max_err", "apx_min_err")


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def format_dat(rows: Sequence[SweepRow]) -> str:
    if not rows:
        raise EmptyTable("no rows to write")
    with_apx = all(r.apx_err is not None for r in rows)
    cols = BASE_COLUMNS + (APX_COLUMNS if with_apx else ())
    lines = [" ".join(cols)]
    for r in rows:
        lines.append(" ".join(_fmt(getattr(r, c)) for c in cols))
    return "\n".join(lines) + "\n"


def emit_dat(rows: Sequence[SweepRow], path) -> Path:
    """Write a whitespace-separated table with a header row.

    Columns are ``alpha err max_err min_err``, followed by
    ``apx_err apx_max_err apx_min_err`` when every row carries them.
    """
    text = format_dat(rows)  # raises before any file is touched
    path = Path(path)
    path.write_text(text)
    return path


def format_pivotality(report: PivotalityReport) -> str:
    lines = ["sigma R lambda err min_err max_err"]
    for row in report.rows():
        lines.append(" ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def run(cfg: ExperimentConfig):
    """Dispatch on ``cfg.experiment``."""
    return {
        "fig1": run_fig1,
        "fig2": run_fig2_ar1,
        "fig3": run_fig3_banded,
        "sqrt-pivotal": run_sqrt_pivotality,
        "mnar": run_mnar_demo,
    }[cfg.experiment](cfg)


def write_outputs(cfg: ExperimentConfig, result, out_dir) -> list:
    """Write the .dat file(s) for a finished run; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.experiment == "fig3":
        return [emit_dat(rows, out_dir / f"fig3_banded_p{p}.dat") for p, rows in result.items()]
    if cfg.experiment == "sqrt-pivotal":
        path = out_dir / "sqrt_pivotality.dat"
        path.write_text(format_pivotality(result))
        return [path]
    name = {"fig1": "fig1_identity.dat", "fig2": f"fig2_ar1_phi{cfg.phi_value:g}.dat", "mnar": "mnar_demo.dat"}
    return [emit_dat(result, out_dir / name[cfg.experiment])]


def with_scale(cfg: ExperimentConfig, paper_scale: bool) -> ExperimentConfig:
    return replace(cfg, **PAPER_SCALE) if paper_scale else cfg
