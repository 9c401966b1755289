"""LASSO and square-root LASSO solvers and the regularization schedules.

LASSO objective::

    (1/2n) ||y - X b||_2^2 + lam ||b||_1

Square-root LASSO objective::

    (1/sqrt(n)) ||y - X b||_2 + lam ||b||_1
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numba
import numpy as np

from .core import FitResult, RegressionProblem, Solver
from .errors import MaxIterExceeded, MissingInput, UsageError, ZeroResidualDegenerate

SIGMA_FLOOR = 1e-12

# ---------------------------------------------------------------------------
# regularization schedules
# ---------------------------------------------------------------------------

SCHEDULE_KINDS = (
    "identity-mcar",
    "identity-mcar-intro",
    "identity-theory",
    "subgaussian-mcar",
    "mnar",
    "ar1",
    "ar1-theory",
    "graphical",
    "sqrt-pivotal",
    "manual",
)

_REQUIRED = {
    "identity-mcar": ("n", "p", "alpha"),
    "identity-mcar-intro": ("n", "p", "alpha"),
    "identity-theory": ("n", "p", "alpha", "sigma", "R"),
    "subgaussian-mcar": ("n", "p", "alpha", "sigma", "sigma_x", "R"),
    "mnar": ("n", "p", "sigma", "sigma_x", "R"),
    "ar1": ("n", "p", "alpha", "R"),
    "ar1-theory": ("n", "p", "alpha", "sigma", "sigma_x", "R"),
    "graphical": ("n", "p", "alpha", "lambda_max_sigma"),
    "sqrt-pivotal": ("n", "p", "sigma_x"),
    "manual": ("value",),
}


@dataclass(frozen=True)
class LambdaSchedule:
    """Inputs for one regularization rule; unused inputs are ignored.

    ``scale`` absorbs the unspecified theory constants and defaults to 1.
    ``lambda_max_sigma`` is the top eigenvalue of the design covariance and
    is only needed by the ``graphical`` rule.
    """

    kind: str
    n: Optional[int] = None
    p: Optional[int] = None
    s: Optional[int] = None
    alpha: Optional[float] = None
    sigma: Optional[float] = None
    sigma_x: Optional[float] = None
    R: Optional[float] = None
    lambda_max_sigma: Optional[float] = None
    value: Optional[float] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise UsageError(f"unknown schedule {self.kind!r}; choose from {', '.join(SCHEDULE_KINDS)}")


def lambda_value(sched: LambdaSchedule) -> float:
    missing = [k for k in _REQUIRED[sched.kind] if getattr(sched, k) is None]
    if missing:
        raise MissingInput(f"schedule {sched.kind!r} needs {', '.join(missing)}")
    kind = sched.kind
    if kind == "manual":
        return sched.scale * float(sched.value)
    n, p = sched.n, sched.p
    if n < 2 or p < 2:
        raise UsageError(f"schedules need n, p >= 2, got n={n}, p={p}")
    rate = math.sqrt(math.log(p) / n)
    a = sched.alpha
    if kind == "identity-mcar":
        lam = math.sqrt(a * (1.0 - a) * math.log(p) / n)
    elif kind == "identity-mcar-intro":
        lam = math.sqrt((1.0 - a) * math.log(p) / (a * n))
    elif kind == "identity-theory":
        lam = math.sqrt(a) * (sched.sigma + math.sqrt(1.0 - a) * sched.R) * rate
    elif kind == "subgaussian-mcar":
        sx = sched.sigma_x
        lam = (sx * sched.sigma + sx * sx * math.sqrt(1.0 - a) * sched.R) * rate
    elif kind == "mnar":
        sx = sched.sigma_x
        lam = (sx * sched.sigma + sx * sx * sched.R) * rate
    elif kind == "ar1":
        lam = sched.R * rate / a**4
    elif kind == "ar1-theory":
        sx = sched.sigma_x
        lam = (sx * sched.sigma / a**2 + sx * sx * sched.R / a**4) * rate
    elif kind == "graphical":
        lam = sched.lambda_max_sigma * math.sqrt((1.0 - a) * math.log(p) / n)
    else:  # sqrt-pivotal
        lam = sched.sigma_x * rate
    return sched.scale * lam


# ---------------------------------------------------------------------------
# coordinate descent kernel
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@numba.njit(cache=True)
def _kkt(X, y, beta, lam):
    n, p = X.shape
    r = y - X @ beta
    worst = 0.0
    for j in range(p):
        g = -np.dot(X[:, j], r) / n
        if beta[j] == 0.0:
            v = abs(g) - lam
            if v < 0.0:
                v = 0.0
        else:
            v = abs(g + lam * np.sign(beta[j]))
        if v > worst:
            worst = v
    return worst, r


@numba.njit(cache=True)
def _cd(X, y, beta, lam, tol, max_iter, trace):
    """Cyclic coordinate descent in place on ``beta``.

    Returns (cycles, kkt_residual, converged, n_trace).
    """
    n, p = X.shape
    colsq = np.empty(p)
    for j in range(p):
        colsq[j] = np.dot(X[:, j], X[:, j]) / n
    r = y - X @ beta
    record = trace.shape[0] > 1
    nt = 0
    if record:
        trace[0] = 0.5 * np.dot(r, r) / n + lam * np.sum(np.abs(beta))
        nt = 1
    kkt = np.inf
    for it in range(1, max_iter + 1):
        max_step = 0.0
        for j in range(p):
            cj = colsq[j]
            if cj == 0.0:
                if beta[j] != 0.0:
                    beta[j] = 0.0
                continue
            old = beta[j]
            rho = np.dot(X[:, j], r) / n + cj * old
            new = _soft(rho, lam) / cj
            if new != old:
                d = new - old
                for i in range(n):
                    r[i] -= d * X[i, j]
                beta[j] = new
                step = abs(d)
                if step > max_step:
                    max_step = step
        if record and nt < trace.shape[0]:
            trace[nt] = 0.5 * np.dot(r, r) / n + lam * np.sum(np.abs(beta))
            nt += 1
        if max_step < tol:
            kkt, r = _kkt(X, y, beta, lam)
            if kkt < tol:
                return it, kkt, True, nt
    kkt, r = _kkt(X, y, beta, lam)
    return max_iter, kkt, kkt <= tol, nt


def lasso_kkt_residual(X, y, beta, lam) -> float:
    """Largest violation of the LASSO stationarity conditions at ``beta``."""
    X = np.asfortranarray(X, dtype=float)
    kkt, _ = _kkt(X, np.asarray(y, dtype=float), np.asarray(beta, dtype=float), float(lam))
    return float(kkt)


def lasso_objective(X, y, beta, lam) -> float:
    r = np.asarray(y) - np.asarray(X) @ beta
    return float(0.5 * (r @ r) / len(r) + lam * np.abs(beta).sum())


def sqrt_lasso_objective(X, y, beta, lam) -> float:
    r = np.asarray(y) - np.asarray(X) @ beta
    return float(np.linalg.norm(r) / math.sqrt(len(r)) + lam * np.abs(beta).sum())


def _preprocess(problem: RegressionProblem):
    X = problem.X
    y = problem.y
    x_mean = np.zeros(X.shape[1])
    y_mean = 0.0
    if problem.fit_intercept:
        x_mean = X.mean(axis=0)
        y_mean = float(y.mean())
        X = X - x_mean
        y = y - y_mean
    scale = np.ones(X.shape[1])
    if problem.standardize:
        scale = np.sqrt((X**2).mean(axis=0))
        scale[scale == 0] = 1.0
        X = X / scale
    return np.asfortranarray(X), np.ascontiguousarray(y), x_mean, y_mean, scale


def fit_lasso(problem: RegressionProblem, beta_init=None, record_objective: bool = False) -> FitResult:
    """Solve the LASSO by cyclic coordinate descent (order 0..p-1).

    Converged means the largest coordinate move in a cycle fell below
    ``problem.tol`` and the KKT residual did too. If ``record_objective`` is
    set, the objective after every full cycle is stored on the result as
    ``objective_trace``.
    """
    X, y, x_mean, y_mean, scale = _preprocess(problem)
    p = X.shape[1]
    beta = np.zeros(p) if beta_init is None else np.array(beta_init, dtype=float) * scale
    trace = np.empty(problem.max_iter + 1 if record_objective else 1)
    iters, kkt, converged, nt = _cd(X, y, beta, float(problem.lam), float(problem.tol), int(problem.max_iter), trace)
    if not converged:
        warnings.warn(
            f"coordinate descent stopped after {iters} cycles with KKT residual {kkt:.3e}",
            MaxIterExceeded,
            stacklevel=2,
        )
    coef = beta / scale
    intercept = y_mean - float(x_mean @ coef) if problem.fit_intercept else 0.0
    res = FitResult(
        beta=coef,
        objective=lasso_objective(X, y, beta, problem.lam),
        kkt_residual=float(kkt),
        iters=int(iters),
        converged=bool(converged),
        intercept=intercept,
    )
    if record_objective:
        res.objective_trace = trace[:nt].copy()
    return res


def fit_sqrt_lasso(problem: RegressionProblem, beta_init=None) -> FitResult:
    """Square-root LASSO via the scaled-lasso alternation.

    Alternates the noise estimate ``sigma = ||y - X b|| / sqrt(n)`` with a
    LASSO solve at penalty ``lam * sigma`` until sigma settles. A residual
    at the solver tolerance is treated as exact interpolation and flagged
    ``degenerate``. The KKT
    residual reported is that of the LASSO at penalty ``lam * sigma(b)``,
    which is the square-root LASSO stationarity condition.
    """
    X, y, x_mean, y_mean, scale = _preprocess(problem)
    n, p = X.shape
    lam, tol = float(problem.lam), float(problem.tol)
    beta = np.zeros(p) if beta_init is None else np.array(beta_init, dtype=float) * scale
    sigma = max(np.linalg.norm(y - X @ beta) / math.sqrt(n), SIGMA_FLOOR)
    # the inner solve only pins the residual down to about tol, so an
    # interpolating fit shows up as a residual at that level, not exactly 0
    floor = max(SIGMA_FLOOR, tol * max(1.0, np.linalg.norm(y) / math.sqrt(n)))
    dummy = np.empty(1)
    converged = degenerate = False
    kkt = np.inf
    total = 0
    outer = 0
    for outer in range(1, problem.max_iter + 1):
        it, _, _, _ = _cd(X, y, beta, lam * sigma, tol, int(problem.max_iter), dummy)
        total += it
        new_sigma = np.linalg.norm(y - X @ beta) / math.sqrt(n)
        if new_sigma <= floor:
            sigma = new_sigma
            degenerate = True
            break
        kkt, _ = _kkt(X, y, beta, lam * new_sigma)
        done = abs(new_sigma - sigma) < tol * max(sigma, 1.0) and kkt <= tol
        sigma = new_sigma
        if done:
            converged = True
            break
    if degenerate:
        warnings.warn("square-root LASSO residual vanished (exact interpolation)", ZeroResidualDegenerate, stacklevel=2)
    elif not converged:
        warnings.warn(f"scaled-lasso alternation stopped after {outer} rounds", MaxIterExceeded, stacklevel=2)
    coef = beta / scale
    intercept = y_mean - float(x_mean @ coef) if problem.fit_intercept else 0.0
    return FitResult(
        beta=coef,
        objective=sqrt_lasso_objective(X, y, beta, lam),
        kkt_residual=float(kkt) if not degenerate else float("nan"),
        iters=int(total),
        converged=bool(converged),
        intercept=intercept,
        degenerate=degenerate,
        sigma_hat=float(sigma),
    )


def fit(problem: RegressionProblem, **kwargs) -> FitResult:
    if problem.solver is Solver.SqrtLasso:
        return fit_sqrt_lasso(problem, **kwargs)
    return fit_lasso(problem, **kwargs)


def fit_lasso_continuation(problem: RegressionProblem, n_steps: int = 20, floor_ratio: float = 1e-4) -> FitResult:
    """Warm-started LASSO along a geometric penalty path ending at ``problem.lam``.

    The path starts at ``||X^T y / n||_inf`` (where zero is optimal). When the
    target penalty is 0 the path first descends to ``floor_ratio`` times that
    value, so an underdetermined noiseless problem lands on the interpolating
    solution nearest the sparse path rather than an arbitrary one.
    """
    X = problem.X
    y = problem.y
    lam_max = float(np.max(np.abs(X.T @ y)) / X.shape[0]) if X.size else 0.0
    target = float(problem.lam)
    if lam_max <= target or lam_max == 0.0:
        return fit_lasso(problem)
    low = target if target > 0 else lam_max * floor_ratio
    path = np.geomspace(lam_max, low, n_steps)
    beta = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxIterExceeded)
        for lam in path[:-1]:
            beta = fit_lasso(replace(problem, lam=float(lam), tol=max(problem.tol, 1e-6)), beta_init=beta).beta
    if target == 0:
        beta = fit_lasso(replace(problem, lam=float(low)), beta_init=beta).beta
    return fit_lasso(problem, beta_init=beta)
