import math
import warnings

import numpy as np
import pytest

from misslasso import impute, synth
from misslasso.core import MaskedMatrix, RegressionProblem, Solver
from misslasso.errors import MaxIterExceeded, MissingInput, UsageError, ZeroResidualDegenerate
from misslasso.oracles import prox_grad_lasso
from misslasso.solvers import (
    LambdaSchedule,
    fit,
    fit_lasso,
    fit_lasso_continuation,
    fit_sqrt_lasso,
    lambda_value,
    lasso_kkt_residual,
    lasso_objective,
    sqrt_lasso_objective,
)


def certified(res, problem):
    """Every converged fit must carry a KKT certificate at the problem tolerance."""
    if res.converged:
        assert res.kkt_residual <= problem.tol
        if problem.solver is Solver.Lasso and not (problem.fit_intercept or problem.standardize):
            assert lasso_kkt_residual(problem.X, problem.y, res.beta, problem.lam) <= problem.tol
    return res


def soft(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


# schedules

def test_identity_mcar_value():
    lam = lambda_value(LambdaSchedule("identity-mcar", n=1000, p=1200, alpha=0.5))
    assert lam == pytest.approx(0.0421013, abs=5e-7)


def test_identity_mcar_full_observation_is_zero():
    assert lambda_value(LambdaSchedule("identity-mcar", n=100, p=50, alpha=1.0)) == 0.0


def test_sqrt_pivotal_ignores_sigma_and_radius():
    vals = {
        lambda_value(LambdaSchedule("sqrt-pivotal", n=400, p=480, sigma_x=1.0, sigma=s, R=R))
        for s in (0.1, 0.5, 1.0)
        for R in (1.0, 5.0)
    }
    assert len(vals) == 1


def test_schedule_formulas():
    n, p, a = 400, 480, 0.8
    rate = math.sqrt(math.log(p) / n)
    cases = {
        "identity-mcar-intro": (dict(alpha=a), math.sqrt((1 - a) * math.log(p) / (a * n))),
        "identity-theory": (dict(alpha=a, sigma=0.5, R=2.0), math.sqrt(a) * (0.5 + math.sqrt(1 - a) * 2.0) * rate),
        "subgaussian-mcar": (dict(alpha=a, sigma=0.5, sigma_x=2.0, R=3.0), (2 * 0.5 + 4 * math.sqrt(1 - a) * 3) * rate),
        "mnar": (dict(sigma=0.5, sigma_x=2.0, R=3.0), (2 * 0.5 + 4 * 3) * rate),
        "ar1": (dict(alpha=a, R=3.0), 3.0 * rate / a**4),
        "ar1-theory": (dict(alpha=a, sigma=0.5, sigma_x=2.0, R=3.0), (2 * 0.5 / a**2 + 4 * 3 / a**4) * rate),
        "graphical": (dict(alpha=a, lambda_max_sigma=1.7), 1.7 * math.sqrt((1 - a) * math.log(p) / n)),
        "sqrt-pivotal": (dict(sigma_x=2.0), 2.0 * rate),
    }
    for kind, (kw, expect) in cases.items():
        assert lambda_value(LambdaSchedule(kind, n=n, p=p, **kw)) == pytest.approx(expect, rel=1e-14), kind
        assert lambda_value(LambdaSchedule(kind, n=n, p=p, scale=3.0, **kw)) == pytest.approx(3 * expect, rel=1e-14)
    assert lambda_value(LambdaSchedule("manual", value=0.25)) == 0.25


def test_schedule_errors():
    with pytest.raises(MissingInput):
        lambda_value(LambdaSchedule("ar1", n=10, p=10, alpha=0.5))
    with pytest.raises(UsageError):
        LambdaSchedule("bogus")
    with pytest.raises(UsageError):
        lambda_value(LambdaSchedule("identity-mcar", n=1, p=10, alpha=0.5))


# LASSO

def test_lasso_zero_above_lambda_max(rng):
    X = rng.standard_normal((30, 10))
    y = rng.standard_normal(30)
    lam_max = np.max(np.abs(X.T @ y)) / 30
    prob = RegressionProblem(X, y, lam_max)
    res = certified(fit_lasso(prob), prob)
    assert not res.beta.any()


def test_lasso_orthonormal_design_soft_threshold(rng):
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    X = 2.0 * q  # X^T X / 4 = I
    y = rng.standard_normal(4)
    lam = 0.3
    prob = RegressionProblem(X, y, lam)
    res = certified(fit_lasso(prob), prob)
    assert np.allclose(res.beta, soft(X.T @ y / 4, lam), atol=1e-10)


def test_lasso_against_prox_grad(rng):
    X = rng.standard_normal((20, 8))
    y = X @ np.array([1.0, -2, 0, 0, 0.5, 0, 0, 0]) + 0.3 * rng.standard_normal(20)
    prob = RegressionProblem(X, y, 0.1)
    res = certified(fit_lasso(prob), prob)
    ref = prox_grad_lasso(prob, 100_000)
    assert abs(res.objective - ref.objective) < 1e-8
    # n > p with a Gaussian design: strictly convex, unique minimiser
    assert np.max(np.abs(res.beta - ref.beta)) < 1e-5


def test_lasso_objective_monotone(rng):
    X = rng.standard_normal((40, 60))
    y = X[:, :5].sum(1) + 0.1 * rng.standard_normal(40)
    prob = RegressionProblem(X, y, 0.01)
    res = certified(fit_lasso(prob, record_objective=True), prob)
    trace = res.objective_trace
    assert trace.size == res.iters + 1
    assert np.all(np.diff(trace) <= 1e-12)
    assert trace[-1] == pytest.approx(res.objective, abs=1e-12)


def test_lasso_max_iter_warns(rng):
    X = rng.standard_normal((40, 60))
    y = rng.standard_normal(40)
    prob = RegressionProblem(X, y, 1e-4, max_iter=2)
    with pytest.warns(MaxIterExceeded):
        res = fit_lasso(prob)
    assert not res.converged and res.iters == 2


def test_lasso_zero_column_ignored(rng):
    X = rng.standard_normal((20, 4))
    X[:, 2] = 0.0
    y = rng.standard_normal(20)
    prob = RegressionProblem(X, y, 0.05)
    res = certified(fit_lasso(prob), prob)
    assert res.beta[2] == 0.0


def test_lasso_intercept_matches_centred_fit(rng):
    X = rng.standard_normal((50, 6)) + 3.0
    y = X[:, 0] - 2 * X[:, 1] + 5.0 + 0.1 * rng.standard_normal(50)
    res = fit_lasso(RegressionProblem(X, y, 0.05, fit_intercept=True))
    Xc, yc = X - X.mean(0), y - y.mean()
    ref = fit_lasso(RegressionProblem(Xc, yc, 0.05))
    assert np.allclose(res.beta, ref.beta, atol=1e-9)
    assert res.intercept == pytest.approx(y.mean() - X.mean(0) @ ref.beta)


def test_lasso_standardize_rescales(rng):
    X = rng.standard_normal((50, 6)) * np.array([1, 10, 0.1, 1, 1, 1])
    y = X[:, 1] + rng.standard_normal(50)
    res = fit_lasso(RegressionProblem(X, y, 0.05, standardize=True))
    scale = np.sqrt((X**2).mean(0))
    ref = fit_lasso(RegressionProblem(X / scale, y, 0.05))
    assert np.allclose(res.beta, ref.beta / scale, atol=1e-9)


def test_continuation_matches_direct(rng):
    X = rng.standard_normal((60, 100))
    y = X[:, :4].sum(1)
    prob = RegressionProblem(X, y, 0.02)
    a = certified(fit_lasso(prob), prob)
    b = certified(fit_lasso_continuation(prob), prob)
    assert abs(a.objective - b.objective) < 1e-9


def test_continuation_noiseless_interpolation_recovers_sparse_truth(rng):
    X = rng.standard_normal((80, 120))
    beta0 = np.zeros(120)
    beta0[:5] = 1.0
    res = fit_lasso_continuation(RegressionProblem(X, X @ beta0, 0.0))
    assert np.linalg.norm(res.beta - beta0) < 1e-3


# analytic properties on synthetic missing-data instances

def _zero_imputed_instance(seed, n=200, p=100, alpha=0.8, sigma=0.5):
    X = synth.gen_identity_gaussian(n, p, seed)
    beta0, _ = synth.gen_beta0_sqrt_sparsity(p)
    eps = sigma * synth.make_rng(seed + 1).standard_normal(n)
    y = X @ beta0 + eps
    Xh = impute.zero_impute(synth.apply_mcar(X, alpha, seed + 2)).data
    return X, Xh, y, beta0, eps


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_basic_inequality(seed):
    _, Xh, y, beta0, _ = _zero_imputed_instance(seed)
    prob = RegressionProblem(Xh, y, 0.05)
    res = certified(fit_lasso(prob), prob)
    assert res.objective <= lasso_objective(Xh, y, beta0, 0.05) + 1e-12


@pytest.mark.parametrize("seed", [4, 5, 6])
def test_cone_membership(seed):
    X, Xh, y, beta0, eps = _zero_imputed_instance(seed)
    n = X.shape[0]
    noise = max(np.max(np.abs(Xh.T @ ((X - Xh) @ beta0) / n)), np.max(np.abs(Xh.T @ eps / n)))
    prob = RegressionProblem(Xh, y, 4 * noise)
    res = certified(fit_lasso(prob), prob)
    w = res.beta - beta0
    support = beta0 != 0
    assert np.abs(w[~support]).sum() <= 3 * np.abs(w[support]).sum() + 1e-8


def test_restricted_eigenvalue_positive():
    p, s, alpha = 100, 10, 0.7
    n = int(math.ceil(8 * s * math.log(p)))
    X = synth.gen_identity_gaussian(n, p, seed=77)
    Xh = impute.zero_impute(synth.apply_mcar(X, alpha, seed=78)).data
    rng = np.random.default_rng(79)
    worst = np.inf
    for _ in range(1000):
        w = np.zeros(p)
        w[:s] = rng.standard_normal(s)
        off = rng.standard_normal(p - s)
        # scale the off-support part to a random point inside the cone
        off *= rng.uniform(0, 3) * np.abs(w[:s]).sum() / np.abs(off).sum()
        w[s:] = off
        w /= np.linalg.norm(w)
        worst = min(worst, float(np.sum((Xh @ w) ** 2) / n))
    assert worst > alpha / 4


# square-root LASSO

def test_sqrt_lasso_zero_when_penalty_dominates(rng):
    X = rng.standard_normal((30, 10))
    y = rng.standard_normal(30)
    bound = np.max(np.abs(X.T @ y / 30)) / (np.linalg.norm(y) / math.sqrt(30))
    prob = RegressionProblem(X, y, bound * 1.01, solver=Solver.SqrtLasso)
    res = certified(fit_sqrt_lasso(prob), prob)
    assert not res.beta.any()
    assert res.objective == pytest.approx(np.linalg.norm(y) / math.sqrt(30))


def test_sqrt_lasso_noiseless_least_squares(rng):
    X = rng.standard_normal((30, 5))
    beta0 = rng.standard_normal(5)
    prob = RegressionProblem(X, X @ beta0, 0.0, solver=Solver.SqrtLasso)
    with pytest.warns(ZeroResidualDegenerate):
        res = fit_sqrt_lasso(prob)
    assert res.degenerate and not res.converged
    assert np.allclose(res.beta, beta0, atol=1e-7)


def test_sqrt_lasso_optimality_condition(rng):
    X = rng.standard_normal((30, 10))
    y = X[:, :3].sum(1) + 0.5 * rng.standard_normal(30)
    lam = 0.2
    prob = RegressionProblem(X, y, lam, solver=Solver.SqrtLasso)
    res = certified(fit(prob), prob)
    r = y - X @ res.beta
    assert np.max(np.abs(X.T @ r / 30)) <= lam * np.linalg.norm(r) / math.sqrt(30) + prob.tol
    assert res.sigma_hat == pytest.approx(np.linalg.norm(r) / math.sqrt(30), rel=1e-6)


@pytest.mark.slow
def test_sqrt_lasso_against_sigma_grid(rng):
    n = 30
    X = rng.standard_normal((n, 10))
    y = X[:, :3] @ np.array([1.0, -1.0, 0.5]) + 0.5 * rng.standard_normal(n)
    lam = 0.2
    prob = RegressionProblem(X, y, lam, solver=Solver.SqrtLasso)
    res = certified(fit_sqrt_lasso(prob), prob)
    top = np.linalg.norm(y) / math.sqrt(n)
    beta = None
    best = np.inf
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for s in np.linspace(top, 1e-3 * top, 10_000):
            beta = fit_lasso(RegressionProblem(X, y, lam * s), beta_init=beta).beta
            best = min(best, sqrt_lasso_objective(X, y, beta, lam))
    assert res.objective <= best + 1e-9
    assert best - res.objective < 1e-6
