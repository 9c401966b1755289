"""Slow, direct reference computations used to check the fast paths.

Nothing here imports from :mod:`misslasso.impute` or :mod:`misslasso.solvers`;
each routine recomputes its answer from first principles.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import FitResult, RegressionProblem, SparsityGraph
from .errors import SingularSystem, SupercriticalRegime


def dense_conditional_mean(Sigma, row_values, mask_row, node: int) -> float:
    """E[X_node | all observed coordinates] for a zero-mean Gaussian row."""
    Sigma = np.asarray(Sigma, dtype=float)
    mask_row = np.asarray(mask_row, dtype=bool)
    S = np.flatnonzero(mask_row)
    if S.size == 0:
        return 0.0
    A = Sigma[np.ix_(S, S)]
    if np.linalg.cond(A) > 1e14:
        raise SingularSystem("observed covariance block is singular")
    x = np.asarray(row_values, dtype=float)[S]
    return float(Sigma[node, S] @ np.linalg.solve(A, x))


def exhaustive_blanket(graph: SparsityGraph, mask_row, node: int) -> set:
    """First observed vertex of every simple path leaving ``node`` through missing vertices."""
    mask_row = np.asarray(mask_row, dtype=bool)
    adj = graph.adjacency
    found = set()

    def walk(u, visited):
        for v in np.flatnonzero(adj[u]).tolist():
            if v in visited:
                continue
            if mask_row[v]:
                found.add(v)
            else:
                walk(v, visited | {v})

    walk(node, {node})
    return found


def _power_iteration(M, iters=1000, seed=0):
    v = np.random.default_rng(seed).standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = M @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
        new = float(v @ M @ v)
        if abs(new - lam) <= 1e-15 * max(abs(new), 1.0):
            lam = new
            break
        lam = new
    return lam


def prox_grad_lasso(problem: RegressionProblem, iters: int) -> FitResult:
    """ISTA with step 1/L, L the top eigenvalue of X^T X / n.

    Stops early only once an iterate reproduces itself exactly.
    """
    X, y = problem.X, problem.y
    n, p = X.shape
    lam = float(problem.lam)
    G = X.T @ X / n
    c = X.T @ y / n
    # small safety margin so roundoff in the eigenvalue never makes the step too long
    L = _power_iteration(G) * (1 + 1e-10)
    beta = np.zeros(p)
    done = 0
    if L == 0:
        done = iters
    else:
        t = 1.0 / L
        for done in range(1, iters + 1):
            z = beta - t * (G @ beta - c)
            new = np.sign(z) * np.maximum(np.abs(z) - t * lam, 0.0)
            if np.array_equal(new, beta):
                beta = new
                break
            beta = new
    r = y - X @ beta
    g = -X.T @ r / n
    viol = np.where(beta == 0, np.maximum(np.abs(g) - lam, 0.0), np.abs(g + lam * np.sign(beta)))
    obj = 0.5 * (r @ r) / n + lam * np.abs(beta).sum()
    kkt = float(viol.max()) if p else 0.0
    return FitResult(beta=beta, objective=float(obj), kkt_residual=kkt, iters=done, converged=kkt <= problem.tol)


@dataclass
class TreeSimResult:
    sizes: np.ndarray
    histogram: np.ndarray
    truncated: int
    supercritical: bool
    variant: str

    def mean(self) -> float:
        return float(self.sizes.mean())

    def stderr(self) -> float:
        return float(self.sizes.std(ddof=1) / math.sqrt(self.sizes.size))

    def survival(self) -> tuple[np.ndarray, np.ndarray]:
        """(t, P(S >= t)) for t = 1..max observed size."""
        t = np.arange(1, self.histogram.size)
        tail = self.histogram[::-1].cumsum()[::-1] / self.sizes.size
        return t, tail[1:]


def blanket_tree_simulator(
    d_max: int, alpha: float, trials: int, seed: int, variant: str = "downward", depth_cap: int = 60
) -> TreeSimResult:
    """Blanket sizes under Bernoulli(alpha) site percolation on the d_max-regular tree.

    ``downward`` is the number of first open vertices below (and including)
    a vertex that has d_max - 1 children. ``root`` is the blanket of a missing
    vertex with d_max children, each contributing an independent downward
    count. Generations are explored level by level; vertices still unresolved
    at ``depth_cap`` are dropped and the trial counted as truncated.
    """
    if variant not in ("downward", "root"):
        raise ValueError(f"variant must be 'downward' or 'root', got {variant!r}")
    supercritical = (1 - alpha) * (d_max - 1) >= 1
    if supercritical:
        warnings.warn(
            f"(1 - alpha)(d_max - 1) = {(1 - alpha) * (d_max - 1):.3f} >= 1; sizes are depth-capped",
            SupercriticalRegime,
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    active = np.full(trials, 1 if variant == "downward" else d_max, dtype=np.int64)
    sizes = np.zeros(trials, dtype=np.int64)
    cap = np.int64(1) << 50
    for _ in range(depth_cap + 1):
        if not active.any():
            break
        opened = rng.binomial(active, alpha)
        sizes += opened
        active = np.minimum((active - opened) * (d_max - 1), cap)
    truncated = int(np.count_nonzero(active))
    hist = np.bincount(sizes) if sizes.max() < 10_000_000 else np.zeros(1, dtype=np.int64)
    return TreeSimResult(sizes=sizes, histogram=hist, truncated=truncated, supercritical=supercritical, variant=variant)
