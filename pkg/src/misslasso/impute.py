"""Conditional-expectation imputation engines.

Three designs are supported: identity covariance (zero imputation), the
stationary AR(1) chain, and Gaussian graphical models with a known sparsity
pattern of the precision matrix. All engines copy observed entries verbatim
and only ever read ``Z.values`` at observed positions.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import ImputedMatrix, ImputeSource, MaskedMatrix, SparsityGraph
from .errors import (
    AlphaOutOfRange,
    DegenerateDenominator,
    DimensionMismatch,
    NodeObserved,
    PhiOutOfRange,
    SingularBlanketSystem,
)

PHI_CLAMP = 1.0 - 1e-9


@dataclass(frozen=True)
class Ar1Params:
    phi: float
    estimated: bool = False

    def __post_init__(self):
        if not abs(self.phi) < 1:
            raise PhiOutOfRange(f"|phi| must be < 1, got {self.phi}")


@dataclass(frozen=True)
class BlanketResult:
    node: int
    blanket: frozenset
    explored_missing: frozenset


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    sigma_tilde: np.ndarray
    alpha_used: float


def zero_impute(Z: MaskedMatrix) -> ImputedMatrix:
    return ImputedMatrix(Z.zero_filled(), ImputeSource.ZeroImpute)


def estimate_phi(Z: MaskedMatrix, alpha: float) -> Ar1Params:
    """Moment estimator of the AR(1) coefficient from masked data.

    Ratio of the alpha^2-rescaled lag-1 product sum to the alpha-rescaled
    sum of squares, both over positions a = 1..p-1. The result is clamped
    into (-1 + 1e-9, 1 - 1e-9).
    """
    if not (0 < alpha <= 1):
        raise AlphaOutOfRange(f"alpha must lie in (0, 1], got {alpha}")
    n, p = Z.shape
    X0 = Z.zero_filled()
    # zero-filled cells make the M_ia M_i(a+1) factors implicit
    lag_sum = float(np.sum(X0[:, :-1] * X0[:, 1:]))
    sq_sum = float(np.sum(X0[:, :-1] ** 2))
    if sq_sum == 0.0:
        raise DegenerateDenominator("no observed signal among columns 1..p-1")
    num = lag_sum / (alpha**2 * n * p)
    den = sq_sum / (alpha * n * p)
    phi = min(max(num / den, -PHI_CLAMP), PHI_CLAMP)
    return Ar1Params(phi=phi, estimated=True)


def _ar1_row(values, mask_row, phi):
    out = np.where(mask_row, values, 0.0)
    obs = np.flatnonzero(mask_row)
    miss = np.flatnonzero(~mask_row)
    if obs.size == 0 or miss.size == 0 or phi == 0.0:
        return out
    pos = np.searchsorted(obs, miss)
    has_left = pos > 0
    has_right = pos < obs.size
    left = obs[np.maximum(pos - 1, 0)]
    right = obs[np.minimum(pos, obs.size - 1)]
    xl = values[left]
    xr = values[right]
    d1 = miss - left
    d2 = right - miss

    imputed = np.zeros(miss.size)
    both = has_left & has_right
    if both.any():
        a, b = d1[both], d2[both]
        denom = 1.0 - np.power(phi, 2 * (a + b))
        w_left = np.power(phi, a) * (1.0 - np.power(phi, 2 * b)) / denom
        w_right = np.power(phi, b) * (1.0 - np.power(phi, 2 * a)) / denom
        imputed[both] = w_left * xl[both] + w_right * xr[both]
    only_left = has_left & ~has_right
    imputed[only_left] = np.power(phi, d1[only_left]) * xl[only_left]
    only_right = has_right & ~has_left
    imputed[only_right] = np.power(phi, d2[only_right]) * xr[only_right]
    out[miss] = imputed
    return out


def ar1_impute(Z: MaskedMatrix, params: Ar1Params) -> ImputedMatrix:
    """Impute each missing entry by its AR(1) conditional mean given the row.

    With observed neighbours on both sides at distances ``d1`` (left) and
    ``d2`` (right)::

        x = phi^d1 (1 - phi^(2 d2)) / (1 - phi^(2(d1+d2))) * x_L
          + phi^d2 (1 - phi^(2 d1)) / (1 - phi^(2(d1+d2))) * x_R

    With only one side observed at distance ``d`` the value is ``phi^d * x``;
    with none it is 0.
    """
    phi = float(params.phi)
    if not abs(phi) < 1:
        raise PhiOutOfRange(f"|phi| must be < 1, got {phi}")
    data = np.empty(Z.shape)
    for i in range(Z.n):
        data[i] = _ar1_row(Z.values[i], Z.mask[i], phi)
    source = ImputeSource.Ar1Estimated if params.estimated else ImputeSource.Ar1Exact
    return ImputedMatrix(data, source, meta={"phi": phi})


def estimate_covariance_mcar(Z: MaskedMatrix, alpha: float) -> CovarianceEstimate:
    """Unbiased covariance estimate from zero-filled MCAR(alpha) data."""
    if not (0 < alpha <= 1):
        raise AlphaOutOfRange(f"alpha must lie in (0, 1], got {alpha}")
    X0 = Z.zero_filled()
    n = X0.shape[0]
    gram = X0.T @ X0
    sigma = gram / (alpha**2 * n)
    sigma[np.diag_indices_from(sigma)] -= (1.0 - alpha) / (alpha**2 * n) * np.diag(gram)
    sigma = 0.5 * (sigma + sigma.T)
    return CovarianceEstimate(sigma_tilde=sigma, alpha_used=float(alpha))


def markov_blanket(graph: SparsityGraph, mask_row, node: int) -> BlanketResult:
    """Breadth-first search from a missing ``node`` through missing vertices.

    Observed vertices reached are collected into the blanket and not expanded.
    """
    mask_row = np.asarray(mask_row, dtype=bool)
    if mask_row.size != graph.p:
        raise DimensionMismatch(f"mask length {mask_row.size} != graph size {graph.p}")
    if mask_row[node]:
        raise NodeObserved(f"node {node} is observed")
    seen = {node}
    blanket = set()
    queue = deque([node])
    while queue:
        u = queue.popleft()
        for v in graph.neighbors[u]:
            if v in seen:
                continue
            seen.add(v)
            if mask_row[v]:
                blanket.add(v)
            else:
                queue.append(v)
    return BlanketResult(node, frozenset(blanket), frozenset(seen - blanket))


def _cholesky_solve(A, B):
    L = np.linalg.cholesky(A)
    return scipy.linalg.cho_solve((L, True), B, check_finite=False)


def _blanket_weights(sigma, targets, blanket):
    """Rows of Sigma_{T,S} Sigma_{S,S}^{-1} for the targets ``T``."""
    A = sigma[blanket][:, blanket]
    B = sigma[blanket][:, targets]
    try:
        return _cholesky_solve(A, B).T
    except np.linalg.LinAlgError:
        pass
    ridge = 1e-10 * np.trace(A) / len(blanket)
    A_r = A + ridge * np.eye(len(blanket))
    try:
        return _cholesky_solve(A_r, B).T
    except np.linalg.LinAlgError:
        pass
    # indefinite but well-conditioned plug-in blocks still have a unique solve
    if np.all(np.isfinite(A_r)) and np.linalg.cond(A_r) < 1e12:
        return np.linalg.solve(A_r, B).T
    raise SingularBlanketSystem(f"covariance block on blanket {list(blanket)} is singular")


def _graphical_row(values, mask_row, graph, sigma, cache):
    out = np.where(mask_row, values, 0.0)
    pending = set(np.flatnonzero(~mask_row).tolist())
    while pending:
        k = min(pending)
        res = markov_blanket(graph, mask_row, k)
        # every missing vertex reached shares the same blanket
        comp = tuple(sorted(res.explored_missing))
        pending.difference_update(comp)
        if not res.blanket:
            continue
        S = tuple(sorted(res.blanket))
        W = cache.get((comp, S))
        if W is None:
            W = cache[(comp, S)] = _blanket_weights(sigma, list(comp), list(S))
        out[list(comp)] = W @ values[list(S)]
    return out


def graphical_impute(Z: MaskedMatrix, graph: SparsityGraph, sigma) -> ImputedMatrix:
    """Gaussian conditional-mean imputation restricted to Markov blankets.

    ``sigma`` is either the exact covariance (array) or a
    :class:`CovarianceEstimate`; the provenance tag follows that choice.
    """
    if isinstance(sigma, CovarianceEstimate):
        S, source = np.asarray(sigma.sigma_tilde, dtype=float), ImputeSource.GraphicalEstimated
    else:
        S, source = np.asarray(sigma, dtype=float), ImputeSource.GraphicalExact
    if S.shape != (Z.p, Z.p) or graph.p != Z.p:
        raise DimensionMismatch("covariance, graph and data dimensions disagree")
    data = np.empty(Z.shape)
    cache = {}
    for i in range(Z.n):
        data[i] = _graphical_row(Z.values[i], Z.mask[i], graph, S, cache)
    return ImputedMatrix(data, source)
