"""Synthetic designs, missingness masks, regression vectors and responses.

Every generator takes an integer seed and is a pure function of its inputs.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_triangular

from .core import MaskedMatrix, SparsityGraph
from .errors import (
    AlphaOutOfRange,
    DimensionMismatch,
    InvalidDimension,
    NotPositiveDefinite,
    PhiOutOfRange,
    UsageError,
)

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, index: int) -> int:
    """Child seed for stream ``index`` of ``base_seed``.

    Two rounds of splitmix64 over ``base_seed`` and ``index``; depends only on
    the pair, never on call order.
    """
    return splitmix64(splitmix64(int(base_seed) & _MASK64) ^ (int(index) & _MASK64))


def make_rng(seed: int) -> np.random.Generator:
    seed = int(seed)
    if seed < 0 or seed > _MASK64:
        raise UsageError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def _check_dims(n: int, p: int) -> None:
    if int(n) < 1 or int(p) < 1:
        raise InvalidDimension(f"need n, p >= 1, got n={n}, p={p}")


def gen_identity_gaussian(n: int, p: int, seed: int) -> np.ndarray:
    _check_dims(n, p)
    return make_rng(seed).standard_normal((n, p))


def ar1_covariance(p: int, phi: float) -> np.ndarray:
    """Stationary AR(1) covariance phi^|i-j| / (1 - phi^2)."""
    if not abs(phi) < 1:
        raise PhiOutOfRange(f"|phi| must be < 1, got {phi}")
    lags = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    return np.power(float(phi), lags) / (1.0 - phi * phi)


def gen_ar1(n: int, p: int, phi: float, seed: int) -> np.ndarray:
    """Rows are ``p`` consecutive points of a stationary AR(1) chain with unit innovations."""
    _check_dims(n, p)
    if not abs(phi) < 1:
        raise PhiOutOfRange(f"|phi| must be < 1, got {phi}")
    g = make_rng(seed).standard_normal((n, p))
    X = np.empty((n, p))
    X[:, 0] = g[:, 0] / math.sqrt(1.0 - phi * phi)
    for t in range(1, p):
        X[:, t] = phi * X[:, t - 1] + g[:, t]
    return X


def banded_precision(p: int, phi: float, bandwidth: int) -> np.ndarray:
    """Omega_ij = phi^|i-j| for |i-j| <= bandwidth, else 0."""
    if bandwidth < 0:
        raise UsageError(f"bandwidth must be >= 0, got {bandwidth}")
    lags = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    omega = np.where(lags <= bandwidth, np.power(float(phi), lags), 0.0)
    return omega


def gen_banded_precision(n: int, p: int, phi: float, bandwidth: int, seed: int):
    """Sample rows from N(0, Omega^-1) for a banded precision Omega.

    Returns
    -------
    X : (n, p) array
    graph : SparsityGraph of the off-diagonal support of Omega
    sigma : (p, p) covariance Omega^-1
    """
    _check_dims(n, p)
    omega = banded_precision(p, phi, bandwidth)
    try:
        L = np.linalg.cholesky(omega)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(
            f"banded precision with phi={phi}, bandwidth={bandwidth}, p={p} is not positive definite"
        ) from None
    # Omega = L L^T  =>  x = L^{-T} g has covariance Omega^{-1}
    g = make_rng(seed).standard_normal((p, n))
    X = solve_triangular(L, g, lower=True, trans="T").T
    Linv = solve_triangular(L, np.eye(p), lower=True)
    sigma = Linv.T @ Linv
    sigma = 0.5 * (sigma + sigma.T)
    return X, SparsityGraph.from_precision(omega), sigma


def apply_mcar(full, alpha: float, seed: int) -> MaskedMatrix:
    """Observe each entry independently with probability ``alpha``."""
    if not (0 < alpha <= 1):
        raise AlphaOutOfRange(f"alpha must lie in (0, 1], got {alpha}")
    full = np.asarray(full, dtype=float)
    mask = make_rng(seed).random(full.shape) < alpha
    return MaskedMatrix(full, mask)


class PatternDistribution:
    """Distribution over boolean row patterns of length ``p``."""

    p: int

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError


class PointMass(PatternDistribution):
    def __init__(self, pattern):
        self.pattern = np.asarray(pattern, dtype=bool)
        self.p = self.pattern.size

    def sample(self, rng, n):
        return np.tile(self.pattern, (n, 1))


class IndependentBernoulli(PatternDistribution):
    """Each coordinate observed independently with its own probability."""

    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=float)
        self.p = self.probs.size

    def sample(self, rng, n):
        return rng.random((n, self.p)) < self.probs


class PatternMixture(PatternDistribution):
    """Draw one of a finite list of patterns with the given weights."""

    def __init__(self, patterns, weights=None):
        self.patterns = np.asarray(patterns, dtype=bool)
        k, self.p = self.patterns.shape
        w = np.ones(k) if weights is None else np.asarray(weights, dtype=float)
        self.weights = w / w.sum()

    def sample(self, rng, n):
        idx = rng.choice(len(self.patterns), size=n, p=self.weights)
        return self.patterns[idx]


def apply_mnar_rowpattern(full, pattern_dist: PatternDistribution, seed: int) -> MaskedMatrix:
    """Mask rows drawn i.i.d. from ``pattern_dist``, independently of the values."""
    full = np.asarray(full, dtype=float)
    n, p = full.shape
    if pattern_dist.p != p:
        raise DimensionMismatch(f"pattern length {pattern_dist.p} != p={p}")
    mask = np.asarray(pattern_dist.sample(make_rng(seed), n), dtype=bool)
    return MaskedMatrix(full, mask)


def gen_beta0_sqrt_sparsity(p: int):
    if p < 1:
        raise InvalidDimension(f"need p >= 1, got {p}")
    s = math.isqrt(p - 1) + 1  # ceil(sqrt(p)) in exact integer arithmetic
    beta0 = np.zeros(p)
    beta0[:s] = 1.0
    return beta0, s


def gen_response(X, beta0, sigma: float, seed: int) -> np.ndarray:
    if sigma < 0:
        raise UsageError(f"sigma must be >= 0, got {sigma}")
    X = np.asarray(X, dtype=float)
    y = X @ np.asarray(beta0, dtype=float)
    if sigma > 0:
        y = y + sigma * make_rng(seed).standard_normal(X.shape[0])
    return y
