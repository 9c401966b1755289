"""Shared domain types: masked data, imputed designs, problems, fits, graphs."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    AlphaOutOfRange,
    DimensionMismatch,
    MissingEntryAccess,
    NonFiniteObservedEntry,
    UsageError,
)


def _frozen(a, dtype=None):
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class MaskedMatrix:
    """Observed data ``Z`` with an explicit observation mask.

    ``mask[i, a]`` is True when entry ``(i, a)`` was observed. Values stored at
    missing positions are meaningless (NaN internally) and are never handed
    out by :meth:`get`.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 2 or mask.ndim != 2 or values.shape != mask.shape:
            raise DimensionMismatch(
                f"values shape {values.shape} does not match mask shape {mask.shape}"
            )
        stored = np.where(mask, values, np.nan)
        object.__setattr__(self, "values", _frozen(stored))
        object.__setattr__(self, "mask", _frozen(mask))
        validate(self)

    @classmethod
    def from_full(cls, full, mask) -> "MaskedMatrix":
        return cls(values=full, mask=mask)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def get(self, i: int, a: int) -> float:
        if not self.mask[i, a]:
            raise MissingEntryAccess(f"entry ({i}, {a}) is missing")
        return float(self.values[i, a])

    def observed_fraction(self) -> float:
        return float(self.mask.mean()) if self.mask.size else 0.0

    def zero_filled(self) -> np.ndarray:
        """Dense copy with missing cells set to 0 (the ``X_0`` design)."""
        return np.where(self.mask, self.values, 0.0)


def validate(masked: MaskedMatrix) -> None:
    """Raise if ``masked`` violates the MaskedMatrix invariants."""
    values = np.asarray(masked.values)
    mask = np.asarray(masked.mask)
    if values.ndim != 2 or values.shape != mask.shape:
        raise DimensionMismatch(
            f"values shape {values.shape} does not match mask shape {mask.shape}"
        )
    if mask.dtype != bool:
        raise DimensionMismatch("mask must be boolean")
    if not np.all(np.isfinite(values[mask])):
        bad = np.argwhere(mask & ~np.isfinite(values))[0]
        raise NonFiniteObservedEntry(f"observed entry {tuple(bad)} is not finite")


class ImputeSource(enum.Enum):
    ZeroImpute = "zero"
    Ar1Exact = "ar1-exact"
    Ar1Estimated = "ar1-estimated"
    GraphicalExact = "graphical-exact"
    GraphicalEstimated = "graphical-estimated"


@dataclass(frozen=True, eq=False)
class ImputedMatrix:
    data: np.ndarray
    source: ImputeSource
    observed_passthrough: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = _frozen(self.data, dtype=float)
        if data.ndim != 2:
            raise DimensionMismatch("imputed data must be 2-D")
        if not np.all(np.isfinite(data)):
            raise NonFiniteObservedEntry("imputed matrix contains non-finite entries")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


class Solver(enum.Enum):
    Lasso = "lasso"
    SqrtLasso = "sqrt-lasso"


@dataclass(frozen=True, eq=False)
class RegressionProblem:
    """Design, response, penalty level and solver settings.

    ``design`` may be an :class:`ImputedMatrix` or a plain 2-D array.
    """

    design: object
    response: np.ndarray
    lam: float
    solver: Solver = Solver.Lasso
    tol: float = 1e-8
    max_iter: int = 100_000
    fit_intercept: bool = False
    standardize: bool = False

    def __post_init__(self):
        X = self.design.data if isinstance(self.design, ImputedMatrix) else self.design
        X = np.asarray(X, dtype=float)
        y = np.asarray(self.response, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DimensionMismatch(
                f"design has {X.shape[0] if X.ndim == 2 else '?'} rows, response has {y.shape[0]}"
            )
        if not (self.lam >= 0):
            raise UsageError(f"lambda must be nonnegative, got {self.lam}")
        if not (self.tol > 0) or self.max_iter < 1:
            raise UsageError("tol must be positive and max_iter at least 1")
        object.__setattr__(self, "response", _frozen(y))

    @property
    def X(self) -> np.ndarray:
        X = self.design.data if isinstance(self.design, ImputedMatrix) else self.design
        return np.asarray(X, dtype=float)

    @property
    def y(self) -> np.ndarray:
        return self.response


@dataclass
class FitResult:
    beta: np.ndarray
    objective: float
    kkt_residual: float
    iters: int
    converged: bool
    intercept: float = 0.0
    degenerate: bool = False
    sigma_hat: Optional[float] = None


@dataclass(frozen=True)
class CovarianceKind:
    """``name`` is one of ``identity``, ``ar1``, ``banded``."""

    name: str = "identity"
    phi: Optional[float] = None
    bandwidth: Optional[int] = None

    def __post_init__(self):
        if self.name not in ("identity", "ar1", "banded"):
            raise UsageError(f"unknown covariance kind {self.name!r}")
        if self.name != "identity" and self.phi is None:
            raise UsageError(f"covariance kind {self.name!r} needs phi")
        if self.name == "banded" and self.bandwidth is None:
            raise UsageError("banded covariance needs a bandwidth")


@dataclass(frozen=True, eq=False)
class ModelTruth:
    beta0: np.ndarray
    sigma: float
    alpha: float
    sigma_x: float = 1.0
    covariance_kind: CovarianceKind = CovarianceKind()

    def __post_init__(self):
        object.__setattr__(self, "beta0", _frozen(np.ravel(self.beta0), dtype=float))
        if not (0 < self.alpha <= 1):
            raise AlphaOutOfRange(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def s(self) -> int:
        return int(np.count_nonzero(self.beta0))

    @property
    def R(self) -> float:
        return float(np.linalg.norm(self.beta0))

    def to_dict(self) -> dict:
        return {
            "beta0": [float(b) for b in self.beta0],
            "s": self.s,
            "R": self.R,
            "sigma": float(self.sigma),
            "sigma_x": float(self.sigma_x),
            "alpha": float(self.alpha),
            "covariance_kind": {
                "name": self.covariance_kind.name,
                "phi": self.covariance_kind.phi,
                "bandwidth": self.covariance_kind.bandwidth,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelTruth":
        ck = d.get("covariance_kind") or {}
        return cls(
            beta0=np.asarray(d["beta0"], dtype=float),
            sigma=float(d["sigma"]),
            alpha=float(d["alpha"]),
            sigma_x=float(d.get("sigma_x", 1.0)),
            covariance_kind=CovarianceKind(**ck) if ck else CovarianceKind(),
        )


@dataclass(frozen=True, eq=False)
class SparsityGraph:
    """Undirected graph given by the off-diagonal support of a precision matrix."""

    adjacency: np.ndarray
    neighbors: tuple = field(init=False, repr=False)

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=bool)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"adjacency must be square, got {A.shape}")
        if np.any(np.diag(A)):
            raise DimensionMismatch("adjacency has self-loops")
        if not np.array_equal(A, A.T):
            raise DimensionMismatch("adjacency is not symmetric")
        object.__setattr__(self, "adjacency", _frozen(A))
        object.__setattr__(
            self, "neighbors", tuple(tuple(np.flatnonzero(row).tolist()) for row in A)
        )

    @property
    def p(self) -> int:
        return self.adjacency.shape[0]

    @property
    def d_max(self) -> int:
        return int(self.adjacency.sum(axis=1).max()) if self.p else 0

    @classmethod
    def from_edges(cls, p: int, edges) -> "SparsityGraph":
        A = np.zeros((p, p), dtype=bool)
        for i, j in edges:
            if not (0 <= i < p and 0 <= j < p):
                raise DimensionMismatch(f"edge ({i}, {j}) out of range for p={p}")
            if i == j:
                raise DimensionMismatch(f"self-loop at node {i}")
            A[i, j] = A[j, i] = True
        return cls(A)

    @classmethod
    def from_precision(cls, omega, atol: float = 0.0) -> "SparsityGraph":
        omega = np.asarray(omega, dtype=float)
        A = np.abs(omega) > atol
        np.fill_diagonal(A, False)
        return cls(A | A.T)

    def edges(self) -> list[tuple[int, int]]:
        ii, jj = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(ii.tolist(), jj.tolist()))
