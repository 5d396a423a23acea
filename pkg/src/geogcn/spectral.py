"""Spectral filtering on graphs: exact eigenbasis route, Chebyshev recurrence,
and the single-parameter first-order filter.

The dense eigendecomposition is a validation tool for small graphs; the
production path is the sparse first-order propagation. The Chebyshev
recurrence operates on vectors only, so its cost stays O(K |E|).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as _cheb
from numpy.polynomial import polynomial as _poly

from .spatial import (
    LaplacianBundle,
    SpatialGraph,
    propagation_operator,
    sym_normalized_adjacency,
)

DEFAULT_DENSE_LIMIT = 2000

# Valid upper bound for the normalized-Laplacian spectrum; the first-order
# filter is derived under exactly this value.
LAMBDA_MAX_DEFAULT = 2.0


class DenseLimitExceededError(ValueError):
    """Dense eigendecomposition refused; use the sparse filter paths instead."""


class PowerIterationError(RuntimeError):
    """Power iteration hit the iteration cap before converging."""

    def __init__(self, message: str, last_estimate: float):
        super().__init__(message)
        self.last_estimate = last_estimate


@dataclass(frozen=True)
class SpectralBasis:
    """Orthonormal eigenvectors (columns) and ascending eigenvalues of L_norm."""

    eigenvectors: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class ChebyshevCoefficients:
    """Coefficients theta'_0..theta'_K of a Chebyshev-basis spectral filter.

    lambda_max rescales the spectrum onto [-1, 1] via
    Lt = (2 / lambda_max) L_norm - I.
    """

    coeffs: np.ndarray
    lambda_max: float = LAMBDA_MAX_DEFAULT

    def __post_init__(self):
        coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "coeffs", coeffs)
        if coeffs.ndim != 1 or coeffs.size < 1:
            raise ValueError("need at least the order-0 coefficient")
        if self.lambda_max <= 0:
            raise ValueError("lambda_max must be positive")

    @property
    def order(self) -> int:
        return self.coeffs.size - 1


def eigendecompose(bundle: LaplacianBundle, dense_limit: int = DEFAULT_DENSE_LIMIT) -> SpectralBasis:
    """Dense eigendecomposition of the normalized Laplacian.

    Refuses graphs above `dense_limit` nodes: the eigenvector product is
    O(n^2), so large graphs should go through chebyshev_filter or
    first_order_filter instead.
    """
    n = bundle.n
    if n > dense_limit:
        raise DenseLimitExceededError(
            f"eigendecomposition refused for n={n} > {dense_limit}; "
            "use chebyshev_filter or first_order_filter for large graphs"
        )
    eigenvalues, eigenvectors = np.linalg.eigh(bundle.normalized.toarray())
    return SpectralBasis(eigenvectors=eigenvectors, eigenvalues=eigenvalues)


def _check_signal(n: int, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"signal shape {x.shape} does not match graph size {n}")
    return x


def graph_fourier(basis: SpectralBasis, x: np.ndarray) -> np.ndarray:
    """Forward graph Fourier transform: projection onto the eigenbasis."""
    x = _check_signal(basis.n, x)
    return basis.eigenvectors.T @ x


def inverse_graph_fourier(basis: SpectralBasis, x_hat: np.ndarray) -> np.ndarray:
    """Inverse graph Fourier transform: synthesis from spectral coefficients."""
    x_hat = _check_signal(basis.n, x_hat)
    return basis.eigenvectors @ x_hat


def spectral_filter(basis: SpectralBasis, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Exact spectral filter: U diag(theta) U^T x, one free weight per eigenvalue."""
    x = _check_signal(basis.n, x)
    theta = _check_signal(basis.n, np.asarray(theta, dtype=float))
    return basis.eigenvectors @ (theta * (basis.eigenvectors.T @ x))


def chebyshev_filter(bundle: LaplacianBundle, cheb: ChebyshevCoefficients, x: np.ndarray) -> np.ndarray:
    """Apply sum_k theta'_k T_k(Lt) x via the three-term vector recurrence.

    Lt v is evaluated as (2 / lambda_max) (L_norm v) - v, so no rescaled
    matrix (let alone a dense power) is ever materialized.
    """
    x = _check_signal(bundle.n, x)
    ls = bundle.normalized
    scale = 2.0 / cheb.lambda_max

    def shifted(v: np.ndarray) -> np.ndarray:
        return scale * (ls @ v) - v

    coeffs = cheb.coeffs
    acc = coeffs[0] * x
    if cheb.order >= 1:
        t_prev, t_cur = x, shifted(x)
        acc = acc + coeffs[1] * t_cur
        for k in range(2, cheb.order + 1):
            t_prev, t_cur = t_cur, 2.0 * shifted(t_cur) - t_prev
            acc = acc + coeffs[k] * t_cur
    return acc


def chebyshev_coefficients_for_polynomial(
    poly_coeffs: np.ndarray, lambda_max: float = LAMBDA_MAX_DEFAULT
) -> ChebyshevCoefficients:
    """Chebyshev coefficients reproducing a power-basis polynomial filter.

    Given p(lam) = sum_j c_j lam^j (ascending coefficients), returns theta'
    with sum_k theta'_k T_k(t) = p((t + 1) lambda_max / 2), i.e. the filter
    whose chebyshev_filter application equals the exact spectral filter with
    per-eigenvalue weights p(lam_i).
    """
    p = _poly.Polynomial(np.atleast_1d(np.asarray(poly_coeffs, dtype=float)))
    half = lambda_max / 2.0
    composed = p(_poly.Polynomial([half, half]))
    return ChebyshevCoefficients(coeffs=_cheb.poly2cheb(composed.coef), lambda_max=lambda_max)


def estimate_lambda_max(
    bundle: LaplacianBundle,
    seed: int = 0,
    tol: float = 1e-12,
    maxiter: int = 20_000,
) -> float:
    """Power-iteration estimate of the largest normalized-Laplacian eigenvalue.

    The normalized Laplacian is positive semidefinite, so the dominant
    eigenvalue in magnitude is the largest eigenvalue. Deterministic for a
    given seed; raises PowerIterationError (carrying the last iterate) if the
    Rayleigh quotient has not stabilized within `maxiter` iterations.
    """
    ls = bundle.normalized
    n = bundle.n
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    previous = np.inf
    for _ in range(maxiter):
        w = ls @ v
        estimate = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        if abs(estimate - previous) <= tol * max(1.0, abs(estimate)):
            return estimate
        previous = estimate
    raise PowerIterationError(
        f"power iteration did not converge in {maxiter} iterations "
        f"(last estimate {estimate!r})",
        last_estimate=estimate,
    )


def first_order_filter(
    graph: SpatialGraph,
    theta: float,
    x: np.ndarray,
    renormalized: bool = True,
) -> np.ndarray:
    """Single-parameter first-order filter.

    With renormalized=True (the production form) returns theta * P x where P
    is the renormalized propagation operator. With renormalized=False returns
    theta * (I + D^{-1/2} W D^{-1/2}) x, the pre-renormalization expression
    the operator is derived from; the two differ on irregular graphs.
    """
    x = _check_signal(graph.n, x)
    if renormalized:
        return theta * (propagation_operator(graph).matrix @ x)
    s = sym_normalized_adjacency(graph)
    return theta * (x + s @ x)
