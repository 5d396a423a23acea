"""Spatial weight matrices and Laplacian-family operators for planar point sets.

Coordinates are planar and pre-projected to meters; all pairwise geometry is
Euclidean (no geodesic handling). Weighted graphs are stored as symmetric
scipy CSR matrices with explicit zeros dropped and an empty diagonal;
self-connections enter exactly once, through the renormalized propagation
operator.

All functions here are pure: they never mutate their inputs and are safe to
call concurrently. Pairwise computations run over independent row blocks, so
results do not depend on the block size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

# Dense n x n intermediates are acceptable up to this many points.
DESK_SCALE_LIMIT = 20_000

# Row-block size for pairwise distance / kernel evaluation.
DEFAULT_BLOCK_SIZE = 2048


class DegenerateScaleError(ValueError):
    """A local kernel scale is zero because of coincident points."""


class DegenerateDistanceError(ValueError):
    """A weighting scheme cannot handle a zero off-diagonal distance."""


@dataclass(frozen=True)
class PointSet:
    """Planar locations with a categorical type and optional observed intensity.

    Attributes:
        ids: one opaque identifier per point (unique).
        coords: (n, 2) float array of planar coordinates in meters.
        type_label: (n,) integer array of categorical type indices.
        intensity: (n,) nonnegative counts, or None for prediction-only input.
    """

    ids: tuple[str, ...]
    coords: np.ndarray
    type_label: np.ndarray
    intensity: np.ndarray | None = None

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        labels = np.asarray(self.type_label, dtype=int)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "type_label", labels)
        n = coords.shape[0]
        if n < 1:
            raise ValueError("a PointSet needs at least one point")
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError(f"coords must be (n, 2), got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        if len(self.ids) != n or labels.shape != (n,):
            raise ValueError("ids, coords and type_label lengths disagree")
        if np.any(labels < 0):
            raise ValueError("type labels must be nonnegative indices")
        if self.intensity is not None:
            intensity = np.asarray(self.intensity, dtype=float)
            object.__setattr__(self, "intensity", intensity)
            if intensity.shape != (n,):
                raise ValueError("intensity length disagrees with coords")
            if not np.all(np.isfinite(intensity)) or np.any(intensity < 0):
                raise ValueError("intensities must be finite and >= 0")

    @property
    def n(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class SpatialGraph:
    """Symmetric nonnegative weighted adjacency over a point set.

    Invariants enforced at construction: W == W.T entrywise exactly, all
    stored weights positive and finite, empty diagonal.
    """

    n: int
    weights: sp.csr_matrix

    def __post_init__(self):
        w = self.weights
        if w.shape != (self.n, self.n):
            raise ValueError(f"weights shape {w.shape} does not match n={self.n}")
        if (w != w.T).nnz != 0:
            raise ValueError("adjacency must be exactly symmetric")
        if w.nnz:
            if not np.all(np.isfinite(w.data)) or np.any(w.data <= 0):
                raise ValueError("stored weights must be positive and finite")
        if w.diagonal().any():
            raise ValueError("adjacency diagonal must be empty")

    @property
    def edge_count(self) -> int:
        """Number of undirected edges."""
        return self.weights.nnz // 2

    @property
    def degrees(self) -> np.ndarray:
        """Weighted degree per node."""
        return np.asarray(self.weights.sum(axis=1)).ravel()


@dataclass(frozen=True)
class LaplacianBundle:
    """Degree vector, combinatorial Laplacian and symmetric normalized Laplacian.

    The normalized Laplacian uses the zero-degree convention: the inverse
    square-root degree of an isolated node is taken as 0, which leaves that
    node's row equal to the corresponding identity row.
    """

    degree: np.ndarray
    laplacian: sp.csr_matrix
    normalized: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.degree.shape[0]


@dataclass(frozen=True)
class PropagationOperator:
    """Renormalized symmetric propagation matrix applied per convolution layer.

    matrix = Dt^{-1/2} (W + I) Dt^{-1/2} where Dt is the degree of W + I.
    Symmetric, entries in [0, 1], spectral radius <= 1; equals the identity
    on an edgeless graph.
    """

    matrix: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


# --------------------------------------------------------------------------
# weighting schemes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BinaryScheme:
    """Unit weight for pairs within `radius` meters (boundary inclusive)."""

    radius: float


@dataclass(frozen=True)
class PowerScheme:
    """Weight d^(-exponent); rejects zero off-diagonal distances."""

    exponent: float


@dataclass(frozen=True)
class ExponentialScheme:
    """Weight exp(-rate * d)."""

    rate: float


@dataclass(frozen=True)
class GaussianScheme:
    """Self-tuning Gaussian kernel with per-point scale from the k-th neighbor."""

    k: int


WeightScheme = Union[BinaryScheme, PowerScheme, ExponentialScheme, GaussianScheme]


def _graph_from_dense(weights: np.ndarray) -> SpatialGraph:
    w = np.array(weights, dtype=float)
    np.fill_diagonal(w, 0.0)
    m = sp.csr_matrix(w)
    m.eliminate_zeros()
    return SpatialGraph(n=w.shape[0], weights=m)


def distance_matrix(points: PointSet, block_size: int = DEFAULT_BLOCK_SIZE) -> np.ndarray:
    """Dense symmetric Euclidean distance matrix in meters, zero diagonal.

    Rows are evaluated in blocks of `block_size` to bound the size of
    broadcast intermediates; every entry is computed by the same scalar
    expression, so the result is bit-identical for any block size.
    """
    n = points.n
    if n > DESK_SCALE_LIMIT:
        raise ValueError(
            f"dense distance matrix refused for n={n} > {DESK_SCALE_LIMIT} points"
        )
    coords = points.coords
    out = np.empty((n, n), dtype=float)
    for start in range(0, n, max(1, block_size)):
        stop = min(n, start + max(1, block_size))
        dx = coords[start:stop, 0][:, None] - coords[None, :, 0]
        dy = coords[start:stop, 1][:, None] - coords[None, :, 1]
        out[start:stop] = np.sqrt(dx * dx + dy * dy)
    np.fill_diagonal(out, 0.0)
    return out


def _knn_sigma_from_dist(dist: np.ndarray, k: int, ids: Sequence[str] | None = None) -> np.ndarray:
    n = dist.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n, got k={k} with n={n}")
    # The diagonal zero occupies one slot, so index k of the partially sorted
    # row is the distance to the k-th nearest *other* point.
    sigma = np.partition(dist, k, axis=1)[:, k]
    bad = np.flatnonzero(sigma == 0.0)
    if bad.size:
        i = int(bad[0])
        name = ids[i] if ids is not None else str(i)
        raise DegenerateScaleError(
            f"k-th neighbor distance is 0 for node {name!r}: coincident points"
        )
    return sigma


def knn_sigma(points: PointSet, k: int) -> np.ndarray:
    """Per-point local scale: the distance to each point's k-th nearest neighbor.

    Raises DegenerateScaleError if a k-th neighbor distance is zero, which
    can only happen with duplicate coordinates.
    """
    return _knn_sigma_from_dist(distance_matrix(points), k, points.ids)


def gaussian_kernel_weights(dist: np.ndarray, sigma: np.ndarray) -> SpatialGraph:
    """Self-tuning diffusion kernel W_ij = exp(-d(i,j) / (sigma_i sigma_j)).

    The exponent is linear in the distance (not squared), and the diagonal is
    excluded from storage: the self-connection is added exactly once later,
    by the renormalized propagation operator.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise DegenerateScaleError("all kernel scales must be positive")
    w = np.exp(-dist / np.outer(sigma, sigma))
    return _graph_from_dense(w)


def decay_weights(dist: np.ndarray, scheme: WeightScheme) -> SpatialGraph:
    """Distance-decay adjacency from a precomputed distance matrix.

    Supported schemes: BinaryScheme (cutoff, boundary inclusive), PowerScheme
    (inverse power), ExponentialScheme (exponential decay), GaussianScheme
    (self-tuning kernel via the k-th neighbor scale).
    """
    n = dist.shape[0]
    offdiag = ~np.eye(n, dtype=bool)
    if isinstance(scheme, BinaryScheme):
        if scheme.radius <= 0:
            raise ValueError("binary radius must be positive")
        w = np.where((dist <= scheme.radius) & offdiag, 1.0, 0.0)
        return _graph_from_dense(w)
    if isinstance(scheme, PowerScheme):
        if scheme.exponent <= 0:
            raise ValueError("power exponent must be positive")
        if np.any((dist == 0.0) & offdiag):
            raise DegenerateDistanceError(
                "power-law weights undefined for coincident points (d = 0)"
            )
        with np.errstate(divide="ignore"):
            w = np.where(offdiag, dist, 1.0) ** (-scheme.exponent)
        w[~offdiag] = 0.0
        return _graph_from_dense(w)
    if isinstance(scheme, ExponentialScheme):
        if scheme.rate <= 0:
            raise ValueError("exponential rate must be positive")
        w = np.exp(-scheme.rate * dist)
        return _graph_from_dense(w)
    if isinstance(scheme, GaussianScheme):
        sigma = _knn_sigma_from_dist(dist, scheme.k)
        return gaussian_kernel_weights(dist, sigma)
    raise TypeError(f"unknown weighting scheme: {scheme!r}")


def buffer_adjacency(points: PointSet, radius: float) -> SpatialGraph:
    """Binary adjacency: edge iff the pairwise distance is <= radius.

    This is the buffer-overlap construction read as a plain distance cutoff
    with an inclusive boundary. Weights are exactly 1.0.
    """
    if radius <= 0:
        raise ValueError("buffer radius must be positive")
    n = points.n
    coords = points.coords
    w = np.zeros((n, n), dtype=float)
    for start in range(0, n, DEFAULT_BLOCK_SIZE):
        stop = min(n, start + DEFAULT_BLOCK_SIZE)
        dx = coords[start:stop, 0][:, None] - coords[None, :, 0]
        dy = coords[start:stop, 1][:, None] - coords[None, :, 1]
        w[start:stop] = (np.sqrt(dx * dx + dy * dy) <= radius).astype(float)
    np.fill_diagonal(w, 0.0)
    return _graph_from_dense(w)


def _scaled_adjacency(weights: sp.csr_matrix, scale: np.ndarray) -> sp.csr_matrix:
    """Entrywise scale[i] * scale[j] * W_ij, grouped to keep exact symmetry."""
    coo = weights.tocoo()
    data = (scale[coo.row] * scale[coo.col]) * coo.data
    return sp.csr_matrix((data, (coo.row, coo.col)), shape=weights.shape)


def sym_normalized_adjacency(graph: SpatialGraph) -> sp.csr_matrix:
    """D^{-1/2} W D^{-1/2} with the zero-degree entries of D^{-1/2} taken as 0."""
    degree = graph.degrees
    inv_sqrt = np.zeros_like(degree)
    nz = degree > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(degree[nz])
    return _scaled_adjacency(graph.weights, inv_sqrt)


def laplacian_bundle(graph: SpatialGraph) -> LaplacianBundle:
    """Degree vector, L = D - W and the symmetric normalized Laplacian.

    Isolated nodes are handled by the zero-degree convention, so the
    normalized Laplacian of an edgeless graph is the identity.
    """
    degree = graph.degrees
    laplacian = (sp.diags(degree) - graph.weights).tocsr()
    normalized = (sp.eye(graph.n, format="csr") - sym_normalized_adjacency(graph)).tocsr()
    return LaplacianBundle(degree=degree, laplacian=laplacian, normalized=normalized)


def propagation_operator(graph: SpatialGraph) -> PropagationOperator:
    """Renormalized propagation matrix Dt^{-1/2} (W + I) Dt^{-1/2}.

    Adding the unit self-loop before normalizing guarantees Dt_ii >= 1, so no
    zero-degree special case is needed here.
    """
    w_tilde = (graph.weights + sp.eye(graph.n, format="csr")).tocsr()
    degree = np.asarray(w_tilde.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(degree)
    return PropagationOperator(matrix=_scaled_adjacency(w_tilde, inv_sqrt))
