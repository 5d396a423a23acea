"""Dataset ingestion, feature encoding, intensity transforms, and the
synthetic point generator.

The on-disk dataset schema is a UTF-8 CSV with header ``id,x,y,type,checkins``
(the ``checkins`` column may be absent for prediction-only inputs). The
``type`` column carries label names mapped to channel indices through a type
map; the nine default labels ship with the package.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .spatial import PointSet

DEFAULT_TYPE_NAMES = (
    "business",
    "entertainment",
    "hospital",
    "chinese_restaurant",
    "non_chinese_restaurant",
    "hotel",
    "residential",
    "snacks_bar",
    "public_transport",
)


class DatasetError(ValueError):
    """Malformed dataset file, unknown type labels, or invalid counts."""


@dataclass(frozen=True)
class Dataset:
    """A point set together with its encoded features and log-scale targets.

    ``features`` holds the row-normalized one-hot type encoding;
    ``targets_log`` is ln(1 + count), or None when counts are absent.
    """

    points: PointSet
    features: np.ndarray
    targets_log: np.ndarray | None
    type_names: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.points.n

    @property
    def channels(self) -> int:
        return self.features.shape[1]


def default_type_map() -> dict[str, int]:
    """Label -> channel index for the nine default functional types."""
    return {name: i for i, name in enumerate(DEFAULT_TYPE_NAMES)}


def type_names_for(count: int) -> tuple[str, ...]:
    """The default label names when exactly nine types are used, else type_0.."""
    if count == len(DEFAULT_TYPE_NAMES):
        return DEFAULT_TYPE_NAMES
    return tuple(f"type_{i}" for i in range(count))


def normalize_rows(indicator: np.ndarray) -> np.ndarray:
    """Scale each row to sum to 1; a pure one-hot row is unchanged."""
    indicator = np.asarray(indicator, dtype=float)
    sums = indicator.sum(axis=1, keepdims=True)
    if np.any(sums == 0):
        raise ValueError("cannot normalize an all-zero feature row")
    return indicator / sums


def encode_features(types: np.ndarray, channels: int) -> np.ndarray:
    """Row-normalized one-hot encoding of type indices.

    For one-hot rows the normalization is the identity; it is applied anyway
    so that hypothetical multi-hot rows would come out row-stochastic.
    """
    types = np.asarray(types, dtype=int)
    if np.any(types < 0) or np.any(types >= channels):
        bad = int(types[(types < 0) | (types >= channels)][0])
        raise ValueError(f"type index {bad} out of range for {channels} channels")
    indicator = np.zeros((types.size, channels), dtype=float)
    indicator[np.arange(types.size), types] = 1.0
    return normalize_rows(indicator)


def log_transform(counts: np.ndarray) -> np.ndarray:
    """ln(1 + c). The +1 keeps zero counts finite; real data far from zero
    is unaffected at any meaningful precision."""
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    return np.log1p(counts)


def inverse_log_transform(values: np.ndarray) -> np.ndarray:
    """exp(y) - 1, the exact inverse of log_transform."""
    return np.expm1(np.asarray(values, dtype=float))


def counts_from_log(values: np.ndarray) -> np.ndarray:
    """Inverse transform clamped at zero, for reporting predicted counts."""
    return np.maximum(inverse_log_transform(values), 0.0)


def load_dataset(
    path,
    type_map: dict[str, int] | None = None,
    min_checkins: float | None = None,
) -> Dataset:
    """Load a dataset CSV.

    If ``type_map`` is None the map is inferred from the sorted distinct
    labels in the file; with an explicit map, rows with unknown labels are
    rejected (all offending data-row numbers are reported). ``min_checkins``
    drops rows whose count does not exceed the threshold, mirroring the
    usual "more than N records" preprocessing.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if header == ["id", "x", "y", "type", "checkins"]:
            has_counts = True
        elif header == ["id", "x", "y", "type"]:
            has_counts = False
        else:
            raise DatasetError(
                f"{path}: header must be id,x,y,type[,checkins], got {','.join(header)}"
            )
        rows = list(reader)

    ids: list[str] = []
    xs: list[float] = []
    ys: list[float] = []
    labels: list[str] = []
    counts: list[float] = []
    problems: list[str] = []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            problems.append(f"row {lineno}: expected {len(header)} fields, got {len(row)}")
            continue
        try:
            x = float(row[1])
            y = float(row[2])
        except ValueError:
            problems.append(f"row {lineno}: non-numeric coordinate")
            continue
        count = 0.0
        if has_counts:
            try:
                count = float(row[4])
            except ValueError:
                problems.append(f"row {lineno}: non-numeric checkins")
                continue
            if count < 0:
                problems.append(f"row {lineno}: negative checkins ({row[4]})")
                continue
        ids.append(row[0])
        xs.append(x)
        ys.append(y)
        labels.append(row[3])
        counts.append(count)
    if problems:
        raise DatasetError(f"{path}: " + "; ".join(problems))
    if not ids:
        raise DatasetError(f"{path}: no data rows")
    if len(set(ids)) != len(ids):
        raise DatasetError(f"{path}: duplicate ids")

    if type_map is None:
        type_map = {name: i for i, name in enumerate(sorted(set(labels)))}
    else:
        unknown = [
            f"row {lineno}: unknown type {label!r}"
            for lineno, label in enumerate(labels, start=2)
            if label not in type_map
        ]
        if unknown:
            raise DatasetError(f"{path}: " + "; ".join(unknown))

    type_idx = np.array([type_map[label] for label in labels], dtype=int)
    count_arr = np.array(counts, dtype=float)
    keep = np.ones(len(ids), dtype=bool)
    if min_checkins is not None and has_counts:
        keep = count_arr > min_checkins
        if not keep.any():
            raise DatasetError(f"{path}: no rows exceed min_checkins={min_checkins}")

    kept_ids = tuple(i for i, k in zip(ids, keep) if k)
    coords = np.column_stack([xs, ys])[keep]
    points = PointSet(
        ids=kept_ids,
        coords=coords,
        type_label=type_idx[keep],
        intensity=count_arr[keep] if has_counts else None,
    )
    channels = max(type_map.values()) + 1
    names = [""] * channels
    for label, i in type_map.items():
        names[i] = label
    features = encode_features(points.type_label, channels)
    targets = log_transform(points.intensity) if has_counts else None
    return Dataset(
        points=points, features=features, targets_log=targets, type_names=tuple(names)
    )


# --------------------------------------------------------------------------
# synthetic data
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs of the synthetic intensity field.

    The defaults produce clustered points over a square extent, a smooth
    multi-bump log-intensity surface, per-type offsets, and lognormal-style
    counts with a pronounced right tail.
    """

    n_points: int = 2000
    n_clusters: int = 12
    n_types: int = 9
    extent: float = 6000.0
    cluster_std: float = 300.0
    base_log_intensity: float = 4.5
    bump_count: int = 6
    bump_amplitude: float = 1.3
    bump_scale: float = 1500.0
    type_offset_scale: float = 0.8
    noise_std: float = 0.35
    mixture_concentration: float = 0.6

    def __post_init__(self):
        if self.n_clusters < 1 or self.n_types < 1:
            raise ValueError("need at least one cluster and one type")
        if self.n_points < 1:
            raise ValueError("need at least one point")
        if self.extent <= 0 or self.cluster_std < 0 or self.bump_scale <= 0:
            raise ValueError("extent and scales must be positive")


@dataclass(frozen=True)
class GroundTruthField:
    """The noise-free generating surface, kept for diagnostics.

    log intensity at (p, type) = base + bump field(p) + type offset.
    """

    base: float
    bump_centers: np.ndarray
    bump_amplitudes: np.ndarray
    bump_scale: float
    type_offsets: np.ndarray
    cluster_centers: np.ndarray
    cluster_type_mixtures: np.ndarray

    def field_at(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        d2 = ((coords[:, None, :] - self.bump_centers[None, :, :]) ** 2).sum(axis=2)
        return (np.exp(-d2 / (2.0 * self.bump_scale ** 2)) @ self.bump_amplitudes)

    def log_intensity_at(self, coords: np.ndarray, types: np.ndarray) -> np.ndarray:
        return self.base + self.field_at(coords) + self.type_offsets[np.asarray(types, dtype=int)]


def synth_generate(
    config: GeneratorConfig, rng: np.random.Generator
) -> tuple[PointSet, GroundTruthField]:
    """Draw a synthetic point set with spatially autocorrelated counts.

    Fixed pipeline, in rng order: cluster centers, point scatter, per-cluster
    type mixtures and type draws, bump field, type offsets, log-intensity
    noise. Counts are round(exp(log intensity)), which yields a heavy right
    tail whenever the log-scale spread is appreciable.
    """
    m, t, n = config.n_clusters, config.n_types, config.n_points
    centers = rng.uniform(0.0, config.extent, size=(m, 2))
    assignment = rng.integers(0, m, size=n)
    coords = centers[assignment] + rng.normal(0.0, config.cluster_std, size=(n, 2))

    mixtures = rng.dirichlet(np.full(t, config.mixture_concentration), size=m)
    types = np.array([rng.choice(t, p=mixtures[c]) for c in assignment], dtype=int)

    bump_centers = rng.uniform(0.0, config.extent, size=(config.bump_count, 2))
    bump_amplitudes = rng.uniform(-1.0, 1.0, size=config.bump_count) * config.bump_amplitude
    type_offsets = rng.uniform(-1.0, 1.0, size=t) * config.type_offset_scale

    field = GroundTruthField(
        base=config.base_log_intensity,
        bump_centers=bump_centers,
        bump_amplitudes=bump_amplitudes,
        bump_scale=config.bump_scale,
        type_offsets=type_offsets,
        cluster_centers=centers,
        cluster_type_mixtures=mixtures,
    )
    log_intensity = field.log_intensity_at(coords, types) + rng.normal(
        0.0, config.noise_std, size=n
    )
    counts = np.rint(np.exp(log_intensity))
    width = max(4, len(str(n - 1)))
    ids = tuple(f"p{i:0{width}d}" for i in range(n))
    points = PointSet(ids=ids, coords=coords, type_label=types, intensity=counts)
    return points, field
