"""File formats: dataset/edge-list/history/envelope/prediction CSVs, the
model checkpoint, flat key-value documents, and atomic writes.

Floats are serialized with repr(), the shortest decimal that parses back to
the identical double, so every writer round-trips its loader bit-exactly.
All files are UTF-8 with LF line endings and are written atomically
(temp file in the target directory, then rename).
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .data import Dataset
from .gcn import GcnModel
from .raster import RasterGrid
from .spatial import PointSet, SpatialGraph
from .training import RunEnvelope, TrainHistory


class ConfigError(ValueError):
    """Bad configuration file or option value."""


class CheckpointError(ValueError):
    """Unreadable or inconsistent model checkpoint."""


def fmt(value: float) -> str:
    """Exact decimal form of a double (shortest round-tripping repr)."""
    return repr(float(value))


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _write_csv(path, header: list[str], rows) -> None:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


# --------------------------------------------------------------------------
# dataset and edge-list CSVs
# --------------------------------------------------------------------------


def write_points_csv(points: PointSet, type_names: tuple[str, ...], path) -> None:
    """Dataset CSV ``id,x,y,type,checkins``; counts are written as integers
    when they are whole numbers."""
    rows = []
    for i, pid in enumerate(points.ids):
        count = points.intensity[i] if points.intensity is not None else None
        if count is None:
            raise ValueError("point set has no intensities to write")
        count_str = str(int(count)) if float(count).is_integer() else fmt(count)
        rows.append(
            [
                pid,
                fmt(points.coords[i, 0]),
                fmt(points.coords[i, 1]),
                type_names[points.type_label[i]],
                count_str,
            ]
        )
    _write_csv(path, ["id", "x", "y", "type", "checkins"], rows)


def write_edge_list(graph: SpatialGraph, ids: tuple[str, ...], path) -> None:
    """Edge-list CSV ``src,dst,weight``: each undirected edge once, with
    src < dst lexicographically, rows sorted by (src, dst)."""
    coo = graph.weights.tocoo()
    rows = []
    for i, j, w in zip(coo.row, coo.col, coo.data):
        if i < j:
            a, b = ids[i], ids[j]
            if a > b:
                a, b = b, a
            rows.append((a, b, fmt(w)))
    rows.sort()
    _write_csv(path, ["src", "dst", "weight"], rows)


def read_edge_list(path, ids: tuple[str, ...]) -> SpatialGraph:
    """Rebuild a SpatialGraph from an edge list, resolving ids to indices."""
    index = {pid: i for i, pid in enumerate(ids)}
    rows_i: list[int] = []
    cols_i: list[int] = []
    data: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["src", "dst", "weight"]:
            raise ConfigError(f"{path}: expected header src,dst,weight")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ConfigError(f"{path}: row {lineno}: expected 3 fields")
            try:
                i, j = index[row[0]], index[row[1]]
            except KeyError as exc:
                raise ConfigError(f"{path}: row {lineno}: unknown id {exc}") from None
            w = float(row[2])
            rows_i += [i, j]
            cols_i += [j, i]
            data += [w, w]
    n = len(ids)
    weights = sp.csr_matrix((data, (rows_i, cols_i)), shape=(n, n))
    return SpatialGraph(n=n, weights=weights)


# --------------------------------------------------------------------------
# history / envelope / prediction CSVs
# --------------------------------------------------------------------------


def write_history_csv(history: TrainHistory, path) -> None:
    rows = [
        [str(epoch + 1), fmt(loss), fmt(err)]
        for epoch, (loss, err) in enumerate(zip(history.loss, history.abs_error))
    ]
    _write_csv(path, ["epoch", "loss", "abs_error"], rows)


def read_history_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (epoch, loss, abs_error) arrays."""
    epochs, losses, errors = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["epoch", "loss", "abs_error"]:
            raise ConfigError(f"{path}: expected header epoch,loss,abs_error")
        for row in reader:
            epochs.append(int(row[0]))
            losses.append(float(row[1]))
            errors.append(float(row[2]))
    return np.array(epochs), np.array(losses), np.array(errors)


def write_envelope_csv(envelope: RunEnvelope, path) -> None:
    rows = [
        [str(e + 1), fmt(envelope.mean[e]), fmt(envelope.std[e]),
         fmt(envelope.min[e]), fmt(envelope.max[e])]
        for e in range(envelope.epochs)
    ]
    _write_csv(path, ["epoch", "mean", "std", "min", "max"], rows)


def read_envelope_csv(path) -> dict[str, np.ndarray]:
    columns: dict[str, list[float]] = {"epoch": [], "mean": [], "std": [], "min": [], "max": []}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(columns):
            raise ConfigError(f"{path}: expected header {','.join(columns)}")
        for row in reader:
            for key, cell in zip(columns, row):
                columns[key].append(float(cell))
    return {key: np.array(vals) for key, vals in columns.items()}


def write_predictions_csv(
    ids: tuple[str, ...], predicted: np.ndarray, actual: np.ndarray | None, path
) -> None:
    """Prediction CSV ``id,predicted_checkins,actual_checkins`` with the
    actual column left blank when counts are unknown."""
    rows = []
    for i, pid in enumerate(ids):
        actual_str = ""
        if actual is not None:
            a = float(actual[i])
            actual_str = str(int(a)) if a.is_integer() else fmt(a)
        rows.append([pid, fmt(predicted[i]), actual_str])
    _write_csv(path, ["id", "predicted_checkins", "actual_checkins"], rows)


def read_predictions_csv(path) -> tuple[tuple[str, ...], np.ndarray, np.ndarray | None]:
    """Returns (ids, predicted, actual-or-None); actual is None if any row
    left it blank."""
    ids: list[str] = []
    predicted: list[float] = []
    actual: list[float] = []
    any_blank = False
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "predicted_checkins", "actual_checkins"]:
            raise ConfigError(
                f"{path}: expected header id,predicted_checkins,actual_checkins"
            )
        for row in reader:
            ids.append(row[0])
            predicted.append(float(row[1]))
            if row[2] == "":
                any_blank = True
                actual.append(np.nan)
            else:
                actual.append(float(row[2]))
    return (
        tuple(ids),
        np.array(predicted),
        None if any_blank else np.array(actual),
    )


# --------------------------------------------------------------------------
# checkpoint
# --------------------------------------------------------------------------

_CHECKPOINT_FORMAT = "gcn-checkpoint-v1"


def save_checkpoint(model: GcnModel, seed: int, epochs: int, path) -> None:
    """Self-describing JSON checkpoint; matrices are row-major nested arrays
    serialized with full round-trip precision."""
    doc = {
        "format": _CHECKPOINT_FORMAT,
        "dims": list(model.dims),
        "theta0": [[float(v) for v in row] for row in model.theta0],
        "theta1": [[float(v) for v in row] for row in model.theta1],
        "seed": int(seed),
        "epochs": int(epochs),
    }
    atomic_write_text(path, json.dumps(doc, indent=1) + "\n")


def load_checkpoint(path) -> tuple[GcnModel, int, int]:
    """Returns (model, seed, epochs)."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
    if doc.get("format") != _CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a {_CHECKPOINT_FORMAT} document")
    model = GcnModel(theta0=np.array(doc["theta0"]), theta1=np.array(doc["theta1"]))
    if list(model.dims) != list(doc["dims"]):
        raise CheckpointError(f"{path}: dims {doc['dims']} disagree with matrix shapes")
    return model, int(doc["seed"]), int(doc["epochs"])


# --------------------------------------------------------------------------
# flat key-value documents (config, metrics, raster metadata)
# --------------------------------------------------------------------------


def write_keyvalues(pairs: dict[str, object], path) -> None:
    """Flat ``key = value`` document, one pair per line."""
    lines = []
    for key, value in pairs.items():
        if isinstance(value, float):
            value = fmt(value)
        lines.append(f"{key} = {value}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_keyvalues(path) -> dict[str, str]:
    """Parse a flat key-value document; '#' starts a comment line."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected key = value")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


# --------------------------------------------------------------------------
# raster files
# --------------------------------------------------------------------------


def write_raster_csv(grid: RasterGrid, path) -> None:
    """Row-major grid CSV, one line per grid row starting with row 0 (south)."""
    arr = grid.as_array()
    lines = [",".join(fmt(v) for v in row) for row in arr]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_raster_csv(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        rows = [[float(cell) for cell in line.strip().split(",")] for line in fh if line.strip()]
    return np.array(rows)


def write_raster_meta(grid: RasterGrid, scale: tuple[float, float], path) -> None:
    write_keyvalues(
        {
            "origin_x": grid.origin[0],
            "origin_y": grid.origin[1],
            "cell_size": grid.cell_size,
            "width": grid.width,
            "height": grid.height,
            "scale_min": scale[0],
            "scale_max": scale[1],
            "csv_row_order": "south-to-north",
            "pgm_row_order": "north-to-south",
        },
        path,
    )


def write_metrics(values: dict[str, object], path) -> None:
    """Flat key-value metrics document."""
    write_keyvalues(values, path)


def dataset_ids(dataset: Dataset) -> tuple[str, ...]:
    return dataset.points.ids
