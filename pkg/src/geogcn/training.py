"""Semi-supervised training loop, evaluation metrics, multi-run envelopes,
and distribution diagnostics.

One run is fully determined by (dataset, graph, config): the seed drives the
train/validation split, both weight initializations, and every dropout mask,
in that order. Validation targets are only ever read by the error metric,
never by the gradient path.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, counts_from_log
from .gcn import (
    AdamState,
    GcnModel,
    adam_step,
    backward,
    forward,
    glorot_init,
    l1_loss,
)
from .spatial import PropagationOperator, SpatialGraph, propagation_operator


class TrainingDivergedError(RuntimeError):
    """The training loss became non-finite."""

    def __init__(self, epoch: int, message: str | None = None):
        super().__init__(message or f"non-finite training loss at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run."""

    epochs: int = 2000
    learning_rate: float = 3e-4
    l2_weight: float = 5e-5
    dropout_p: float = 0.2
    hidden_units: int = 32
    train_fraction: float = 0.05
    buffer_radius: float = 600.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")
        if self.learning_rate < 0 or self.l2_weight < 0:
            raise ValueError("learning_rate and l2_weight must be >= 0")
        if self.buffer_radius <= 0:
            raise ValueError("buffer_radius must be positive")


@dataclass
class TrainHistory:
    """Per-epoch trajectories of one run plus the final model.

    ``loss`` is the train-mode mean L1 loss on the log scale, recorded for
    the forward pass that produced each update. ``abs_error`` is the
    eval-mode mean absolute error on the original count scale over the
    validation nodes, recorded after each update.
    """

    loss: np.ndarray
    abs_error: np.ndarray
    model: GcnModel
    train_idx: np.ndarray
    val_idx: np.ndarray
    seed: int

    @property
    def epochs(self) -> int:
        return self.loss.shape[0]


@dataclass(frozen=True)
class RunEnvelope:
    """Per-epoch summary of the absolute-error trajectories across runs."""

    mean: np.ndarray
    std: np.ndarray
    min: np.ndarray
    max: np.ndarray
    seeds: tuple[int, ...]
    failures: tuple[tuple[int, str], ...] = ()

    @property
    def epochs(self) -> int:
        return self.mean.shape[0]

    @property
    def completed_runs(self) -> int:
        return len(self.seeds)


@dataclass(frozen=True)
class Metrics:
    """Count-scale MAE, log-scale L1, and MAE relative to the mean count."""

    mae_counts: float
    l1_log: float
    ratio_to_mean: float
    n: int


def split(n: int, fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random disjoint, exhaustive train/validation index split.

    The training set has round(fraction * n) members; both halves are
    returned sorted.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    size = int(round(fraction * n))
    if size < 1:
        raise ValueError(f"fraction {fraction} selects no training nodes out of {n}")
    if size >= n:
        raise ValueError(f"fraction {fraction} leaves no validation nodes out of {n}")
    perm = rng.permutation(n)
    return np.sort(perm[:size]), np.sort(perm[size:])


def train(
    dataset: Dataset, graph: SpatialGraph, config: TrainConfig
) -> tuple[GcnModel, TrainHistory]:
    """Full-batch training of the two-layer model on the training split.

    Per epoch: train-mode forward (dropout active), exact backward, one Adam
    step, then an eval-mode forward for the validation count-scale error.
    Raises TrainingDivergedError as soon as the loss stops being finite.
    """
    if dataset.n != graph.n:
        raise ValueError(f"dataset has {dataset.n} points but graph has {graph.n} nodes")
    if dataset.targets_log is None:
        raise ValueError("training needs observed intensities")

    rng = np.random.default_rng(config.seed)
    train_idx, val_idx = split(dataset.n, config.train_fraction, rng)

    channels = dataset.channels
    model = GcnModel(
        theta0=glorot_init(channels, config.hidden_units, rng),
        theta1=glorot_init(config.hidden_units, 1, rng),
    )
    state = AdamState.for_model(model, learning_rate=config.learning_rate)
    prop = propagation_operator(graph)

    X = dataset.features
    targets = dataset.targets_log
    true_counts = dataset.points.intensity[val_idx]

    losses = np.empty(config.epochs)
    errors = np.empty(config.epochs)
    for epoch in range(config.epochs):
        cache = forward(model, X, prop, dropout_p=config.dropout_p, mode="train", rng=rng)
        loss = l1_loss(cache.output, targets, train_idx)
        if not np.isfinite(loss):
            raise TrainingDivergedError(epoch + 1)
        grads = backward(model, cache, targets, train_idx, prop, config.l2_weight)
        model, state = adam_step(state, model, grads)

        eval_cache = forward(model, X, prop, mode="eval")
        predicted = counts_from_log(eval_cache.output[val_idx])
        losses[epoch] = loss
        errors[epoch] = float(np.mean(np.abs(predicted - true_counts)))

    history = TrainHistory(
        loss=losses,
        abs_error=errors,
        model=model,
        train_idx=train_idx,
        val_idx=val_idx,
        seed=config.seed,
    )
    return model, history


def evaluate(
    model: GcnModel, dataset: Dataset, graph: SpatialGraph, idx: np.ndarray
) -> Metrics:
    """Eval-mode metrics over an index set.

    Predicted counts are the clamped inverse log transform of the model
    output; the ratio metric divides the count-scale MAE by the mean true
    count over the same nodes.
    """
    idx = np.asarray(idx, dtype=int)
    if idx.size == 0:
        raise ValueError("empty evaluation index set")
    if dataset.targets_log is None:
        raise ValueError("evaluation needs observed intensities")
    prop = propagation_operator(graph)
    cache = forward(model, dataset.features, prop, mode="eval")
    predicted = counts_from_log(cache.output[idx])
    true_counts = dataset.points.intensity[idx]
    mae = float(np.mean(np.abs(predicted - true_counts)))
    l1_log = l1_loss(cache.output, dataset.targets_log, idx)
    return Metrics(
        mae_counts=mae,
        l1_log=l1_log,
        ratio_to_mean=mae / float(np.mean(true_counts)),
        n=idx.size,
    )


def envelope_from_histories(
    histories: list[TrainHistory], failures: tuple[tuple[int, str], ...] = ()
) -> RunEnvelope:
    """Per-epoch mean/std/min/max of the absolute-error curves.

    The standard deviation is the population value, so a single run yields
    an all-zero std column.
    """
    if not histories:
        raise ValueError("no completed runs to summarize")
    stack = np.stack([h.abs_error for h in histories])
    return RunEnvelope(
        mean=stack.mean(axis=0),
        std=stack.std(axis=0),
        min=stack.min(axis=0),
        max=stack.max(axis=0),
        seeds=tuple(h.seed for h in histories),
        failures=failures,
    )


def multi_run(
    dataset: Dataset,
    graph: SpatialGraph,
    config: TrainConfig,
    seeds: list[int],
    max_workers: int = 1,
) -> tuple[RunEnvelope, list[TrainHistory]]:
    """Independent training runs, one per seed; each run re-draws both the
    split and the initialization from its own seed.

    Runs are embarrassingly parallel: with max_workers > 1 they execute on a
    thread pool, and the results are identical to sequential execution. A
    diverged run is recorded under failures and the envelope summarizes the
    completed ones.
    """
    if len(seeds) < 1:
        raise ValueError("need at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ValueError("seeds must be distinct")

    def one_run(seed: int) -> TrainHistory:
        _, history = train(dataset, graph, replace(config, seed=seed))
        return history

    results: list[TrainHistory | None] = [None] * len(seeds)
    failures: list[tuple[int, str]] = []
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(one_run, seed) for seed in seeds]
            for i, future in enumerate(futures):
                try:
                    results[i] = future.result()
                except TrainingDivergedError as exc:
                    failures.append((seeds[i], str(exc)))
    else:
        for i, seed in enumerate(seeds):
            try:
                results[i] = one_run(seed)
            except TrainingDivergedError as exc:
                failures.append((seed, str(exc)))

    histories = [h for h in results if h is not None]
    return envelope_from_histories(histories, tuple(failures)), histories


# --------------------------------------------------------------------------
# distribution diagnostics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DistributionStats:
    """Histogram plus moment summary of a sample.

    Variance is the unbiased sample variance; skewness and excess kurtosis
    are the standardized central-moment ratios, reported as NaN when the
    sample is degenerate (zero variance).
    """

    n: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    bin_edges: np.ndarray
    bin_counts: np.ndarray
    log_x: bool


def distribution_stats(values: np.ndarray, bins: int = 30, log_x: bool = False) -> DistributionStats:
    """Histogram (optionally over log-spaced bins) and sample moments."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty sample")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if log_x:
        if np.any(values <= 0):
            raise ValueError("log-spaced bins need strictly positive values")
        counts, log_edges = np.histogram(np.log10(values), bins=bins)
        edges = 10.0 ** log_edges
    else:
        counts, edges = np.histogram(values, bins=bins)

    n = values.size
    mean = float(values.mean())
    centered = values - mean
    m2 = float(np.mean(centered ** 2))
    variance = float(np.sum(centered ** 2) / (n - 1)) if n > 1 else 0.0
    if m2 > 0.0:
        skewness = float(np.mean(centered ** 3) / m2 ** 1.5)
        excess_kurtosis = float(np.mean(centered ** 4) / m2 ** 2 - 3.0)
    else:
        skewness = float("nan")
        excess_kurtosis = float("nan")
    return DistributionStats(
        n=n,
        mean=mean,
        variance=variance,
        skewness=skewness,
        excess_kurtosis=excess_kurtosis,
        bin_edges=edges,
        bin_counts=counts,
        log_x=log_x,
    )
