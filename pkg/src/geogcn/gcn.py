"""Two-layer graph convolutional regression model.

Forward pass: Z = P ReLU(P X T0) T1 with P the renormalized propagation
operator; no activation after the second layer because the output is a
regression value, not a class score. Gradients are hand-derived (no autodiff)
and checked against central finite differences. All arithmetic is double
precision; single precision cannot reach the 1e-6 gradient-check tolerance.

Subgradient conventions: d|u|/du = 0 at u = 0 and dReLU/du = 0 at u = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .spatial import PropagationOperator


@dataclass
class GcnModel:
    """The two parameter matrices: theta0 (C x H) and theta1 (H x 1)."""

    theta0: np.ndarray
    theta1: np.ndarray

    def __post_init__(self):
        self.theta0 = np.asarray(self.theta0, dtype=float)
        self.theta1 = np.asarray(self.theta1, dtype=float)
        if self.theta0.ndim != 2 or self.theta1.ndim != 2 or self.theta1.shape[1] != 1:
            raise ValueError("theta0 must be (C, H) and theta1 (H, 1)")
        if self.theta0.shape[1] != self.theta1.shape[0]:
            raise ValueError(
                f"hidden sizes disagree: {self.theta0.shape} vs {self.theta1.shape}"
            )
        if not (np.all(np.isfinite(self.theta0)) and np.all(np.isfinite(self.theta1))):
            raise ValueError("parameters must be finite")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.theta0.shape[0], self.theta0.shape[1], 1

    def copy(self) -> "GcnModel":
        return GcnModel(self.theta0.copy(), self.theta1.copy())


@dataclass(frozen=True)
class ForwardCache:
    """Intermediates of one forward pass, kept for the exact backward pass.

    Dropout masks are stored with the inverted-dropout scaling folded in
    (entries are 0 or 1/(1-p)); eval mode stores scalar 1.0 for both.
    """

    x_dropped: np.ndarray      # input after dropout, (n, C)
    input_mask: np.ndarray     # scaled mask applied to X
    pre_hidden: np.ndarray     # P X T0, (n, H)
    hidden: np.ndarray         # ReLU(pre_hidden)
    hidden_dropped: np.ndarray # hidden after dropout
    hidden_mask: np.ndarray    # scaled mask applied to hidden
    output: np.ndarray         # Z, (n,)


@dataclass(frozen=True)
class Gradients:
    theta0: np.ndarray
    theta1: np.ndarray


@dataclass(frozen=True)
class AdamState:
    """First/second moment accumulators plus the step counter."""

    m_theta0: np.ndarray
    v_theta0: np.ndarray
    m_theta1: np.ndarray
    v_theta1: np.ndarray
    t: int = 0
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_model(cls, model: GcnModel, learning_rate: float = 3e-4,
                  beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m_theta0=np.zeros_like(model.theta0),
            v_theta0=np.zeros_like(model.theta0),
            m_theta1=np.zeros_like(model.theta1),
            v_theta1=np.zeros_like(model.theta1),
            t=0,
            learning_rate=learning_rate,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def glorot_init(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform init on [-s, s] with s = sqrt(6 / (fan_in + fan_out))."""
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError("fans must be positive")
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def _dropout_mask(shape: tuple[int, ...], p: float, rng: np.random.Generator) -> np.ndarray:
    keep = 1.0 - p
    return (rng.random(shape) < keep).astype(float) / keep


def forward(
    model: GcnModel,
    X: np.ndarray,
    prop: PropagationOperator,
    dropout_p: float = 0.0,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> ForwardCache:
    """One forward pass; dropout masks are drawn only in train mode.

    Inverted dropout divides kept activations by 1-p at train time, so the
    expectation over masks matches the deterministic eval-mode activations.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if not 0.0 <= dropout_p < 1.0:
        raise ValueError("dropout_p must lie in [0, 1)")
    X = np.asarray(X, dtype=float)
    n = prop.n
    if X.shape != (n, model.theta0.shape[0]):
        raise ValueError(
            f"feature shape {X.shape} does not match n={n}, C={model.theta0.shape[0]}"
        )

    use_dropout = mode == "train" and dropout_p > 0.0
    if use_dropout:
        if rng is None:
            raise ValueError("train-mode dropout needs an rng")
        input_mask = _dropout_mask(X.shape, dropout_p, rng)
        x_dropped = X * input_mask
    else:
        input_mask = np.ones(())
        x_dropped = X

    p = prop.matrix
    pre_hidden = p @ (x_dropped @ model.theta0)
    hidden = np.maximum(pre_hidden, 0.0)

    if use_dropout:
        hidden_mask = _dropout_mask(hidden.shape, dropout_p, rng)
        hidden_dropped = hidden * hidden_mask
    else:
        hidden_mask = np.ones(())
        hidden_dropped = hidden

    output = (p @ (hidden_dropped @ model.theta1)).ravel()
    return ForwardCache(
        x_dropped=x_dropped,
        input_mask=input_mask,
        pre_hidden=pre_hidden,
        hidden=hidden,
        hidden_dropped=hidden_dropped,
        hidden_mask=hidden_mask,
        output=output,
    )


def l1_loss(Z: np.ndarray, targets: np.ndarray, train_idx: np.ndarray) -> float:
    """Mean absolute deviation over the training index set.

    The mean (not the sum) keeps the loss magnitude independent of the
    training-set size and hence decoupled from the learning rate.
    """
    train_idx = np.asarray(train_idx, dtype=int)
    if train_idx.size == 0:
        raise ValueError("training index set is empty")
    Z = np.asarray(Z, dtype=float)
    targets = np.asarray(targets, dtype=float)
    return float(np.mean(np.abs(Z[train_idx] - targets[train_idx])))


def l2_penalty(model: GcnModel, weight: float) -> float:
    """weight * (sum of squared entries of both layers) / 2."""
    if weight == 0.0:
        return 0.0
    return float(weight) * 0.5 * (
        float(np.sum(model.theta0 ** 2)) + float(np.sum(model.theta1 ** 2))
    )


def backward(
    model: GcnModel,
    cache: ForwardCache,
    targets: np.ndarray,
    train_idx: np.ndarray,
    prop: PropagationOperator,
    l2_weight: float = 0.0,
) -> Gradients:
    """Exact gradients of l1_loss + l2_penalty through the forward pass.

    Reuses the dropout masks stored in the cache; the L1 and ReLU
    subgradients at 0 are taken as 0.
    """
    train_idx = np.asarray(train_idx, dtype=int)
    if train_idx.size == 0:
        raise ValueError("training index set is empty")
    targets = np.asarray(targets, dtype=float)
    n = cache.output.shape[0]
    if prop.n != n or cache.hidden.shape[1] != model.theta1.shape[0]:
        raise ValueError("cache does not match this model/operator")

    # dL/dZ: sign of the residual on training nodes, scaled by the mean.
    g = np.zeros((n, 1))
    g[train_idx, 0] = np.sign(cache.output[train_idx] - targets[train_idx]) / train_idx.size

    p = prop.matrix
    pg = p @ g                                   # P^T g, P symmetric
    grad_theta1 = cache.hidden_dropped.T @ pg
    d_hidden = (pg @ model.theta1.T) * cache.hidden_mask
    d_pre = d_hidden * (cache.pre_hidden > 0.0)
    grad_theta0 = cache.x_dropped.T @ (p @ d_pre)

    if l2_weight != 0.0:
        grad_theta0 = grad_theta0 + l2_weight * model.theta0
        grad_theta1 = grad_theta1 + l2_weight * model.theta1
    return Gradients(theta0=grad_theta0, theta1=grad_theta1)


def adam_step(state: AdamState, model: GcnModel, grads: Gradients) -> tuple[GcnModel, AdamState]:
    """One bias-corrected Adam update; the two matrices update independently."""
    if grads.theta0.shape != model.theta0.shape or grads.theta1.shape != model.theta1.shape:
        raise ValueError("gradient shapes do not match the model")
    t = state.t + 1
    bias1 = 1.0 - state.beta1 ** t
    bias2 = 1.0 - state.beta2 ** t

    def update(param, m, v, grad):
        m_new = state.beta1 * m + (1.0 - state.beta1) * grad
        v_new = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        step = state.learning_rate * (m_new / bias1) / (np.sqrt(v_new / bias2) + state.eps)
        return param - step, m_new, v_new

    theta0, m0, v0 = update(model.theta0, state.m_theta0, state.v_theta0, grads.theta0)
    theta1, m1, v1 = update(model.theta1, state.m_theta1, state.v_theta1, grads.theta1)
    new_model = GcnModel(theta0=theta0, theta1=theta1)
    new_state = replace(state, m_theta0=m0, v_theta0=v0, m_theta1=m1, v_theta1=v1, t=t)
    return new_model, new_state


# --------------------------------------------------------------------------
# gradient checking
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GcnProblem:
    """A complete loss instance: features, operator, targets, mask, penalty."""

    X: np.ndarray
    prop: PropagationOperator
    targets: np.ndarray
    train_idx: np.ndarray
    l2_weight: float = 0.0


@dataclass(frozen=True)
class GradientCheckReport:
    max_rel_error_theta0: float
    max_rel_error_theta1: float
    worst_entry: tuple[str, int, int]
    worst_analytic: float
    worst_numeric: float
    tolerance: float
    passed: bool

    @property
    def max_rel_error(self) -> float:
        return max(self.max_rel_error_theta0, self.max_rel_error_theta1)


def _problem_loss(model: GcnModel, problem: GcnProblem) -> float:
    cache = forward(model, problem.X, problem.prop, mode="eval")
    return l1_loss(cache.output, problem.targets, problem.train_idx) + l2_penalty(
        model, problem.l2_weight
    )


def finite_difference_gradients(
    model: GcnModel, problem: GcnProblem, h: float = 1e-5
) -> Gradients:
    """Central-difference gradients of the eval-mode loss, one entry at a time."""
    grads = []
    for name in ("theta0", "theta1"):
        base = getattr(model, name)
        grad = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            perturbed = model.copy()
            getattr(perturbed, name)[idx] = base[idx] + h
            up = _problem_loss(perturbed, problem)
            getattr(perturbed, name)[idx] = base[idx] - h
            down = _problem_loss(perturbed, problem)
            grad[idx] = (up - down) / (2.0 * h)
        grads.append(grad)
    return Gradients(theta0=grads[0], theta1=grads[1])


def compare_gradients(
    analytic: Gradients, numeric: Gradients, tolerance: float
) -> GradientCheckReport:
    """Entrywise relative comparison; reports the single worst entry."""
    worst = ("theta0", 0, 0)
    worst_vals = (0.0, 0.0)
    per_matrix = {}
    for name in ("theta0", "theta1"):
        a = getattr(analytic, name)
        b = getattr(numeric, name)
        rel = np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
        per_matrix[name] = float(rel.max())
        i, j = np.unravel_index(int(np.argmax(rel)), rel.shape)
        if per_matrix[name] >= max(per_matrix.values()):
            worst = (name, int(i), int(j))
            worst_vals = (float(a[i, j]), float(b[i, j]))
    max_rel = max(per_matrix.values())
    return GradientCheckReport(
        max_rel_error_theta0=per_matrix["theta0"],
        max_rel_error_theta1=per_matrix["theta1"],
        worst_entry=worst,
        worst_analytic=worst_vals[0],
        worst_numeric=worst_vals[1],
        tolerance=tolerance,
        passed=max_rel < tolerance,
    )


def gradient_check(
    model: GcnModel, problem: GcnProblem, tolerance: float = 1e-6, h: float = 1e-5
) -> GradientCheckReport:
    """Check backward against central differences on an eval-mode instance."""
    cache = forward(model, problem.X, problem.prop, mode="eval")
    analytic = backward(
        model, cache, problem.targets, problem.train_idx, problem.prop, problem.l2_weight
    )
    numeric = finite_difference_gradients(model, problem, h=h)
    return compare_gradients(analytic, numeric, tolerance)
