"""Bias-free fully connected network trained one sample at a time.

Hidden layers use a configurable activation; the output layer is a softmax.
Training follows the classic delta rule: the output delta is the error
``e = d - y``, hidden deltas are ``phi'(v) * (W^T delta_next)``, and every
weight moves by ``rate * delta_i * x_j`` where ``x`` is the layer input. With a
softmax output this is exactly gradient descent on the cross-entropy loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .activation import Activation, Sigmoid, parse_activation, softmax
from .errors import DivergenceError, DomainError, UsageError
from .rng import RandomSource

WEIGHTS_MAGIC = "# qtdnn-weights v1"


@dataclass(frozen=True, eq=False)
class Mlp:
    """Layer sizes ``[L, N, ..., M]`` and one weight matrix per connection.

    ``weights[n]`` has shape ``(layer_sizes[n + 1], layer_sizes[n])``.
    """

    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    hidden_activation: Activation = field(default_factory=Sigmoid)

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        if len(sizes) < 2 or any(n < 1 for n in sizes):
            raise UsageError(f"invalid layer sizes {self.layer_sizes!r}")
        weights = tuple(np.asarray(w, dtype=float) for w in self.weights)
        if len(weights) != len(sizes) - 1:
            raise UsageError(f"{len(sizes) - 1} weight matrices expected, got {len(weights)}")
        for n, w in enumerate(weights):
            if w.shape != (sizes[n + 1], sizes[n]):
                raise UsageError(f"W{n + 1} has shape {w.shape}, expected {(sizes[n + 1], sizes[n])}")
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def zeros(cls, layer_sizes: Sequence[int], hidden_activation: Activation | None = None) -> "Mlp":
        sizes = tuple(layer_sizes)
        weights = tuple(np.zeros((sizes[n + 1], sizes[n])) for n in range(len(sizes) - 1))
        return cls(sizes, weights, hidden_activation or Sigmoid())

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_weights(self) -> int:
        return sum(w.size for w in self.weights)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) for w in self.weights)


def default_layer_sizes(n_inputs: int = 100, hidden: int = 20, depth: int = 3, outputs: int = 2) -> tuple[int, ...]:
    return (n_inputs, *([hidden] * depth), outputs)


@dataclass(frozen=True, eq=False)
class Sample:
    x: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        d = np.asarray(self.d, dtype=float).ravel()
        if x.size == 0 or not np.all(np.isfinite(x)) or x.min() < 0 or x.max() > 1:
            raise UsageError("sample input must be a non-empty vector with entries in [0, 1]")
        if d.size == 0 or np.count_nonzero(d == 1) != 1 or np.count_nonzero(d) != 1:
            raise UsageError(f"target must be one-hot, got {d.tolist()}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "d", d)

    @classmethod
    def labelled(cls, x, label: int, n_classes: int = 2) -> "Sample":
        if not 0 <= label < n_classes:
            raise UsageError(f"label {label} outside [0, {n_classes})")
        d = np.zeros(n_classes)
        d[label] = 1.0
        return cls(x, d)

    @property
    def label(self) -> int:
        return int(np.argmax(self.d))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 1000
    shuffle: bool = False
    # stop early once an epoch's mean loss drops below this
    error_threshold: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise UsageError(f"learning rate must be > 0, got {self.learning_rate!r}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise UsageError(f"epochs must be a positive integer, got {self.epochs!r}")
        if self.error_threshold is not None and not self.error_threshold > 0:
            raise UsageError("error threshold must be > 0")


@dataclass
class ForwardPass:
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]
    output: np.ndarray
    # phi'(v) per hidden layer, only filled when requested
    derivatives: list[np.ndarray] | None = None


def init_weights(m: Mlp, rng: RandomSource) -> Mlp:
    """Fill every weight from ``rng``.

    Draw order is layer-major then row-major: all of W1 row by row, then W2,
    and so on. The same stream therefore always yields the same network.
    """
    flat = rng.uniforms(m.n_weights)
    weights = []
    pos = 0
    for w in m.weights:
        weights.append(flat[pos:pos + w.size].reshape(w.shape).copy())
        pos += w.size
    return replace(m, weights=tuple(weights))


def _check_input(m: Mlp, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != m.n_inputs:
        raise UsageError(f"input has {x.size} entries, network expects {m.n_inputs}")
    return x


def _propagate(weights, act: Activation, x: np.ndarray):
    """Hidden activations, their derivatives and the output logits."""
    outs, ders = [x], []
    h = x
    for w in weights[:-1]:
        h, dh = act.value_and_derivative(w @ h)
        outs.append(h)
        ders.append(dh)
    return outs, ders, weights[-1] @ h


def _backward(weights, ders, e: np.ndarray) -> list[np.ndarray]:
    delta = e
    deltas = [delta]
    for n in range(len(weights) - 1, 0, -1):
        delta = ders[n - 1] * (weights[n].T @ delta)
        deltas.append(delta)
    deltas.reverse()
    return deltas


def _update(weights, deltas, inputs, rate: float) -> None:
    # in place; deltas must already be computed from the pre-update weights
    for w, dl, xin in zip(weights, deltas, inputs):
        w += (rate * dl)[:, None] * xin


def forward(m: Mlp, x, *, with_derivatives: bool = False) -> ForwardPass:
    x = _check_input(m, x)
    outs, ders, logits = _propagate(m.weights, m.hidden_activation, x)
    pre = [w @ h for w, h in zip(m.weights, outs)]
    return ForwardPass(pre, outs, softmax(logits), ders if with_derivatives else None)


def cross_entropy(y: np.ndarray, d: np.ndarray) -> float:
    return float(-np.sum(d * np.log(np.maximum(y, 1e-300))))


def backprop_step(m: Mlp, s: Sample, rate: float) -> tuple[Mlp, np.ndarray]:
    """One delta-rule update on sample ``s``; returns the new network and ``e = d - y``.

    ``m`` itself is left untouched.
    """
    x = _check_input(m, s.x)
    if s.d.size != m.n_outputs:
        raise UsageError(f"target has {s.d.size} entries, network has {m.n_outputs} outputs")
    outs, ders, logits = _propagate(m.weights, m.hidden_activation, x)
    e = s.d - softmax(logits)
    weights = [w.copy() for w in m.weights]
    _update(weights, _backward(m.weights, ders, e), outs, rate)
    return replace(m, weights=tuple(weights)), e


def _shuffled(order: list[int], rng: RandomSource) -> list[int]:
    # Fisher-Yates driven by uniform [-1, 1) draws
    order = list(order)
    for i in range(len(order) - 1, 0, -1):
        u = (rng.next_uniform() + 1.0) / 2.0
        j = min(int(u * (i + 1)), i)
        order[i], order[j] = order[j], order[i]
    return order


def train(m: Mlp, samples: Sequence[Sample], cfg: TrainConfig | None = None,
          rng: RandomSource | None = None) -> tuple[Mlp, list[float]]:
    """Run ``cfg.epochs`` passes of per-sample updates.

    Returns the trained network and the mean cross-entropy of each epoch
    (measured on the forward pass preceding each update).
    """
    cfg = cfg or TrainConfig()
    samples = list(samples)
    if not samples:
        raise UsageError("training set is empty")
    for s in samples:
        _check_input(m, s.x)
        if s.d.size != m.n_outputs:
            raise UsageError(f"target has {s.d.size} entries, network has {m.n_outputs} outputs")
    if cfg.shuffle and rng is None:
        raise UsageError("shuffling needs a random source")

    act = m.hidden_activation
    rate = cfg.learning_rate
    weights = [w.copy() for w in m.weights]
    order = list(range(len(samples)))
    trace = []
    with np.errstate(over="ignore", invalid="ignore"):
        _run_epochs(samples, weights, order, act, rate, cfg, rng, trace)
    return replace(m, weights=tuple(weights)), trace


def _run_epochs(samples, weights, order, act, rate, cfg, rng, trace) -> None:
    for _ in range(int(cfg.epochs)):
        if cfg.shuffle:
            order = _shuffled(order, rng)
        loss = 0.0
        for k in order:
            s = samples[k]
            try:
                outs, ders, logits = _propagate(weights, act, s.x)
                y = softmax(logits)
            except DomainError as exc:
                raise DivergenceError(f"training diverged: {exc}") from None
            loss -= math.log(max(y[s.label], 1e-300))
            _update(weights, _backward(weights, ders, s.d - y), outs, rate)
        trace.append(loss / len(samples))
        if not all(np.isfinite(w).all() for w in weights):
            raise DivergenceError("training produced non-finite weights")
        if cfg.error_threshold is not None and trace[-1] < cfg.error_threshold:
            break


def classify(m: Mlp, x) -> tuple[np.ndarray, int]:
    """Output probabilities and the winning label (ties go to the lower index)."""
    y = forward(m, x).output
    return y, int(np.argmax(y))


def accuracy(m: Mlp, samples: Sequence[Sample]) -> float:
    hits = sum(classify(m, s.x)[1] == s.label for s in samples)
    return hits / len(samples)


def save_weights(m: Mlp, path) -> Path:
    """Write a versioned text dump: one ``[W<n>] rows cols`` section per matrix."""
    path = Path(path)
    lines = [WEIGHTS_MAGIC,
             "layer_sizes=" + ",".join(str(n) for n in m.layer_sizes),
             "activation=" + m.hidden_activation.spec()]
    for n, w in enumerate(m.weights, start=1):
        lines.append(f"[W{n}] {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(",".join(format(float(x), ".17g") for x in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def load_weights(path) -> Mlp:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != WEIGHTS_MAGIC:
        raise UsageError(f"{path}: not a qtdnn weight file")
    try:
        sizes = tuple(int(n) for n in lines[1].split("=", 1)[1].split(","))
        activation = parse_activation(lines[2].split("=", 1)[1])
        weights = []
        i = 3
        while i < len(lines):
            tag, rows, cols = lines[i].split()
            rows, cols = int(rows), int(cols)
            block = [[float(x) for x in line.split(",")] for line in lines[i + 1:i + 1 + rows]]
            w = np.array(block, dtype=float).reshape(rows, cols)
            weights.append(w)
            i += 1 + rows
    except (IndexError, ValueError) as exc:
        raise UsageError(f"{path}: malformed weight file ({exc})") from None
    return Mlp(sizes, tuple(weights), activation)
