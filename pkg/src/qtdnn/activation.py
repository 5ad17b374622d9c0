"""Hidden-layer activations (QT, ReLU, Sigmoid) and the softmax output map.

Every activation exposes ``value``, ``derivative`` and ``value_and_derivative``
on numpy arrays. Config strings ``"qt:v0=1,s=0.5"``, ``"relu"`` and
``"sigmoid"`` are parsed by :func:`parse_activation`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UsageError
from .tunnelling import BarrierParams, evaluate_unchecked


def _check(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("activation input must be finite")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


class Activation:
    name = "base"

    def value_and_derivative(self, v):
        raise NotImplementedError

    def value(self, v):
        return self.value_and_derivative(v)[0]

    def derivative(self, v):
        return self.value_and_derivative(v)[1]

    def spec(self) -> str:
        return self.name


@dataclass(frozen=True)
class QT(Activation):
    """Transmission coefficient of ``barrier`` with the weighted sum as energy.

    ``scale`` maps a weighted sum ``v`` to the energy ``E = scale * v``; the
    default 1 feeds sums through unchanged.
    """

    barrier: BarrierParams = field(default_factory=BarrierParams)
    scale: float = 1.0
    name = "qt"

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise DomainError(f"qt scale must be finite and > 0, got {self.scale!r}")

    def value_and_derivative(self, v):
        arr = _check(v)
        energy = np.ascontiguousarray(self.scale * arr, dtype=np.float64).ravel()
        t, dt = evaluate_unchecked(energy, self.barrier)
        if self.scale != 1.0:
            dt *= self.scale
        return _out(t.reshape(arr.shape), arr), _out(dt.reshape(arr.shape), arr)

    def spec(self) -> str:
        text = f"qt:v0={self.barrier.v0!r},s={self.barrier.s!r}"
        if self.scale != 1.0:
            text += f",scale={self.scale!r}"
        return text


@dataclass(frozen=True)
class ReLU(Activation):
    name = "relu"

    def value_and_derivative(self, v):
        arr = _check(v)
        pos = arr > 0
        return _out(np.where(pos, arr, 0.0), arr), _out(pos.astype(float), arr)


@dataclass(frozen=True)
class Sigmoid(Activation):
    name = "sigmoid"

    def value_and_derivative(self, v):
        arr = _check(v)
        # tanh form cannot overflow
        sig = 0.5 + 0.5 * np.tanh(0.5 * arr)
        return _out(sig, arr), _out(sig * (1.0 - sig), arr)


def activate(kind: Activation, v):
    return kind.value(v)


def activate_derivative(kind: Activation, v):
    return kind.derivative(v)


def softmax(v) -> np.ndarray:
    """Exponential normalisation of output-layer sums, shifted by the max."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise UsageError("softmax needs a non-empty vector")
    if not np.all(np.isfinite(arr)):
        raise DomainError("softmax input must be finite")
    z = np.exp(arr - arr.max())
    return z / z.sum()


def parse_activation(text: str) -> Activation:
    """Parse ``"relu"``, ``"sigmoid"`` or ``"qt[:v0=<f>,s=<f>[,scale=<f>]]"``."""
    raw = text.strip()
    head, _, params = raw.partition(":")
    head = head.strip().lower()
    if head in ("relu", "sigmoid"):
        if params.strip():
            raise UsageError(f"{head} takes no parameters: {text!r}")
        return ReLU() if head == "relu" else Sigmoid()
    if head != "qt":
        raise UsageError(f"unknown activation {text!r}; expected qt, relu or sigmoid")
    values = {"v0": 1.0, "s": 0.5, "scale": 1.0}
    if params.strip():
        for item in params.split(","):
            key, sep, val = item.partition("=")
            key = key.strip()
            if not sep or key not in values:
                raise UsageError(f"bad qt parameter {item!r} in {text!r}")
            try:
                values[key] = float(val)
            except ValueError:
                raise UsageError(f"qt parameter {key} is not a number: {val!r}") from None
    return QT(BarrierParams(values["v0"], values["s"]), values["scale"])
