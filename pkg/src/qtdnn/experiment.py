"""The perception loop: re-randomise, train, interpret the ambiguous image.

Each run ``i`` draws a fresh network from entropy substream ``i``, trains it on
the two labelled images of a stimulus set and records the softmax output on
the ambiguous image as ``(P|0>, P|1>)``. The run index plays the role of time.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .activation import QT, Activation, ReLU, Sigmoid
from .analysis import dtw_matrix
from .errors import DivergenceError, EntropyExhaustedError, UsageError
from .network import Mlp, Sample, TrainConfig, default_layer_sizes, forward, init_weights, train
from .rng import EntropySpec, RandomSource
from .stimuli import StimulusSet, load_stimulus, stimulus_set
from .tunnelling import format_float

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    stimulus_set: str = "necker"
    runs: int = 40
    activation: Activation = field(default_factory=QT)
    train: TrainConfig = field(default_factory=TrainConfig)
    entropy: EntropySpec = field(default_factory=EntropySpec)
    threshold: float = 0.5
    hidden: int = 20
    depth: int = 3
    # swap the two training labels (figure/ground ambiguity of the vase)
    swap_labels: bool = False
    # (label-0 image, label-1 image, ambiguous image) for stimulus_set="custom"
    custom_paths: tuple[str, str, str] | None = None
    workers: int = 1

    def __post_init__(self):
        if int(self.runs) != self.runs or self.runs < 1:
            raise UsageError(f"runs must be a positive integer, got {self.runs!r}")
        if not 0 < self.threshold < 1:
            raise UsageError(f"threshold must lie in (0, 1), got {self.threshold!r}")
        if self.stimulus_set == "custom" and not self.custom_paths:
            raise UsageError("custom stimulus set needs three image paths")

    def stimuli(self) -> StimulusSet:
        if self.stimulus_set == "custom":
            zero, one, amb = (load_stimulus(p) for p in self.custom_paths)
            if not (zero.pixels.shape == one.pixels.shape == amb.pixels.shape):
                raise UsageError("custom stimuli must share one raster size")
            sset = StimulusSet("custom", ((zero, 0), (one, 1)), amb)
        else:
            sset = stimulus_set(self.stimulus_set)
        return sset.swapped() if self.swap_labels else sset

    def template(self, n_inputs: int) -> Mlp:
        sizes = default_layer_sizes(n_inputs, self.hidden, self.depth, 2)
        return Mlp.zeros(sizes, self.activation)


@dataclass(frozen=True)
class RunRecord:
    run: int
    p_state0: float
    p_state1: float


@dataclass
class PerceptionSeries:
    records: list[RunRecord]
    threshold: float = 0.5
    activation: str = ""

    @property
    def p_state1(self) -> np.ndarray:
        return np.array([r.p_state1 for r in self.records])

    @property
    def p_state0(self) -> np.ndarray:
        return np.array([r.p_state0 for r in self.records])

    @property
    def percept(self) -> list[int]:
        return classical_percept(self.p_state1, self.threshold)

    def __len__(self):
        return len(self.records)

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["run", "p_state0", "p_state1", "percept"])
            for rec, pc in zip(self.records, self.percept):
                writer.writerow([rec.run, format_float(rec.p_state0), format_float(rec.p_state1), pc])
        return path

    @classmethod
    def read_csv(cls, path, threshold: float = 0.5) -> "PerceptionSeries":
        with Path(path).open(newline="") as fh:
            reader = csv.DictReader(fh)
            records = [RunRecord(int(r["run"]), float(r["p_state0"]), float(r["p_state1"])) for r in reader]
        return cls(records, threshold)


def classical_percept(p_state1: Sequence[float], threshold: float = 0.5) -> list[int]:
    """Collapse each probability to 1 when ``P|1> >= threshold`` and 0 otherwise."""
    values = list(p_state1)
    if not values:
        raise UsageError("percept series is empty")
    return [1 if p >= threshold else 0 for p in values]


def switch_count(percept: Sequence[int]) -> int:
    return sum(1 for a, b in zip(percept, percept[1:]) if a != b)


def training_samples(sset: StimulusSet) -> list[Sample]:
    return [Sample.labelled(img.flatten(), label) for img, label in sset.train]


def initial_network(cfg: ExperimentConfig, n_inputs: int, src: RandomSource, run: int) -> Mlp:
    try:
        return init_weights(cfg.template(n_inputs), src)
    except EntropyExhaustedError as exc:
        raise EntropyExhaustedError(f"run {run}: {exc}", run_index=run) from None


def _single_run(cfg: ExperimentConfig, sset: StimulusSet, run: int) -> RunRecord:
    template = cfg.template(sset.n_inputs)
    root = cfg.entropy.open(default_block_size=template.n_weights)
    src = root.substream(run)
    net = initial_network(cfg, sset.n_inputs, src, run)
    try:
        net, _ = train(net, training_samples(sset), cfg.train, src)
        y = forward(net, sset.ambiguous.flatten()).output
    except DivergenceError as exc:
        raise DivergenceError(f"run {run}: {exc}", run_index=run) from None
    except EntropyExhaustedError as exc:
        raise EntropyExhaustedError(f"run {run}: {exc}", run_index=run) from None
    return RunRecord(run, float(y[0]), float(y[1]))


def _run_chunk(args):
    cfg, sset, runs = args
    return [_single_run(cfg, sset, i) for i in runs]


def run_perception_experiment(cfg: ExperimentConfig) -> PerceptionSeries:
    """Run ``cfg.runs`` independent re-initialise/train/infer cycles."""
    sset = cfg.stimuli()
    runs = list(range(cfg.runs))
    if cfg.workers > 1 and cfg.runs > 1:
        chunks = [runs[k::cfg.workers] for k in range(cfg.workers)]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = pool.map(_run_chunk, [(cfg, sset, c) for c in chunks if c])
            records = sorted((r for part in parts for r in part), key=lambda r: r.run)
    else:
        records = [_single_run(cfg, sset, i) for i in runs]
    return PerceptionSeries(records, cfg.threshold, cfg.activation.spec())


def comparison_activations(cfg: ExperimentConfig) -> list[Activation]:
    qt = cfg.activation if isinstance(cfg.activation, QT) else QT()
    return [qt, ReLU(), Sigmoid()]


@dataclass
class Comparison:
    series: dict[str, PerceptionSeries]
    dtw: np.ndarray

    @property
    def labels(self) -> list[str]:
        return list(self.series)

    def distance(self, a: str, b: str) -> float:
        names = self.labels
        return float(self.dtw[names.index(a), names.index(b)])


def compare_activations(cfg: ExperimentConfig, **dtw_options) -> Comparison:
    """Run the experiment with QT, ReLU and Sigmoid on identical substreams.

    Every variant re-derives the same entropy substreams, so run ``i`` starts
    from bit-identical weights whatever the activation.
    """
    series = {}
    for act in comparison_activations(cfg):
        series[act.name] = run_perception_experiment(replace(cfg, activation=act))
    matrix = dtw_matrix([s.p_state1 for s in series.values()], **dtw_options)
    return Comparison(series, matrix)


def write_dtw_matrix(comp: Comparison, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["activation", *comp.labels])
        for name, row in zip(comp.labels, comp.dtw):
            writer.writerow([name, *(format_float(v) for v in row)])
    return path
