"""Neural networks with a quantum-tunnelling activation and a bistable-perception harness."""

__version__ = "0.1.0"

from .activation import QT, ReLU, Sigmoid, parse_activation, softmax
from .analysis import DtwResult, dtw_distance
from .experiment import (
    ExperimentConfig,
    PerceptionSeries,
    classical_percept,
    compare_activations,
    run_perception_experiment,
)
from .network import Mlp, Sample, TrainConfig, backprop_step, classify, forward, init_weights, train
from .rng import EntropyFileSource, EntropySpec, RemoteQrngSource, SeededSource, fetch_remote_entropy
from .stimuli import Stimulus, load_stimulus, necker_set, rubin_set, save_stimulus
from .tunnelling import BarrierParams, barrier_curve, transmission, transmission_derivative

__all__ = [
    "BarrierParams", "DtwResult", "EntropyFileSource", "EntropySpec", "ExperimentConfig", "Mlp",
    "PerceptionSeries", "QT", "ReLU", "RemoteQrngSource", "Sample", "SeededSource", "Sigmoid",
    "Stimulus", "TrainConfig", "backprop_step", "barrier_curve", "classical_percept", "classify",
    "compare_activations", "dtw_distance", "fetch_remote_entropy", "forward", "init_weights",
    "load_stimulus", "necker_set", "parse_activation", "run_perception_experiment", "rubin_set",
    "save_stimulus", "softmax", "train", "transmission", "transmission_derivative",
]
