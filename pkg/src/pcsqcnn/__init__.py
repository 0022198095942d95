"""Simulation of translation-equivariant quantum convolutional networks on image data."""

from .data import DatasetSpec, build_benchmark, load_idx, write_idx
from .diagnostics import check_sensitivity_bounds, count_parameters, empirical_gradient, landscape_probe, loss_histogram
from .encoding import EncoderConfig, bilinear_resize, encode_frqi, place_and_translate
from .estimator import CanvasTransformer, PCSQCNNClassifier
from .head import HeadParams, cross_entropy, head_forward, head_gradient, init_head
from .layers import LayerStack, MultiplexerParams, forward_quantum
from .readout import exact_readout, readout_entropy, sample_shots
from .state import RegisterLayout, StateTensor, build_layout
from .training import Adam, TrainConfig, grad_quantum, train

__version__ = "0.1.0"

__all__ = [
    "Adam", "CanvasTransformer", "DatasetSpec", "EncoderConfig", "HeadParams", "LayerStack",
    "MultiplexerParams", "PCSQCNNClassifier", "RegisterLayout", "StateTensor", "TrainConfig",
    "bilinear_resize", "build_benchmark", "build_layout", "check_sensitivity_bounds", "count_parameters",
    "cross_entropy", "empirical_gradient", "encode_frqi", "exact_readout", "forward_quantum", "grad_quantum",
    "head_forward", "head_gradient", "init_head", "landscape_probe", "load_idx", "loss_histogram",
    "place_and_translate", "readout_entropy", "sample_shots", "train", "write_idx",
]
