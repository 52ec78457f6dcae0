"""Small fully connected networks written directly in numpy."""

from nearwell.nn.io import ModelFormatError, WellIndexNet, load_model, save_model
from nearwell.nn.network import ACTIVATIONS, FCNN, forward, gradients, init_network, input_gradient, loss_mse
from nearwell.nn.scaling import Scaler
from nearwell.nn.search import DEFAULT_GRID, SearchResult, hyperparameter_search
from nearwell.nn.sensitivity import mean_ranges, sensitivity
from nearwell.nn.train import AdamState, Architecture, TrainConfig, TrainingError, TrainResult, adam_step, train

__all__ = [
    "ACTIVATIONS", "AdamState", "Architecture", "DEFAULT_GRID", "FCNN", "ModelFormatError", "Scaler",
    "SearchResult", "TrainConfig", "TrainResult", "TrainingError", "WellIndexNet", "adam_step", "forward",
    "gradients", "hyperparameter_search", "init_network", "input_gradient", "load_model", "loss_mse",
    "mean_ranges", "save_model", "sensitivity", "train",
]
