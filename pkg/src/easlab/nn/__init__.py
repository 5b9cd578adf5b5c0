"""Micro autodiff engine, learned enhancers, objectives, and training."""
from .autodiff import Tensor
from .losses import LossValue, loss_combined, loss_mse, loss_stoi
from .models import (ConvLayer, DdaeModel, DenseLayer, FcnModel,
                     WEIGHTS_FORMAT_VERSION, ddae_enhance, ddae_identity_model,
                     ddae_model, fcn_forward, fcn_model, load_model, save_model)
from .training import (Adam, Sgd, TrainConfig, TrainResult,
                       TrainingDivergedError, grad_check, train)

__all__ = [
    "Adam", "ConvLayer", "DdaeModel", "DenseLayer", "FcnModel", "LossValue",
    "Sgd", "Tensor", "TrainConfig", "TrainResult", "TrainingDivergedError",
    "WEIGHTS_FORMAT_VERSION", "ddae_enhance", "ddae_identity_model",
    "ddae_model", "fcn_forward", "fcn_model", "grad_check", "load_model",
    "loss_combined", "loss_mse", "loss_stoi", "save_model", "train",
]
