"""Desk-scale binary autoencoder with surrogate-gradient training."""

from .autodiff import Tensor
from .binarize import heaviside_forward, heaviside_backward
from .model import ToyAutoencoder, ModelConfig
from .losses import loss_reconstruction, loss_sparsity, loss_sparsity_mu, target_event_count
from .train import TrainConfig, Variant, gamma_schedule, train
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "Tensor",
    "heaviside_forward",
    "heaviside_backward",
    "ToyAutoencoder",
    "ModelConfig",
    "loss_reconstruction",
    "loss_sparsity",
    "loss_sparsity_mu",
    "target_event_count",
    "TrainConfig",
    "Variant",
    "gamma_schedule",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]
