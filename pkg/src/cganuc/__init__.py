"""Conditional-GAN predictor whose Monte Carlo output distribution carries its own uncertainty."""

from cganuc.distributions import EmpiricalDistribution, estimate_density, point_estimate
from cganuc.networks import ModelBundle, build_model
from cganuc.prediction import PredictionWithUncertainty, mc_predict, predict, predict_class
from cganuc.training import TrainConfig, train
from cganuc.uncertainty import entropy, symmetric_kl, uncertainty

__all__ = [
    "EmpiricalDistribution",
    "ModelBundle",
    "PredictionWithUncertainty",
    "TrainConfig",
    "build_model",
    "entropy",
    "estimate_density",
    "mc_predict",
    "point_estimate",
    "predict",
    "predict_class",
    "symmetric_kl",
    "train",
    "uncertainty",
]
