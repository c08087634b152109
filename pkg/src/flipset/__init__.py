"""Minimal training-set flips for L2-regularized logistic regression.

Find a small subset of training data whose removal (verified by exact
retraining) flips a chosen test prediction, using influence-function
approximations; inspect and dispute the subset through a CLI or HTTP
service.
"""

from .data import DatasetSplit, Instance, dense_vector
from .errors import (ConfigError, DataError, DegenerateRemainderError,
                     FlipsetError, InputError, NumericalError, TrainingError)
from .influence import (METHODS, AttributionScores, InfluenceVector,
                        ParamInfluence, attribution, loss_influence,
                        param_influence, prediction_influence, solve_spd)
from .ingest import (BowConfig, CorpusRecord, featurize_bow, load_corpus,
                     load_embeddings, make_synthetic)
from .model import (Hyperparams, TrainedModel, loss_grad, prediction_gradient,
                    risk_hessian, sigmoid, train)
from .search import (FlipsetResult, greedy_flipset, iterative_flipset)
from .verification import (LooCalibrationReport, brute_force_min_flipset,
                           loo_calibration, retrain_without, verify_flip)

__version__ = "0.1.0"

__all__ = [
    "AttributionScores", "BowConfig", "ConfigError", "CorpusRecord",
    "DataError", "DatasetSplit", "DegenerateRemainderError", "FlipsetError",
    "FlipsetResult", "Hyperparams", "InfluenceVector", "InputError",
    "Instance", "LooCalibrationReport", "METHODS", "NumericalError",
    "ParamInfluence", "TrainedModel", "TrainingError", "attribution",
    "brute_force_min_flipset", "dense_vector", "featurize_bow",
    "greedy_flipset", "iterative_flipset", "load_corpus", "load_embeddings",
    "loo_calibration", "loss_grad", "loss_influence", "make_synthetic",
    "param_influence", "prediction_gradient", "prediction_influence",
    "retrain_without", "risk_hessian", "sigmoid", "solve_spd", "train",
    "verify_flip",
]
