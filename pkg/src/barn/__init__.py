"""BARN: Bayesian additive regression networks.

An ensemble of single-hidden-layer networks is sampled with
Metropolis-Hastings-within-Gibbs moves over the hidden-layer sizes, each
network fit by BFGS to the residual left by the others.  The package also
ships the comparison baselines, synthetic data generators, and the
multi-trial benchmark harness behind the ``barn`` command line tool.
"""

from .network import LossConfig, SingleLayerNet, forward, grow, pack, shrink, unpack
from .optimize import MinimizeResult, OptimConfig, minimize, train
from .sampler import Ensemble, SamplerConfig, Trace, run_barn
from .datasets import Dataset, SynthSpec, generate, load_csv, pca_fit_transform, split, standardize_y
from .baselines import BigNNConfig, OlsModel, bignn_fit, ols_fit, ols_predict
from .bench import metrics, pooled_std, relative_rmse, run_cv, run_trials

__all__ = [
    "BigNNConfig",
    "Dataset",
    "Ensemble",
    "LossConfig",
    "MinimizeResult",
    "OlsModel",
    "OptimConfig",
    "SamplerConfig",
    "SingleLayerNet",
    "SynthSpec",
    "Trace",
    "bignn_fit",
    "forward",
    "generate",
    "grow",
    "load_csv",
    "metrics",
    "minimize",
    "ols_fit",
    "ols_predict",
    "pack",
    "pca_fit_transform",
    "pooled_std",
    "relative_rmse",
    "run_barn",
    "run_cv",
    "run_trials",
    "shrink",
    "split",
    "standardize_y",
    "train",
    "unpack",
]

__version__ = "0.1.0"
