"""Comparison methods run on the same splits: OLS and a single big network.

The big network keeps one hidden layer but matches the total neuron count of
the sampled ensemble (optionally scaled by a multiplier), so both models
carry the same number of weights.  It trains full batch with Adam under the
same L2 penalty; the untuned defaults are multiplier 1, learning rate 1e-4,
2000 epochs, sigmoid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import LossConfig, SingleLayerNet, gradient, loss, pack, unpack


@dataclass(frozen=True)
class OlsModel:
    coef: np.ndarray  # length d+1, intercept last

    @property
    def d(self) -> int:
        return self.coef.shape[0] - 1


def ols_fit(X_train: np.ndarray, y_train: np.ndarray) -> OlsModel:
    """Least squares with intercept via SVD; minimum-norm if rank deficient."""
    X_train = np.asarray(X_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float).ravel()
    if X_train.shape[0] < 1:
        raise ValueError("cannot fit OLS on an empty training set")
    A = np.hstack([X_train, np.ones((X_train.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(A, y_train, rcond=None)
    return OlsModel(coef=coef)


def ols_predict(model: OlsModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[1] != model.d:
        raise ValueError(f"model expects {model.d} features, got {X.shape[1]}")
    return X @ model.coef[:-1] + model.coef[-1]


@dataclass(frozen=True)
class BigNNConfig:
    neuron_multiplier: int = 1
    learning_rate: float = 1e-4
    epochs: int = 2000
    activation: str = "sigmoid"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.neuron_multiplier < 1:
            raise ValueError("neuron_multiplier must be >= 1")


@dataclass
class BigNNFit:
    net: SingleLayerNet
    final_loss: float
    ok: bool  # False when training hit non-finite values and was rolled back


def bignn_fit(
    X_train: np.ndarray,
    y_train: np.ndarray,
    total_barn_neurons: int,
    cfg: BigNNConfig = BigNNConfig(),
    loss_cfg: LossConfig = LossConfig(),
    rng: np.random.Generator | None = None,
) -> BigNNFit:
    """Train the size-matched single network with full-batch Adam."""
    if total_barn_neurons < 1:
        raise ValueError("total_barn_neurons must be >= 1")
    X_train = np.asarray(X_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float).ravel()
    rng = rng or np.random.default_rng()
    d = X_train.shape[1]
    m = cfg.neuron_multiplier * total_barn_neurons
    net = SingleLayerNet(
        rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, m)),
        np.zeros(m),
        rng.normal(0.0, 1.0 / np.sqrt(m), size=m),
        0.0,
        cfg.activation,
    )
    x = pack(net)
    mom = np.zeros_like(x)
    vel = np.zeros_like(x)
    last_finite = x.copy()
    ok = True
    for t in range(1, cfg.epochs + 1):
        g = gradient(unpack(x, d, m, cfg.activation), X_train, y_train, loss_cfg)
        if not np.isfinite(g).all():
            ok = False
            x = last_finite
            break
        mom = cfg.beta1 * mom + (1 - cfg.beta1) * g
        vel = cfg.beta2 * vel + (1 - cfg.beta2) * g**2
        m_hat = mom / (1 - cfg.beta1**t)
        v_hat = vel / (1 - cfg.beta2**t)
        x = x - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)
        if np.isfinite(x).all():
            last_finite = x
        else:
            ok = False
            x = last_finite
            break
    net = unpack(x, d, m, cfg.activation)
    final = loss(net, X_train, y_train, loss_cfg)
    if not np.isfinite(final):
        ok = False
    return BigNNFit(net=net, final_loss=float(final), ok=ok)
