"""Single-hidden-layer regression networks with one-neuron architecture moves.

The ensemble sampler mutates these networks by adding or removing a single
hidden neuron at a time, so besides the usual forward/loss/gradient
operations this module provides ``grow``/``shrink`` moves that transfer the
existing weights, plus a fixed flat parameter layout (``pack``/``unpack``)
consumed by the quasi-Newton trainer.

Flat layout, in order: columns of ``w_in`` (column-major), ``b_in``,
``w_out``, ``b_out``.  Total length ``d*m + m + m + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

ACTIVATIONS = ("sigmoid", "relu")


class DimensionMismatchError(ValueError):
    """Input feature count does not match the network's."""

    def __init__(self, expected: int, actual: int):
        super().__init__(f"expected {expected} input features, got {actual}")
        self.expected = expected
        self.actual = actual


@dataclass(frozen=True)
class LossConfig:
    """Mean squared error plus an L2 penalty on the weight matrices.

    The penalty covers ``w_in`` and ``w_out`` only; biases are exempt, so a
    perfect fit with zero weights (but any biases) has zero loss.
    """

    l2_penalty: float = 0.001

    def __post_init__(self):
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be nonnegative")


@dataclass(frozen=True)
class SingleLayerNet:
    """Dense network with one hidden layer: d inputs -> m neurons -> scalar.

    Instances are immutable values; every operation returns a new network.
    """

    w_in: np.ndarray  # (d, m)
    b_in: np.ndarray  # (m,)
    w_out: np.ndarray  # (m,)
    b_out: float
    activation: str = "sigmoid"

    def __post_init__(self):
        w_in = np.atleast_2d(np.asarray(self.w_in, dtype=float))
        b_in = np.asarray(self.b_in, dtype=float).ravel()
        w_out = np.asarray(self.w_out, dtype=float).ravel()
        object.__setattr__(self, "w_in", w_in)
        object.__setattr__(self, "b_in", b_in)
        object.__setattr__(self, "w_out", w_out)
        object.__setattr__(self, "b_out", float(self.b_out))
        d, m = w_in.shape
        if m < 1:
            raise ValueError("networks must have at least one hidden neuron")
        if b_in.shape != (m,) or w_out.shape != (m,):
            raise ValueError(
                f"inconsistent shapes: w_in {w_in.shape}, b_in {b_in.shape}, w_out {w_out.shape}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if not (
            np.isfinite(w_in).all()
            and np.isfinite(b_in).all()
            and np.isfinite(w_out).all()
            and np.isfinite(self.b_out)
        ):
            raise ValueError("network weights must be finite")

    @property
    def d(self) -> int:
        return self.w_in.shape[0]

    @property
    def m(self) -> int:
        return self.w_in.shape[1]


def _new_weight_std(d: int) -> float:
    # Input weights of a brand new neuron are N(0, 1/sqrt(d)); its output
    # weight starts at zero so a freshly grown network predicts exactly like
    # its parent.
    return 1.0 / np.sqrt(d)


def initial_network(d: int, activation: str, rng: np.random.Generator) -> SingleLayerNet:
    """One-neuron starting network, drawn with the same scheme as `grow`."""
    w_in = rng.normal(0.0, _new_weight_std(d), size=(d, 1))
    return SingleLayerNet(w_in, np.zeros(1), np.zeros(1), 0.0, activation)


def _check_input(net: SingleLayerNet, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-dimensional, got shape {X.shape}")
    if X.shape[1] != net.d:
        raise DimensionMismatchError(net.d, X.shape[1])
    return X


def _hidden(net: SingleLayerNet, X: np.ndarray) -> np.ndarray:
    z = X @ net.w_in + net.b_in
    if net.activation == "sigmoid":
        return expit(z)
    return np.maximum(z, 0.0)


def forward(net: SingleLayerNet, X: np.ndarray) -> np.ndarray:
    """Evaluate the network on the rows of X (n x d) -> predictions (n,)."""
    X = _check_input(net, X)
    return _hidden(net, X) @ net.w_out + net.b_out


def loss(net: SingleLayerNet, X: np.ndarray, r: np.ndarray, cfg: LossConfig) -> float:
    """MSE against targets r plus l2_penalty * (|w_in|^2 + |w_out|^2)."""
    X = _check_input(net, X)
    r = np.asarray(r, dtype=float).ravel()
    if r.shape[0] != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but r has {r.shape[0]} entries")
    err = forward(net, X) - r
    penalty = cfg.l2_penalty * (np.sum(net.w_in**2) + np.sum(net.w_out**2))
    return float(np.mean(err**2) + penalty)


def gradient(net: SingleLayerNet, X: np.ndarray, r: np.ndarray, cfg: LossConfig) -> np.ndarray:
    """Gradient of `loss` w.r.t. the flat parameter vector (pack layout)."""
    X = _check_input(net, X)
    r = np.asarray(r, dtype=float).ravel()
    n = X.shape[0]
    if r.shape[0] != n:
        raise ValueError(f"X has {n} rows but r has {r.shape[0]} entries")
    z = X @ net.w_in + net.b_in
    if net.activation == "sigmoid":
        h = expit(z)
        dh = h * (1.0 - h)
    else:
        h = np.maximum(z, 0.0)
        dh = (z > 0.0).astype(float)
    err = h @ net.w_out + net.b_out - r
    dout = (2.0 / n) * err  # (n,)
    g_bout = float(np.sum(dout))
    g_wout = h.T @ dout + 2.0 * cfg.l2_penalty * net.w_out
    delta = dout[:, None] * net.w_out[None, :] * dh  # (n, m)
    g_win = X.T @ delta + 2.0 * cfg.l2_penalty * net.w_in
    g_bin = delta.sum(axis=0)
    return np.concatenate([g_win.ravel(order="F"), g_bin, g_wout, [g_bout]])


def flat_size(d: int, m: int) -> int:
    return d * m + 2 * m + 1


def pack(net: SingleLayerNet) -> np.ndarray:
    """Flatten parameters into the documented layout."""
    return np.concatenate([net.w_in.ravel(order="F"), net.b_in, net.w_out, [net.b_out]])


def unpack(flat: np.ndarray, d: int, m: int, activation: str) -> SingleLayerNet:
    """Rebuild a network from a flat vector; inverse of `pack`."""
    flat = np.asarray(flat, dtype=float).ravel()
    if flat.shape[0] != flat_size(d, m):
        raise ValueError(f"expected flat length {flat_size(d, m)} for d={d}, m={m}, got {flat.shape[0]}")
    w_in = flat[: d * m].reshape((d, m), order="F").copy()
    b_in = flat[d * m : d * m + m].copy()
    w_out = flat[d * m + m : d * m + 2 * m].copy()
    return SingleLayerNet(w_in, b_in, w_out, float(flat[-1]), activation)


def grow(net: SingleLayerNet, rng: np.random.Generator) -> SingleLayerNet:
    """Append one hidden neuron, keeping every existing weight in place."""
    col = rng.normal(0.0, _new_weight_std(net.d), size=(net.d, 1))
    return replace(
        net,
        w_in=np.hstack([net.w_in, col]),
        b_in=np.append(net.b_in, 0.0),
        w_out=np.append(net.w_out, 0.0),
    )


def shrink(net: SingleLayerNet) -> SingleLayerNet:
    """Drop the last hidden neuron; at m=1 return a structural copy."""
    if net.m == 1:
        return replace(net, w_in=net.w_in.copy(), b_in=net.b_in.copy(), w_out=net.w_out.copy())
    return replace(
        net,
        w_in=net.w_in[:, :-1].copy(),
        b_in=net.b_in[:-1].copy(),
        w_out=net.w_out[:-1].copy(),
    )
