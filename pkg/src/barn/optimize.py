"""BFGS quasi-Newton minimizer with Armijo backtracking.

Used to fit each proposed network to its residual target.  The line search
and the curvature guard are pinned so that runs are bit-reproducible:
backtracking from a unit step with sufficient-decrease constant 1e-4 and
halving, and the inverse-Hessian update is skipped whenever s'y <= 1e-10,
which keeps the approximation symmetric positive definite.

A failed or non-finite optimization never raises: the sampler treats a bad
proposal as an ordinary (likely rejected) candidate, so `minimize` returns
the best iterate seen along with a status flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .network import LossConfig, SingleLayerNet, gradient, loss, pack, unpack

CURVATURE_GUARD = 1e-10


@dataclass(frozen=True)
class OptimConfig:
    """Stopping rules and Armijo backtracking parameters."""

    max_iter: int = 100
    grad_tol: float = 1e-5
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 40

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be nonnegative")


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    iters: int
    status: str  # converged | max_iter | line_search_failed | non_finite

    @property
    def ok(self) -> bool:
        return self.status != "non_finite"


def minimize(
    f: Callable[[np.ndarray], float],
    g: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    cfg: OptimConfig = OptimConfig(),
) -> MinimizeResult:
    """Minimize f starting from x0; never returns an iterate worse than x0."""
    x = np.asarray(x0, dtype=float).copy()
    fx = float(f(x))
    gx = np.asarray(g(x), dtype=float)
    if not (np.isfinite(fx) and np.isfinite(gx).all()):
        return MinimizeResult(x, fx, 0, "non_finite")

    n = x.shape[0]
    eye = np.eye(n)
    hinv = eye.copy()
    for k in range(cfg.max_iter):
        gnorm = float(np.linalg.norm(gx))
        if gnorm <= cfg.grad_tol:
            return MinimizeResult(x, fx, k, "converged")

        p = -hinv @ gx
        slope = float(gx @ p)
        if slope >= 0.0:
            # numerical loss of positive definiteness; restart from steepest descent
            hinv = eye.copy()
            p = -gx
            slope = -gnorm**2

        alpha = 1.0
        fnew = np.inf
        for _ in range(cfg.max_backtracks):
            fnew = float(f(x + alpha * p))
            if np.isfinite(fnew) and fnew <= fx + cfg.armijo_c * alpha * slope:
                break
            alpha *= cfg.backtrack_factor
        else:
            return MinimizeResult(x, fx, k, "line_search_failed")

        x_new = x + alpha * p
        g_new = np.asarray(g(x_new), dtype=float)
        if not np.isfinite(g_new).all():
            # keep the last finite iterate (it already improved on x0)
            if np.isfinite(fnew) and fnew <= fx:
                return MinimizeResult(x_new, fnew, k + 1, "non_finite")
            return MinimizeResult(x, fx, k, "non_finite")

        s = x_new - x
        y = g_new - gx
        sy = float(s @ y)
        if sy > CURVATURE_GUARD:
            rho = 1.0 / sy
            v = eye - rho * np.outer(s, y)
            hinv = v @ hinv @ v.T + rho * np.outer(s, s)
        x, fx, gx = x_new, fnew, g_new

    return MinimizeResult(x, fx, cfg.max_iter, "max_iter")


def train(
    net: SingleLayerNet,
    X: np.ndarray,
    r: np.ndarray,
    optim_cfg: OptimConfig = OptimConfig(),
    loss_cfg: LossConfig = LossConfig(),
) -> SingleLayerNet:
    """Fit the network to targets r by BFGS, preserving its architecture.

    Degrades gracefully: if the optimizer flags a non-finite evaluation and
    made no progress, the input network is returned unchanged, so one bad
    proposal cannot abort a sampling run.
    """
    d, m, act = net.d, net.m, net.activation

    def f(v: np.ndarray) -> float:
        return loss(unpack(v, d, m, act), X, r, loss_cfg)

    def g(v: np.ndarray) -> np.ndarray:
        return gradient(unpack(v, d, m, act), X, r, loss_cfg)

    x0 = pack(net)
    res = minimize(f, g, x0, optim_cfg)
    if not np.isfinite(res.fun) or res.fun > f(x0) or not np.isfinite(res.x).all():
        return net
    return unpack(res.x, d, m, act)
