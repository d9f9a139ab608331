"""MCMC over ensembles of small networks.

Each pass visits the networks in fixed order.  For network k it forms the
residual left by the others, proposes growing (probability ``grow_prob``)
or shrinking the hidden layer by one neuron, retrains the proposal on the
training residual with BFGS, and accepts or rejects by Metropolis-Hastings.
The acceptance ratio combines three log-space terms:

* the transition ratio of the one-neuron proposal kernel,
* the peak-likelihood evidence, a Gaussian likelihood of the *validation*
  residuals at the trained weights (held-out data keeps the evidence from
  rewarding overfit proposals),
* a Poisson prior on the hidden-layer size, which favors small networks.

After each full pass the noise level sigma is refreshed from its conjugate
inverse-gamma posterior given the ensemble's training residuals.  Runs stop
early once the validation RMSE stops improving.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import gammainccinv

from .datasets import Dataset
from .network import LossConfig, SingleLayerNet, forward, grow, initial_network, shrink
from .optimize import OptimConfig, train


@dataclass(frozen=True)
class SamplerConfig:
    n_networks: int = 10
    grow_prob: float = 0.4
    prior_mean: float = 1.0  # Poisson mean on hidden-layer size
    max_iter: int = 200
    min_iter: int = 20
    check_every: int = 5
    tol: float = 1e-4
    sigma_prior: tuple[float, float] = (3.0, 0.90)  # (nu, prior mass below the OLS residual std)
    seed: int = 0
    activation: str = "sigmoid"
    # "plateau" stops once a check fails to improve the best validation RMSE
    # by at least tol; "worsen" stops only when it exceeds the best by tol.
    early_stop: str = "plateau"
    keep_last: int = 0  # retain the final k ensembles for interval output
    loss: LossConfig = field(default_factory=LossConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)

    def __post_init__(self):
        if self.n_networks < 1:
            raise ValueError("n_networks must be >= 1")
        if not 0.0 < self.grow_prob < 1.0:
            raise ValueError("grow_prob must be in (0, 1)")
        if self.prior_mean <= 0:
            raise ValueError("prior_mean must be positive")
        if self.min_iter > self.max_iter:
            raise ValueError("min_iter must not exceed max_iter")
        if self.early_stop not in ("plateau", "worsen"):
            raise ValueError("early_stop must be 'plateau' or 'worsen'")
        nu, q = self.sigma_prior
        if nu <= 0 or not 0.0 < q < 1.0:
            raise ValueError("sigma_prior needs nu > 0 and 0 < q < 1")


@dataclass(frozen=True)
class Ensemble:
    nets: tuple[SingleLayerNet, ...]
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "nets", tuple(self.nets))
        if len(self.nets) == 0:
            raise ValueError("ensemble must contain at least one network")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros(np.asarray(X).shape[0])
        for net in self.nets:
            out += forward(net, X)
        return out

    @property
    def neuron_counts(self) -> tuple[int, ...]:
        return tuple(net.m for net in self.nets)

    @property
    def total_neurons(self) -> int:
        return sum(net.m for net in self.nets)


@dataclass
class Trace:
    """Per-iteration series recorded during a run (all the same length)."""

    phi: list[float] = field(default_factory=list)
    accept_flags: list[tuple[bool, ...]] = field(default_factory=list)
    neuron_counts: list[tuple[int, ...]] = field(default_factory=list)
    sigma_path: list[float] = field(default_factory=list)
    kept_ensembles: list[Ensemble] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.phi)

    def accept_rate(self) -> float:
        if not self.accept_flags:
            return 0.0
        return float(np.mean([np.mean(flags) for flags in self.accept_flags]))

    def post_burn_in_counts(self) -> dict[int, int]:
        """Histogram of hidden sizes over the second half of the run."""
        burn = len(self) // 2
        hist: dict[int, int] = {}
        for row in self.neuron_counts[burn:]:
            for m in row:
                hist[m] = hist.get(m, 0) + 1
        return dict(sorted(hist.items()))

    def to_csv(self, path: str | Path) -> None:
        """Write iteration, phi, sigma, m_1..m_N, accept_1..accept_N."""
        n_nets = len(self.neuron_counts[0]) if self.neuron_counts else 0
        header = (
            ["iteration", "phi", "sigma"]
            + [f"m_{k + 1}" for k in range(n_nets)]
            + [f"accept_{k + 1}" for k in range(n_nets)]
        )
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t in range(len(self)):
                writer.writerow(
                    [t + 1, f"{self.phi[t]:.10g}", f"{self.sigma_path[t]:.10g}"]
                    + list(self.neuron_counts[t])
                    + [int(a) for a in self.accept_flags[t]]
                )


def propose(m: int, p: float, rng: np.random.Generator) -> tuple[int, float]:
    """Draw a one-neuron size move; returns (m', log transition ratio).

    The ratio is log T(old|new) - log T(new|old) for the kernel that grows
    with probability p and otherwise shrinks toward the floor at one neuron,
    where the shrink proposal is a self-move with the same forward and
    reverse probability.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if rng.random() < p:
        return m + 1, math.log((1.0 - p) / p)
    if m == 1:
        return 1, 0.0
    return m - 1, math.log(p / (1.0 - p))


def log_prior_ratio(m_new: int, m_old: int, lam: float) -> float:
    """log of the Poisson(lam) prior mass ratio between two hidden sizes."""
    if m_new < 1 or m_old < 1:
        raise ValueError("neuron counts must be >= 1")
    return (m_new - m_old) * math.log(lam) + math.lgamma(m_old + 1) - math.lgamma(m_new + 1)


def log_evidence(net: SingleLayerNet, X_val: np.ndarray, r_val: np.ndarray, sigma: float) -> float:
    """Gaussian log likelihood of the validation residuals at the trained weights."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    r_val = np.asarray(r_val, dtype=float).ravel()
    if r_val.shape[0] == 0:
        raise ValueError("validation set is empty")
    err = r_val - forward(net, X_val)
    return float(-0.5 * np.sum((err / sigma) ** 2) - r_val.shape[0] * math.log(sigma * math.sqrt(2 * math.pi)))


def accept(
    log_t_ratio: float,
    log_evidence_new: float,
    log_evidence_old: float,
    log_prior_ratio: float,
    rng: np.random.Generator,
) -> bool:
    """Metropolis-Hastings test, entirely in log space."""
    log_a = log_t_ratio + (log_evidence_new - log_evidence_old) + log_prior_ratio
    if math.isnan(log_a):
        return False
    if log_a >= 0.0:
        return True
    # accept iff log(u) < log_a for u ~ U(0,1); -Exp(1) is log(u) without log(0) risk
    return -rng.exponential() < log_a


def sample_sigma(
    residuals_train: np.ndarray, nu: float, lam_sigma: float, rng: np.random.Generator
) -> float:
    """Draw sigma from the conjugate inverse-gamma posterior of sigma^2."""
    residuals_train = np.asarray(residuals_train, dtype=float).ravel()
    n = residuals_train.shape[0]
    if n < 1:
        raise ValueError("need at least one residual")
    if nu <= 0 or lam_sigma <= 0:
        raise ValueError("nu and lam_sigma must be positive")
    shape = 0.5 * (nu + n)
    scale = 0.5 * (nu * lam_sigma + float(residuals_train @ residuals_train))
    # sigma^2 ~ InvGamma(shape, scale) == 1 / Gamma(shape, 1/scale)
    sigma_sq = scale / rng.gamma(shape)
    return math.sqrt(sigma_sq)


def _ols_residual_std(y: np.ndarray, X: np.ndarray) -> float:
    # floored so constant targets still yield a (tiny) positive noise scale
    floor = 1e-9
    n, d = X.shape
    if n <= d + 1:
        return max(float(np.std(y)), floor)
    A = np.hstack([X, np.ones((n, 1))])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    sig = math.sqrt(float(resid @ resid) / (n - d - 1))
    if sig == 0.0 or not math.isfinite(sig):
        sig = float(np.std(y))
    return max(sig, floor)


def calibrate_sigma_prior(y_train: np.ndarray, X_train: np.ndarray, nu: float, q: float) -> float:
    """Choose the inverse-gamma scale so P(sigma < OLS residual std) = q.

    With sigma^2 ~ InvGamma(nu/2, nu*lam/2) the prior CDF at s^2 is the
    regularized upper incomplete gamma Q(nu/2, nu*lam/(2 s^2)), so the
    quantile condition inverts in closed form.
    """
    if not 0.0 < q < 1.0:
        raise ValueError("q must be in (0, 1)")
    y_train = np.asarray(y_train, dtype=float).ravel()
    X_train = np.asarray(X_train, dtype=float)
    sig_hat = _ols_residual_std(y_train, X_train)
    return float(2.0 * sig_hat**2 * gammainccinv(nu / 2.0, q) / nu)


def gibbs_sweep(
    ensemble: Ensemble,
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    cfg: SamplerConfig,
    rng: np.random.Generator,
) -> tuple[Ensemble, tuple[bool, ...]]:
    """One pass of per-network proposals, conditioning on the others.

    Residuals are refreshed inside the sweep, so a change accepted for
    network k is felt immediately by networks k+1..N.  Rejection keeps the
    previous network object untouched.
    """
    nets = list(ensemble.nets)
    preds_train = [forward(net, X_train) for net in nets]
    preds_val = [forward(net, X_val) for net in nets]
    sum_train = np.sum(preds_train, axis=0)
    sum_val = np.sum(preds_val, axis=0)
    sigma = ensemble.sigma
    flags = []
    for k in range(len(nets)):
        r_train = y_train - (sum_train - preds_train[k])
        r_val = y_val - (sum_val - preds_val[k])
        old = nets[k]
        m_new, log_t = propose(old.m, cfg.grow_prob, rng)
        proposal = grow(old, rng) if m_new == old.m + 1 else shrink(old)
        proposal = train(proposal, X_train, r_train, cfg.optim, cfg.loss)
        ok = accept(
            log_t,
            log_evidence(proposal, X_val, r_val, sigma),
            log_evidence(old, X_val, r_val, sigma),
            log_prior_ratio(m_new, old.m, cfg.prior_mean),
            rng,
        )
        flags.append(ok)
        if ok:
            nets[k] = proposal
            new_train = forward(proposal, X_train)
            new_val = forward(proposal, X_val)
            sum_train += new_train - preds_train[k]
            sum_val += new_val - preds_val[k]
            preds_train[k] = new_train
            preds_val[k] = new_val
    return Ensemble(tuple(nets), sigma), tuple(flags)


def run_barn(dataset: Dataset, cfg: SamplerConfig = SamplerConfig()) -> tuple[Ensemble, Trace]:
    """Run the full sampler on a split dataset; returns the final ensemble.

    Networks start with one neuron each, fit independently to y/N.  After
    every sweep sigma is resampled, and from ``min_iter`` onward the
    validation RMSE is checked every ``check_every`` iterations against the
    best seen so far: under the default plateau rule the run stops once a
    check fails to improve the best by at least ``tol`` (the "worsen"
    variant stops only when it exceeds the best by ``tol``).  The ensemble
    standing at that point, not the historical best, is returned.
    """
    X_train, y_train = dataset.train_X, dataset.train_y
    X_val, y_val = dataset.val_X, dataset.val_y
    if X_train.shape[0] == 0 or X_val.shape[0] == 0:
        raise ValueError("training and validation splits must be nonempty")
    rng = np.random.default_rng(cfg.seed)
    n_nets = cfg.n_networks
    d = X_train.shape[1]
    nu, q = cfg.sigma_prior
    lam_sigma = calibrate_sigma_prior(y_train, X_train, nu, q)

    nets = []
    share = y_train / n_nets
    for _ in range(n_nets):
        net = initial_network(d, cfg.activation, rng)
        nets.append(train(net, X_train, share, cfg.optim, cfg.loss))
    ensemble = Ensemble(tuple(nets), _ols_residual_std(y_train, X_train))

    trace = Trace()
    best = math.inf
    for t in range(1, cfg.max_iter + 1):
        ensemble, flags = gibbs_sweep(ensemble, X_train, y_train, X_val, y_val, cfg, rng)
        resid = y_train - ensemble.predict(X_train)
        sigma = sample_sigma(resid, nu, lam_sigma, rng)
        ensemble = replace(ensemble, sigma=sigma)
        phi = float(np.sqrt(np.mean((y_val - ensemble.predict(X_val)) ** 2)))
        trace.phi.append(phi)
        trace.accept_flags.append(flags)
        trace.neuron_counts.append(ensemble.neuron_counts)
        trace.sigma_path.append(sigma)
        if cfg.keep_last > 0:
            trace.kept_ensembles.append(ensemble)
            del trace.kept_ensembles[: -cfg.keep_last]
        if t >= cfg.min_iter and t % cfg.check_every == 0:
            margin = -cfg.tol if cfg.early_stop == "plateau" else cfg.tol
            if phi > best + margin:
                break
        best = min(best, phi)
    return ensemble, trace


def batch_means_check(
    phi: list[float] | np.ndarray, n_batches: int, rmse_variance_ref: float | None = None
) -> tuple[float, bool | None]:
    """Variance of contiguous batch means of the RMSE trace.

    A run looks converged when this variance is under 1% of the RMSE
    variance observed across independent runs; pass that reference to get
    the boolean verdict, otherwise only the variance is returned.
    """
    phi = np.asarray(phi, dtype=float).ravel()
    if n_batches < 2:
        raise ValueError("need at least 2 batches")
    if phi.shape[0] < 2 * n_batches:
        raise ValueError(f"need at least {2 * n_batches} iterations, got {phi.shape[0]}")
    size = phi.shape[0] // n_batches
    # trailing remainder is dropped so all batches have equal size
    means = phi[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    batch_var = float(np.var(means, ddof=1))
    if rmse_variance_ref is None:
        return batch_var, None
    return batch_var, batch_var < 0.01 * rmse_variance_ref
