"""Multi-trial benchmark harness with five-fold hyperparameter search.

Every trial re-splits the data with a trial-derived seed (base seed + trial
index) and runs each requested method on the identical split.  Trials are
independent, so they can run in parallel; the ``BARN_THREADS`` environment
variable caps the number of worker processes (default 1, serial).  Results
are ordered by trial either way, keeping reports reproducible.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from time import perf_counter

import numpy as np

from .baselines import BigNNConfig, bignn_fit, ols_fit, ols_predict
from .datasets import Dataset, Split, pca_fit_transform, split, standardize_y
from .network import forward
from .sampler import Ensemble, SamplerConfig, Trace, run_barn

METHODS = ("barn", "barn-cv", "ols", "bignn", "bignn-cv")

_METHOD_SEED_OFFSET = {"barn": 1, "barn-cv": 2, "ols": 5, "bignn": 3, "bignn-cv": 4}


def metrics(y_true: np.ndarray, y_pred: np.ndarray) -> tuple[float, float]:
    """(rmse, r2); r2 is NaN when the targets have zero variance."""
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    sse = float(np.sum((y_true - y_pred) ** 2))
    sst = float(np.sum((y_true - y_true.mean()) ** 2))
    rmse = math.sqrt(sse / y_true.shape[0])
    r2 = 1.0 - sse / sst if sst > 0 else math.nan
    return rmse, r2


def relative_rmse(rmse_by_method: dict[str, float]) -> dict[str, float]:
    """Each method's RMSE divided by the best method's on the same split."""
    finite = [v for v in rmse_by_method.values() if math.isfinite(v)]
    if not finite:
        return {k: math.nan for k in rmse_by_method}
    best = min(finite)
    if best == 0.0:
        return {k: (1.0 if v == 0.0 else math.inf) for k, v in rmse_by_method.items()}
    return {k: v / best for k, v in rmse_by_method.items()}


def pooled_std(groups: list[np.ndarray]) -> float:
    """Spread about each group's own mean, aggregated across groups."""
    if not groups:
        raise ValueError("need at least one group")
    num = 0.0
    den = 0
    for g in groups:
        g = np.asarray(g, dtype=float).ravel()
        if g.size == 0:
            raise ValueError("groups must be nonempty")
        num += float(np.sum((g - g.mean()) ** 2))
        den += g.size - 1
    if den == 0:
        return math.nan
    return math.sqrt(num / den)


def barn_cv_grid() -> list[dict]:
    """Eight ensemble configurations: sizes x prior means x activations."""
    return [
        {"n_networks": n, "prior_mean": lam, "activation": act}
        for n, lam, act in itertools.product([10, 20], [1.0, 2.0], ["sigmoid", "relu"])
    ]


def bignn_cv_grid() -> list[dict]:
    return [
        {"neuron_multiplier": mult, "learning_rate": lr, "epochs": ep, "activation": act}
        for mult, lr, ep, act in itertools.product(
            [1, 2, 10], [1e-5, 1e-4], [2000, 4000], ["sigmoid", "relu"]
        )
    ]


@dataclass
class MethodResult:
    rmse: dict[str, float]  # train / val / test
    r2: dict[str, float]  # train / test
    wall_time_s: float = 0.0
    extras: dict = field(default_factory=dict)


@dataclass
class TrialReport:
    trial: int
    seed: int
    methods: dict[str, MethodResult] = field(default_factory=dict)


def _score(ds: Dataset, predict) -> tuple[dict[str, float], dict[str, float]]:
    rmse_tr, r2_tr = metrics(ds.train_y, predict(ds.train_X))
    rmse_va, _ = metrics(ds.val_y, predict(ds.val_X))
    rmse_te, r2_te = metrics(ds.test_y, predict(ds.test_X))
    return (
        {"train": rmse_tr, "val": rmse_va, "test": rmse_te},
        {"train": r2_tr, "test": r2_te},
    )


def _barn_extras(ensemble: Ensemble, trace: Trace) -> dict:
    return {
        "neuron_counts": list(ensemble.neuron_counts),
        "total_neurons": ensemble.total_neurons,
        "neuron_posterior": {str(k): v for k, v in trace.post_burn_in_counts().items()},
        "iterations": len(trace),
        "accept_rate": trace.accept_rate(),
        "final_sigma": ensemble.sigma,
        "phi_final": trace.phi[-1],
        "phi_best": min(trace.phi),
    }


def _fold_datasets(dataset: Dataset, k: int, rng: np.random.Generator) -> list[Dataset]:
    """Partition the training split into k folds; fold f is held out.

    The held-out fold doubles as the validation set for methods that need
    one; the test indices stay empty so CV never touches the real test data.
    """
    train_idx = dataset._need_split().train
    if train_idx.size < k:
        raise ValueError(f"training split ({train_idx.size}) smaller than k={k}")
    perm = rng.permutation(train_idx)
    folds = np.array_split(perm, k)
    out = []
    empty = np.array([], dtype=int)
    for f in range(k):
        rest = np.sort(np.concatenate([folds[j] for j in range(k) if j != f]))
        out.append(replace(dataset, split=Split(train=rest, val=np.sort(folds[f]), test=empty)))
    return out


def run_cv(
    dataset: Dataset,
    method: str,
    grid: list[dict] | None = None,
    k: int = 5,
    seed: int = 0,
    sampler_cfg: SamplerConfig = SamplerConfig(),
    total_barn_neurons: int = 10,
):
    """Five-fold search over the grid; returns (best_params, refit result).

    Selection is by mean held-out-fold RMSE with ties broken by grid order.
    The winner is refit on the dataset's full training split.
    """
    if method not in ("barn", "bignn"):
        raise ValueError(f"cross-validation supports barn or bignn, got {method!r}")
    if grid is None:
        grid = barn_cv_grid() if method == "barn" else bignn_cv_grid()
    if not grid:
        raise ValueError("hyperparameter grid is empty")
    folds = _fold_datasets(dataset, k, np.random.default_rng(seed))
    mean_scores = []
    for params in grid:
        fold_rmses = []
        for f, fold_ds in enumerate(folds):
            # seeds depend on the fold only: configs are compared under
            # common random numbers, and duplicated configs tie exactly
            fit_seed = seed + 1000 * (f + 1)
            if method == "barn":
                cfg = replace(sampler_cfg, seed=fit_seed, **params)
                ens, _ = run_barn(fold_ds, cfg)
                pred = ens.predict(fold_ds.val_X)
            else:
                fit = bignn_fit(
                    fold_ds.train_X,
                    fold_ds.train_y,
                    total_barn_neurons,
                    BigNNConfig(**params),
                    sampler_cfg.loss,
                    np.random.default_rng(fit_seed),
                )
                pred = forward(fit.net, fold_ds.val_X)
            fold_rmses.append(metrics(fold_ds.val_y, pred)[0])
        mean_scores.append(float(np.mean(fold_rmses)))
    best_idx = int(np.argmin(mean_scores))
    best = grid[best_idx]
    if method == "barn":
        cfg = replace(sampler_cfg, seed=seed + 7, **best)
        fitted = run_barn(dataset, cfg)
    else:
        fitted = bignn_fit(
            dataset.train_X,
            dataset.train_y,
            total_barn_neurons,
            BigNNConfig(**best),
            sampler_cfg.loss,
            np.random.default_rng(seed + 7),
        )
    return best, fitted, mean_scores


def prepare_trial_dataset(raw: Dataset, trial_seed: int) -> Dataset:
    """Split, standardize, and rotate one trial's copy of the data."""
    ds = split(raw, rng=np.random.default_rng(trial_seed))
    ds = standardize_y(ds)
    return pca_fit_transform(ds)


def run_single_trial(
    raw: Dataset,
    methods: list[str],
    trial: int,
    base_seed: int,
    sampler_cfg: SamplerConfig = SamplerConfig(),
    bignn_cfg: BigNNConfig = BigNNConfig(),
    cv_folds: int = 5,
) -> TrialReport:
    for name in methods:
        if name not in METHODS:
            raise ValueError(f"unknown method {name!r}; choose from {METHODS}")
    trial_seed = base_seed + trial
    ds = prepare_trial_dataset(raw, trial_seed)
    report = TrialReport(trial=trial, seed=trial_seed)
    # run in canonical order so the big network can match the ensemble size
    ordered = [m for m in METHODS if m in methods]
    barn_neurons = sampler_cfg.n_networks
    for name in ordered:
        seed = trial_seed * 100 + _METHOD_SEED_OFFSET[name]
        start = perf_counter()
        try:
            result = _run_method(name, ds, seed, sampler_cfg, bignn_cfg, barn_neurons, cv_folds)
            if name == "barn":
                barn_neurons = result.extras.get("total_neurons", barn_neurons)
        except Exception as exc:  # a failed method must not sink the trial
            result = MethodResult(
                rmse={s: math.nan for s in ("train", "val", "test")},
                r2={s: math.nan for s in ("train", "test")},
                extras={"error": f"{type(exc).__name__}: {exc}"},
            )
        result.wall_time_s = perf_counter() - start
        report.methods[name] = result
    return report


def _run_method(name, ds, seed, sampler_cfg, bignn_cfg, barn_neurons, cv_folds) -> MethodResult:
    if name == "ols":
        model = ols_fit(ds.train_X, ds.train_y)
        rmse, r2 = _score(ds, lambda X: ols_predict(model, X))
        return MethodResult(rmse=rmse, r2=r2)
    if name == "barn":
        ens, trace = run_barn(ds, replace(sampler_cfg, seed=seed))
        rmse, r2 = _score(ds, ens.predict)
        return MethodResult(rmse=rmse, r2=r2, extras=_barn_extras(ens, trace))
    if name == "barn-cv":
        best, (ens, trace), scores = run_cv(
            ds, "barn", k=cv_folds, seed=seed, sampler_cfg=sampler_cfg
        )
        rmse, r2 = _score(ds, ens.predict)
        extras = _barn_extras(ens, trace)
        extras["chosen"] = best
        extras["fold_mean_rmse"] = scores
        return MethodResult(rmse=rmse, r2=r2, extras=extras)
    if name == "bignn":
        fit = bignn_fit(
            ds.train_X, ds.train_y, barn_neurons, bignn_cfg, sampler_cfg.loss,
            np.random.default_rng(seed),
        )
        rmse, r2 = _score(ds, lambda X: forward(fit.net, X))
        return MethodResult(
            rmse=rmse, r2=r2,
            extras={"neurons": fit.net.m, "final_loss": fit.final_loss, "converged": fit.ok},
        )
    if name == "bignn-cv":
        best, fit, scores = run_cv(
            ds, "bignn", k=cv_folds, seed=seed,
            sampler_cfg=sampler_cfg, total_barn_neurons=barn_neurons,
        )
        rmse, r2 = _score(ds, lambda X: forward(fit.net, X))
        return MethodResult(
            rmse=rmse, r2=r2,
            extras={"neurons": fit.net.m, "chosen": best, "converged": fit.ok,
                    "fold_mean_rmse": scores},
        )
    raise ValueError(f"unknown method {name!r}")


def _trial_worker(args) -> TrialReport:
    raw, methods, trial, base_seed, sampler_cfg, bignn_cfg, cv_folds = args
    return run_single_trial(raw, methods, trial, base_seed, sampler_cfg, bignn_cfg, cv_folds)


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get("BARN_THREADS", "1")))
    except ValueError:
        return 1


def run_trials(
    raw: Dataset,
    methods: list[str],
    n_trials: int = 40,
    seed: int = 0,
    sampler_cfg: SamplerConfig = SamplerConfig(),
    bignn_cfg: BigNNConfig = BigNNConfig(),
    cv_folds: int = 5,
) -> list[TrialReport]:
    """Run every method on n_trials fresh splits of the same data."""
    jobs = [(raw, methods, t, seed, sampler_cfg, bignn_cfg, cv_folds) for t in range(n_trials)]
    workers = max_workers()
    if workers <= 1 or n_trials <= 1:
        return [_trial_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, n_trials)) as pool:
        return list(pool.map(_trial_worker, jobs))
