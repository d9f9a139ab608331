"""Dataset ingestion, preprocessing, splitting, and synthetic generators.

Preprocessing follows the benchmark protocol: targets standardized to mean 0
and unit variance, inputs rotated by a full-rank PCA, both fitted on the
training rows only.  Splits are 50/25/25 train/validation/test.

The synthetic factory covers a linear map, discrete clusters, a random
forest smoothed version of the clusters, and the three classic Friedman
benchmark functions, each perturbed by SNR-controlled noise and padded
with irrelevant features.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .forest import RandomForestRegressor

RELATIONSHIPS = ("linear", "cluster", "forest", "friedman1", "friedman2", "friedman3")

# Friedman's standard input ranges for the product/reciprocal functions.
F23_LOW = np.array([0.0, 40.0 * np.pi, 0.0, 1.0])
F23_HIGH = np.array([100.0, 560.0 * np.pi, 1.0, 11.0])


class MissingTargetError(ValueError):
    """Requested target column is not present in the file."""


class NonNumericDataError(ValueError):
    """CSV contains cells that do not parse as numbers."""


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


@dataclass(frozen=True)
class PcaState:
    mean: np.ndarray  # (d,) training-row feature means
    components: np.ndarray  # (d, d) orthonormal, columns are principal axes


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = ()
    name: str = "data"
    split: Split | None = None
    y_stats: tuple[float, float] | None = None  # (mean, std) fitted on train
    pca: PcaState | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"X {X.shape} and y {y.shape} do not align")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if not self.feature_names:
            object.__setattr__(
                self, "feature_names", tuple(f"x{i + 1}" for i in range(X.shape[1]))
            )

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def train_X(self):
        return self.X[self._need_split().train]

    @property
    def train_y(self):
        return self.y[self._need_split().train]

    @property
    def val_X(self):
        return self.X[self._need_split().val]

    @property
    def val_y(self):
        return self.y[self._need_split().val]

    @property
    def test_X(self):
        return self.X[self._need_split().test]

    @property
    def test_y(self):
        return self.y[self._need_split().test]

    def _need_split(self) -> Split:
        if self.split is None:
            raise ValueError("dataset has no split assigned")
        return self.split


def load_csv(path: str | Path, target_column: str) -> Dataset:
    """Read a numeric CSV with a header row into an unsplit dataset."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such data file: {path}")
    frame = pd.read_csv(path)
    if target_column not in frame.columns:
        raise MissingTargetError(
            f"target column {target_column!r} not in file; available: {list(frame.columns)}"
        )
    coerced = frame.apply(pd.to_numeric, errors="coerce")
    bad = coerced.isna() & frame.notna()
    if bad.any().any() or frame.isna().any().any():
        cols = sorted(frame.columns[(bad | frame.isna()).any()])
        raise NonNumericDataError(f"non-numeric or missing cells in columns: {cols}")
    if len(frame) == 0:
        raise NonNumericDataError("file has a header but no data rows")
    y = coerced[target_column].to_numpy(dtype=float)
    rest = coerced.drop(columns=[target_column])
    return Dataset(
        rest.to_numpy(dtype=float),
        y,
        feature_names=tuple(str(c) for c in rest.columns),
        name=path.stem,
    )


def save_csv(dataset: Dataset, path: str | Path, target_column: str = "y") -> None:
    """Write the dataset in the same CSV format `load_csv` reads."""
    frame = pd.DataFrame(dataset.X, columns=list(dataset.feature_names))
    frame[target_column] = dataset.y
    frame.to_csv(path, index=False)


def split(
    dataset: Dataset,
    fractions: tuple[float, float, float] = (0.5, 0.25, 0.25),
    rng: np.random.Generator | None = None,
) -> Dataset:
    """Assign disjoint train/validation/test indices covering every row.

    Sizes are floor(n*f_train) and floor(n*f_val), with the remainder as
    test, so the three sets always cover all n rows.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    if dataset.n < 4:
        raise ValueError("need at least 4 rows to split")
    rng = rng or np.random.default_rng()
    perm = rng.permutation(dataset.n)
    n_train = int(dataset.n * fractions[0])
    n_val = int(dataset.n * fractions[1])
    sp = Split(
        train=np.sort(perm[:n_train]),
        val=np.sort(perm[n_train : n_train + n_val]),
        test=np.sort(perm[n_train + n_val :]),
    )
    return replace(dataset, split=sp)


def standardize_y(dataset: Dataset) -> Dataset:
    """Rescale targets to train-mean 0 and train-std 1."""
    sp = dataset._need_split()
    mean = float(dataset.y[sp.train].mean())
    std = float(dataset.y[sp.train].std())
    if std == 0.0:
        raise ValueError("target has zero variance on the training rows")
    return replace(dataset, y=(dataset.y - mean) / std, y_stats=(mean, std))


def pca_fit_transform(dataset: Dataset) -> Dataset:
    """Rotate features onto the principal axes of the training rows.

    Keeps all d components (an orthonormal rotation, no rescaling), so the
    transform decorrelates the training features without losing information.
    """
    sp = dataset._need_split()
    mean = dataset.X[sp.train].mean(axis=0)
    centered = dataset.X[sp.train] - mean
    _, _, vt = np.linalg.svd(centered, full_matrices=True)
    components = vt.T  # (d, d)
    transformed = (dataset.X - mean) @ components
    return replace(
        dataset,
        X=transformed,
        feature_names=tuple(f"pc{i + 1}" for i in range(dataset.d)),
        pca=PcaState(mean=mean, components=components),
    )


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic dataset.

    ``n_relevant`` counts the generated features before irrelevant padding;
    the Friedman functions consume only their first 5 (F1) or 4 (F2/F3)
    features, while the linear and cluster relationships use all of them.
    """

    relationship: str = "linear"
    snr: float = 10.0
    n_relevant: int = 10
    pct_irrelevant: float = 0.10
    n_points: int = 1000
    seed: int = 0
    n_clusters: int = 10

    def __post_init__(self):
        if self.relationship not in RELATIONSHIPS:
            raise ValueError(f"relationship must be one of {RELATIONSHIPS}")
        if self.snr <= 0:
            raise ValueError("snr must be positive")
        if self.pct_irrelevant < 0:
            raise ValueError("pct_irrelevant must be nonnegative")
        if self.n_points < 1:
            raise ValueError("n_points must be positive")
        arity = {"friedman1": 5, "friedman2": 4, "friedman3": 4}.get(self.relationship, 1)
        if self.n_relevant < arity:
            raise ValueError(
                f"{self.relationship} needs at least {arity} relevant features, got {self.n_relevant}"
            )

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthSpec":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def to_json(self, path: str | Path) -> None:
        fields = {
            "relationship": self.relationship,
            "snr": self.snr,
            "n_relevant": self.n_relevant,
            "pct_irrelevant": self.pct_irrelevant,
            "n_points": self.n_points,
            "seed": self.seed,
            "n_clusters": self.n_clusters,
        }
        Path(path).write_text(json.dumps(fields, indent=2) + "\n", encoding="utf-8")


# The published "random" benchmark: 8 relevant + 2 irrelevant features,
# 1000 points.  Its noise level is calibrated so the held-out noise floor
# sits at the benchmark's reported least squares error (about 0.068 in
# standardized units): rmse = sqrt(1/(1+snr)).
PRESETS = {
    "random": SynthSpec(
        relationship="linear", snr=215.0, n_relevant=8, pct_irrelevant=0.25, n_points=1000, seed=0
    ),
}


def add_noise(y_clean: np.ndarray, snr: float, rng: np.random.Generator) -> np.ndarray:
    """Add N(0, var(y)/snr) noise; a constant signal gets zero noise."""
    if snr <= 0:
        raise ValueError("snr must be positive")
    var = float(np.var(y_clean))
    if var == 0.0:
        return y_clean.copy()
    return y_clean + rng.normal(0.0, math.sqrt(var / snr), size=y_clean.shape)


def add_irrelevant(X: np.ndarray, pct: float, rng: np.random.Generator) -> np.ndarray:
    """Append round(pct * d) standard-normal distractor columns."""
    if pct < 0:
        raise ValueError("pct must be nonnegative")
    extra = int(round(pct * X.shape[1]))
    if extra == 0:
        return X
    return np.hstack([X, rng.normal(size=(X.shape[0], extra))])


def friedman1(X: np.ndarray) -> np.ndarray:
    return (
        10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20.0 * (X[:, 2] - 0.5) ** 2
        + 10.0 * X[:, 3]
        + 5.0 * X[:, 4]
    )


def friedman2(X: np.ndarray) -> np.ndarray:
    return np.sqrt(X[:, 0] ** 2 + (X[:, 1] * X[:, 2] - 1.0 / (X[:, 1] * X[:, 3])) ** 2)


def friedman3(X: np.ndarray) -> np.ndarray:
    return np.arctan((X[:, 1] * X[:, 2] - 1.0 / (X[:, 1] * X[:, 3])) / X[:, 0])


def _gen_linear(spec: SynthSpec, rng: np.random.Generator):
    X = rng.normal(size=(spec.n_points, spec.n_relevant))
    beta = rng.normal(size=spec.n_relevant)
    return X, X @ beta


def assign_clusters(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index of the nearest center (Euclidean) for every row of X."""
    dist = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(dist, axis=1)


def _cluster_truth(spec: SynthSpec, rng: np.random.Generator):
    d = spec.n_relevant
    centers = rng.uniform(size=(spec.n_clusters, d))
    levels = rng.normal(size=spec.n_clusters)
    X = rng.uniform(size=(spec.n_points, d))
    return X, levels[assign_clusters(X, centers)]


def _gen_cluster(spec: SynthSpec, rng: np.random.Generator):
    return _cluster_truth(spec, rng)


def _gen_forest(spec: SynthSpec, rng: np.random.Generator):
    X, y_cluster = _cluster_truth(spec, rng)
    forest = RandomForestRegressor().fit(X, y_cluster, rng)
    return X, forest.predict(X)


def _gen_friedman(spec: SynthSpec, rng: np.random.Generator):
    n, d = spec.n_points, spec.n_relevant
    if spec.relationship == "friedman1":
        X = rng.uniform(size=(n, d))
        return X, friedman1(X)
    X = rng.uniform(size=(n, d))
    X[:, :4] = F23_LOW + X[:, :4] * (F23_HIGH - F23_LOW)
    fn = friedman2 if spec.relationship == "friedman2" else friedman3
    return X, fn(X)


_GENERATORS = {
    "linear": _gen_linear,
    "cluster": _gen_cluster,
    "forest": _gen_forest,
    "friedman1": _gen_friedman,
    "friedman2": _gen_friedman,
    "friedman3": _gen_friedman,
}


def generate(spec: SynthSpec) -> Dataset:
    """Build the synthetic dataset described by the spec (deterministic per seed)."""
    rng = np.random.default_rng(spec.seed)
    X, y_clean = _GENERATORS[spec.relationship](spec, rng)
    y = add_noise(y_clean, spec.snr, rng)
    X = add_irrelevant(X, spec.pct_irrelevant, rng)
    return Dataset(X, y, name=spec.relationship)
