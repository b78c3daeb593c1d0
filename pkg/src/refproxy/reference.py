"""Reference predictive models behind one predictive-summary interface.

Three reference families are provided:

* ``GpReference``: exact GP regression (Matern-5/2 or RBF kernel) with
  grid-searched hyperparameters.
* ``EnsembleReference``: bagged maximum-likelihood trees.  Each tree acts as
  one posterior draw; predictive variance is the across-tree variance plus
  the mean in-leaf residual variance.
* ``DrawReference``: wraps user-supplied per-draw predictors (any posterior
  sampler, e.g. MC-dropout passes).
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular

from . import tree as tr
from .canonical import canonical_json
from .data import CLASSIFICATION, REGRESSION, Dataset

REFERENCE_VERSION = 1


class SingularKernelError(RuntimeError):
    pass


@dataclass(frozen=True)
class PredictiveSummary:
    means: np.ndarray | None = None
    variances: np.ndarray | None = None
    class_probs: np.ndarray | None = None

    def __post_init__(self):
        if self.class_probs is not None:
            P = np.atleast_2d(np.asarray(self.class_probs, dtype=float))
            if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, rtol=0, atol=1e-9):
                raise ValueError("class_probs rows must be non-negative and sum to 1")
            object.__setattr__(self, "class_probs", P)
        else:
            mu = np.asarray(self.means, dtype=float)
            var = np.asarray(self.variances, dtype=float)
            if mu.shape != var.shape or mu.ndim != 1:
                raise ValueError("means and variances must be equal-length vectors")
            if np.any(var < 0):
                raise ValueError("variances must be non-negative")
            object.__setattr__(self, "means", mu)
            object.__setattr__(self, "variances", var)

    @property
    def task(self) -> str:
        return CLASSIFICATION if self.class_probs is not None else REGRESSION

    def __len__(self) -> int:
        return len(self.class_probs if self.class_probs is not None else self.means)


@dataclass(frozen=True)
class PosteriorDraw:
    """One posterior draw as a point predictor (mean, or class-probability rows)."""

    index: int
    predictor: Callable[[np.ndarray], np.ndarray]

    def __call__(self, points) -> np.ndarray:
        return self.predictor(points)


class ReferenceModel:
    task: str = REGRESSION
    n_features: int
    n_classes: int = 0
    # Per-feature training standard deviation; scales local neighborhoods.
    feature_scale: np.ndarray

    def predict_summary(self, points) -> PredictiveSummary:
        raise NotImplementedError

    def posterior_draws(self, L: int) -> list[PosteriorDraw]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} is not serialisable")

    def fingerprint(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()

    def _check_points(self, points) -> np.ndarray:
        Z = np.asarray(points, dtype=float)
        if Z.ndim == 1:
            Z = Z[None, :]
        if Z.ndim != 2 or Z.shape[1] != self.n_features:
            raise ValueError(f"dimension mismatch: model has {self.n_features} features, got shape {Z.shape}")
        return Z


def _feature_scale(X: np.ndarray) -> np.ndarray:
    sd = X.std(axis=0) if X.shape[0] > 1 else np.ones(X.shape[1])
    return np.where(sd > 0, sd, 1.0)


# ------------------------------------------------------------------- GP


@dataclass
class GpConfig:
    """Hyperparameter grid for GP regression.

    Grids are relative: signal variance and noise are multiples of the
    target variance, lengthscales are multiples of the median pairwise
    distance between (standardised) training inputs.
    """

    kernel: str = "matern52"
    variance_grid: tuple[float, ...] = (0.1, 1.0, 10.0)
    lengthscale_grid: tuple[float, ...] = (0.1, 0.5, 1.0, 2.0)
    noise_grid: tuple[float, ...] = (1e-3, 1e-2, 1e-1)
    cv_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if min(*self.variance_grid, *self.lengthscale_grid, *self.noise_grid) <= 0:
            raise ValueError("grid entries must be positive")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")


def _matern52(r):
    s = np.sqrt(5.0) * r
    return (1.0 + s + s * s / 3.0) * np.exp(-s)


def _rbf(r):
    return np.exp(-0.5 * r * r)


KERNELS = {"matern52": _matern52, "rbf": _rbf}


def _sqdist(A, B):
    d2 = np.sum(A * A, 1)[:, None] + np.sum(B * B, 1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d2, 0.0)


def _chol_with_jitter(K: np.ndarray, scale: float):
    """Cholesky of K + jitter*I, escalating jitter from 1e-10 to 1e-4 (times scale)."""
    jitter = 1e-10 * scale
    eye = np.eye(K.shape[0])
    while jitter <= 1e-4 * scale * (1 + 1e-12):
        try:
            return cho_factor(K + jitter * eye, lower=True), jitter
        except LinAlgError:
            jitter *= 10.0
    raise SingularKernelError("kernel matrix is singular even with maximal jitter")


class GpReference(ReferenceModel):
    """Exact GP regression with fixed hyperparameters (in standardised units when ``standardize``)."""

    def __init__(self, X, y, kernel="matern52", variance=1.0, lengthscale=1.0, noise=1e-2,
                 standardize=True, draw_seed=0, cv_mse=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        self.X, self.y = X, y
        self.n_features = X.shape[1]
        self.kernel, self.variance, self.lengthscale, self.noise = kernel, float(variance), float(lengthscale), float(noise)
        self.standardize = standardize
        self.draw_seed = draw_seed
        self.cv_mse = cv_mse
        self.feature_scale = _feature_scale(X)
        if standardize:
            self.x_mean, self.x_std = X.mean(axis=0), self.feature_scale
            sd = y.std()
            self.y_mean, self.y_std = float(y.mean()), float(sd) if sd > 0 else 1.0
        else:
            self.x_mean, self.x_std = np.zeros(self.n_features), np.ones(self.n_features)
            self.y_mean, self.y_std = 0.0, 1.0
        self._Xs = self._scale_x(X)
        ys = (y - self.y_mean) / self.y_std
        K = self._k(self._Xs, self._Xs) + self.noise * np.eye(len(y))
        self._chol, self.jitter = _chol_with_jitter(K, self.variance)
        self._alpha = cho_solve(self._chol, ys)

    def _scale_x(self, Z):
        return (Z - self.x_mean) / self.x_std

    def _k(self, A, B):
        return self.variance * KERNELS[self.kernel](np.sqrt(_sqdist(A, B)) / self.lengthscale)

    def _latent(self, Z, full_cov=False):
        Zs = self._scale_x(Z)
        Ks = self._k(Zs, self._Xs)
        mean = Ks @ self._alpha
        V = solve_triangular(self._chol[0], Ks.T, lower=True)
        if full_cov:
            cov = self._k(Zs, Zs) - V.T @ V
            return mean, cov
        var = np.maximum(self.variance - np.sum(V * V, axis=0), 0.0)
        return mean, var

    def predict_summary(self, points) -> PredictiveSummary:
        Z = self._check_points(points)
        mean, var = self._latent(Z)
        return PredictiveSummary(mean * self.y_std + self.y_mean, (var + self.noise) * self.y_std**2)

    def posterior_draws(self, L: int) -> list[PosteriorDraw]:
        """Latent function draws, sampled jointly at whatever points each call asks for.

        A draw is reproducible for a given point set: the same ``(draw_seed,
        index, points)`` always gives the same values.
        """
        if L < 1:
            raise ValueError("L must be >= 1")
        return [PosteriorDraw(l, self._draw_fn(l)) for l in range(L)]

    def _draw_fn(self, l):
        def predictor(points):
            Z = self._check_points(points)
            mean, cov = self._latent(Z, full_cov=True)
            evals, evecs = np.linalg.eigh(0.5 * (cov + cov.T))
            rng = np.random.default_rng([self.draw_seed, l])
            f = mean + evecs @ (np.sqrt(np.maximum(evals, 0.0)) * rng.standard_normal(len(mean)))
            return f * self.y_std + self.y_mean
        return predictor

    def to_dict(self) -> dict:
        return {
            "schema": "refproxy.reference", "version": REFERENCE_VERSION, "kind": "gp",
            "task": REGRESSION, "kernel": self.kernel, "variance": self.variance,
            "lengthscale": self.lengthscale, "noise": self.noise, "standardize": self.standardize,
            "draw_seed": self.draw_seed, "cv_mse": self.cv_mse,
            "X": self.X.tolist(), "y": self.y.tolist(),
        }


def _kfold(n, k, seed):
    return np.array_split(np.random.default_rng(seed).permutation(n), k)


def fit_gp(train: Dataset, cfg: GpConfig | None = None) -> GpReference:
    """GP regression with hyperparameters picked by k-fold CV (held-out MSE) over the grid."""
    cfg = cfg or GpConfig()
    if train.task != REGRESSION:
        raise ValueError("GP reference supports regression only")
    X, y = train.features, train.target
    N = X.shape[0]
    if N < cfg.cv_folds:
        raise ValueError(f"{N} training points is fewer than cv_folds={cfg.cv_folds}")
    scale = _feature_scale(X)
    Xs = (X - X.mean(axis=0)) / scale
    ys = (y - y.mean()) / (y.std() if y.std() > 0 else 1.0)
    D = np.sqrt(_sqdist(Xs, Xs))
    iu = np.triu_indices(N, 1)
    med = float(np.median(D[iu])) if iu[0].size else 1.0
    med = med if med > 0 else 1.0
    kfun = KERNELS[cfg.kernel]
    folds = _kfold(N, cfg.cv_folds, cfg.seed)
    best, best_mse = None, np.inf
    for v, l, s in itertools.product(cfg.variance_grid, cfg.lengthscale_grid, cfg.noise_grid):
        Kfull = v * kfun(D / (l * med))
        sse = 0.0
        for hold in folds:
            keep = np.setdiff1d(np.arange(N), hold)
            K = Kfull[np.ix_(keep, keep)] + s * np.eye(keep.size)
            try:
                chol, _ = _chol_with_jitter(K, v)
            except SingularKernelError:
                sse = np.inf
                break
            pred = Kfull[np.ix_(hold, keep)] @ cho_solve(chol, ys[keep])
            sse += float(np.sum((pred - ys[hold]) ** 2))
        mse = sse / N
        if mse < best_mse:
            best, best_mse = (v, l * med, s), mse
    if best is None:
        raise SingularKernelError("no grid cell gave a usable kernel matrix")
    v, ell, s = best
    return GpReference(X, y, cfg.kernel, v, ell, s, standardize=True, draw_seed=cfg.seed,
                       cv_mse=best_mse * (y.std() ** 2 if y.std() > 0 else 1.0))


# ------------------------------------------------------------- ensemble


@dataclass
class EnsembleConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 5
    bootstrap_seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.min_leaf < 1 or (self.max_depth is not None and self.max_depth < 1):
            raise ValueError("n_trees, min_leaf and max_depth must be >= 1")


class EnsembleReference(ReferenceModel):
    def __init__(self, trees: list[tr.ProxyTree], task: str, n_features: int, feature_scale,
                 n_classes: int = 0):
        self.trees = trees
        self.task = task
        self.n_features = n_features
        self.n_classes = n_classes
        self.feature_scale = np.asarray(feature_scale, dtype=float)
        self._tables = [self._leaf_table(t) for t in trees]

    def _leaf_table(self, t: tr.ProxyTree):
        if self.task == REGRESSION:
            mu = np.array([nd.value for nd in t.nodes], dtype=float)
            var = np.array([nd.loss / nd.n for nd in t.nodes], dtype=float)
            return mu, var
        probs = np.zeros((len(t.nodes), self.n_classes))
        for i in t.leaves():
            probs[i] = t.leaf_probs(i)
        return probs, None

    def _tree_predict(self, j, Z):
        leaf = tr.apply(self.trees[j], Z)
        value, var = self._tables[j]
        return value[leaf], (None if var is None else var[leaf])

    def predict_summary(self, points) -> PredictiveSummary:
        Z = self._check_points(points)
        outs = [self._tree_predict(j, Z) for j in range(len(self.trees))]
        if self.task == REGRESSION:
            P = np.array([o[0] for o in outs])
            V = np.array([o[1] for o in outs])
            return PredictiveSummary(P.mean(axis=0), P.var(axis=0) + V.mean(axis=0))
        probs = np.mean([o[0] for o in outs], axis=0)
        return PredictiveSummary(class_probs=probs / probs.sum(axis=1, keepdims=True))

    def posterior_draws(self, L: int) -> list[PosteriorDraw]:
        if not 1 <= L <= len(self.trees):
            raise ValueError(f"ensemble has {len(self.trees)} draws, asked for {L}")
        return [PosteriorDraw(j, self._draw_fn(j)) for j in range(L)]

    def _draw_fn(self, j):
        def predictor(points):
            return self._tree_predict(j, self._check_points(points))[0]
        return predictor

    def to_dict(self) -> dict:
        return {
            "schema": "refproxy.reference", "version": REFERENCE_VERSION, "kind": "ensemble",
            "task": self.task, "n_features": self.n_features, "n_classes": self.n_classes,
            "feature_scale": self.feature_scale.tolist(),
            "trees": [tr.tree_to_dict(t) for t in self.trees],
        }


def fit_ensemble(train: Dataset, cfg: EnsembleConfig | None = None) -> EnsembleReference:
    """Bagged trees, each grown on its own bootstrap resample of the training rows."""
    cfg = cfg or EnsembleConfig()
    X, N = train.features, train.n
    if N < 2 * cfg.min_leaf:
        raise ValueError(f"{N} rows is fewer than 2*min_leaf={2 * cfg.min_leaf}")
    grow_cfg = tr.GrowConfig(min_leaf=cfg.min_leaf, max_depth=cfg.max_depth)
    trees = []
    for j in range(cfg.n_trees):
        idx = np.random.default_rng([cfg.bootstrap_seed, j]).integers(0, N, size=N)
        targets = tr.FitTargets.from_data(X[idx], train.target[idx], train.task, train.n_classes)
        trees.append(tr.grow(targets, grow_cfg, train.feature_names))
    return EnsembleReference(trees, train.task, train.d, _feature_scale(X), train.n_classes)


# ------------------------------------------------------ pluggable draws


class DrawReference(ReferenceModel):
    """Reference defined by a list of per-draw predictors.

    Regression predictors return means; the predictive variance is the
    across-draw variance plus ``noise_var``.  Classification predictors
    return class-probability rows.
    """

    def __init__(self, predictors, n_features: int, task: str = REGRESSION, noise_var: float = 0.0,
                 n_classes: int = 0, feature_scale=None):
        if not predictors:
            raise ValueError("need at least one draw")
        self.predictors = list(predictors)
        self.n_features = n_features
        self.task = task
        self.noise_var = float(noise_var)
        self.n_classes = n_classes
        self.feature_scale = np.ones(n_features) if feature_scale is None else np.asarray(feature_scale, float)

    def predict_summary(self, points) -> PredictiveSummary:
        Z = self._check_points(points)
        P = np.array([f(Z) for f in self.predictors], dtype=float)
        if self.task == REGRESSION:
            return PredictiveSummary(P.mean(axis=0), P.var(axis=0) + self.noise_var)
        probs = P.mean(axis=0)
        return PredictiveSummary(class_probs=probs / probs.sum(axis=1, keepdims=True))

    def posterior_draws(self, L: int) -> list[PosteriorDraw]:
        if not 1 <= L <= len(self.predictors):
            raise ValueError(f"{len(self.predictors)} draws available, asked for {L}")
        return [PosteriorDraw(l, lambda Z, f=f: f(self._check_points(Z))) for l, f in enumerate(self.predictors[:L])]


# ------------------------------------------------------------ dispatch


def fit_reference(train: Dataset, cfg) -> ReferenceModel:
    if isinstance(cfg, GpConfig):
        return fit_gp(train, cfg)
    if isinstance(cfg, EnsembleConfig):
        return fit_ensemble(train, cfg)
    raise TypeError(f"unknown reference config {type(cfg).__name__}")


def predict_summary(model: ReferenceModel, points) -> PredictiveSummary:
    return model.predict_summary(points)


def posterior_draws(model: ReferenceModel, L: int) -> list[PosteriorDraw]:
    return model.posterior_draws(L)


def reference_from_dict(d: dict) -> ReferenceModel:
    if d.get("schema") != "refproxy.reference" or d.get("version") != REFERENCE_VERSION:
        raise ValueError("not a supported reference-model document")
    if d["kind"] == "gp":
        return GpReference(np.array(d["X"], dtype=float), np.array(d["y"], dtype=float), d["kernel"],
                           d["variance"], d["lengthscale"], d["noise"], d["standardize"],
                           d["draw_seed"], d.get("cv_mse"))
    if d["kind"] == "ensemble":
        trees = [tr.tree_from_dict(t) for t in d["trees"]]
        return EnsembleReference(trees, d["task"], d["n_features"], d["feature_scale"], d["n_classes"])
    raise ValueError(f"unknown reference kind {d['kind']!r}")
