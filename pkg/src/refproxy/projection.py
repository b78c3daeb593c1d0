"""Project a fitted reference model onto interpretable proxies.

Global explanations fit the proxy to the reference's predictions at the
training inputs; local explanations fit it to predictions at Gaussian
samples around a query point.  Uncertainty explanations fit one linear or
logistic proxy per posterior draw and summarise the spread of their weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tree as tr
from .data import REGRESSION, Dataset
from .reference import ReferenceModel

RIDGE_FLOOR = 1e-8


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Isotropic Gaussian neighborhood ``center + sd * scale * N(0, I)``.

    ``scale`` defaults to the reference model's per-feature training
    standard deviation, so ``sd`` is in standardised feature units.
    """

    center: np.ndarray
    sd: float = 1.0
    S: int = 200
    seed: int = 0
    scale: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))
        if self.S < 1:
            raise ValueError("S must be >= 1")
        if not self.sd > 0:
            raise ValueError("sd must be positive")

    def sample(self, scale=None, seed=None) -> np.ndarray:
        scale = self.scale if self.scale is not None else (np.ones_like(self.center) if scale is None else scale)
        rng = np.random.default_rng(self.seed if seed is None else seed)
        eps = rng.standard_normal((self.S, self.center.size))
        return self.center + self.sd * np.asarray(scale, dtype=float) * eps

    def density(self, points, scale=None) -> np.ndarray:
        """Unnormalised Gaussian kernel weight of each point."""
        scale = self.scale if self.scale is not None else (np.ones_like(self.center) if scale is None else scale)
        u = (np.asarray(points, dtype=float) - self.center) / (self.sd * np.asarray(scale, dtype=float))
        return np.exp(-0.5 * np.sum(u * u, axis=1))


@dataclass
class LinearProxy:
    weights: np.ndarray
    intercept: float
    link: str = "identity"

    def predict(self, points) -> np.ndarray:
        eta = np.asarray(points, dtype=float) @ self.weights + self.intercept
        return eta if self.link == "identity" else 1.0 / (1.0 + np.exp(-eta))

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "intercept": self.intercept, "link": self.link}


@dataclass
class ExplanationReport:
    proxy: tr.ProxyTree | LinearProxy
    fidelity: float
    complexity: int
    target_kind: str  # "global" or "local"
    center: np.ndarray | None = None
    alpha: float | None = None
    size_exact: bool | None = None
    seeds: dict = field(default_factory=dict)
    reference_fingerprint: str | None = None

    @property
    def features_used(self) -> list[int]:
        if isinstance(self.proxy, tr.ProxyTree):
            return self.proxy.features_used()
        return [int(k) for k in np.flatnonzero(self.proxy.weights)]

    def to_dict(self) -> dict:
        proxy = tr.tree_to_dict(self.proxy) if isinstance(self.proxy, tr.ProxyTree) else self.proxy.to_dict()
        names = [self.proxy.feature_name(k) for k in self.features_used] if isinstance(self.proxy, tr.ProxyTree) else None
        out = {
            "target_kind": self.target_kind,
            "proxy": proxy,
            "fidelity": self.fidelity,
            "complexity": self.complexity,
            "features_used": self.features_used,
            "seeds": self.seeds,
            "reference_fingerprint": self.reference_fingerprint,
        }
        if names is not None:
            out["feature_names_used"] = names
        if self.center is not None:
            out["center"] = np.asarray(self.center).tolist()
        if self.alpha is not None:
            out["alpha"] = self.alpha
        if self.size_exact is not None:
            out["size_exact"] = self.size_exact
        return out


@dataclass
class UncertaintyExplanation:
    per_draw: list[LinearProxy]
    mean_weights: np.ndarray
    var_weights: np.ndarray


# ------------------------------------------------------------- targets


def make_global_targets(model: ReferenceModel, train: Dataset) -> tr.FitTargets:
    if train.n == 0:
        raise ValueError("empty training set")
    return tr.FitTargets.from_summary(train.features, model.predict_summary(train.features))


def make_local_targets(model: ReferenceModel, nb: NeighborhoodSpec) -> tr.FitTargets:
    if nb.center.size != model.n_features:
        raise ValueError(f"center has {nb.center.size} coordinates, model has {model.n_features} features")
    Z = nb.sample(model.feature_scale)
    return tr.FitTargets.from_summary(Z, model.predict_summary(Z))


# ------------------------------------------------------------- fitting


def fit_tree(targets: tr.FitTargets, size: int | None = None, cfg: tr.GrowConfig | None = None,
             folds: int = 5, seed: int = 0, feature_names=None):
    """Fixed-size proxy when ``size`` is given, otherwise CV-selected pruning.

    Returns ``(tree, alpha_or_None, size_exact_or_None)``.
    """
    if size is not None:
        tree, exact = tr.fit_size_constrained(targets, cfg, size, feature_names)
        return tree, None, exact
    alpha, tree = tr.select_alpha(targets, cfg, folds, seed, feature_names)
    return tree, alpha, None


def _fidelity(tree: tr.ProxyTree, model: ReferenceModel, points, weights=None) -> float:
    """Weighted squared error (regression) or disagreement rate (classification) vs the reference."""
    summ = model.predict_summary(points)
    pred = tr.predict(tree, points)
    if model.task == REGRESSION:
        loss = (pred - summ.means) ** 2
    else:
        loss = (np.argmax(pred, axis=1) != np.argmax(summ.class_probs, axis=1)).astype(float)
    if weights is None:
        return float(loss.mean())
    w = np.asarray(weights, dtype=float)
    return float(np.sum(w * loss) / np.sum(w))


def explain_global(model: ReferenceModel, train: Dataset, size: int | None = None,
                   cfg: tr.GrowConfig | None = None, folds: int = 5, seed: int = 0,
                   eval_points=None) -> ExplanationReport:
    """Global proxy fit to the reference's predictions at the training inputs.

    Fidelity is measured on ``eval_points`` if given, else on the fitting points.
    """
    targets = make_global_targets(model, train)
    tree, alpha, exact = fit_tree(targets, size, cfg, folds, seed, train.feature_names)
    points = train.features if eval_points is None else eval_points
    return ExplanationReport(tree, _fidelity(tree, model, points), tree.n_leaves, "global",
                             alpha=alpha, size_exact=exact, seeds={"cv": seed},
                             reference_fingerprint=_fingerprint(model))


def explain_local(model: ReferenceModel, nb: NeighborhoodSpec, size: int | None = None,
                  cfg: tr.GrowConfig | None = None, folds: int = 5, feature_names=None) -> ExplanationReport:
    """Local proxy fit to reference predictions on neighborhood samples around ``nb.center``.

    Fidelity is the kernel-weighted squared error on the fitting samples.
    """
    cfg = cfg or tr.GrowConfig(max_depth=3)
    targets = make_local_targets(model, nb)
    if size is None and targets.size < folds * cfg.min_leaf:
        size = 1
    tree, alpha, exact = fit_tree(targets, size, cfg, folds, nb.seed, feature_names)
    w = nb.density(targets.points, model.feature_scale)
    return ExplanationReport(tree, _fidelity(tree, model, targets.points, w), tree.n_leaves, "local",
                             center=nb.center, alpha=alpha, size_exact=exact,
                             seeds={"neighborhood": nb.seed, "cv": nb.seed},
                             reference_fingerprint=_fingerprint(model))


def _fingerprint(model: ReferenceModel) -> str | None:
    try:
        return model.fingerprint()
    except NotImplementedError:
        return None


# -------------------------------------------------- linear proxies per draw


def fit_least_squares(points, y) -> LinearProxy:
    Z = np.asarray(points, dtype=float)
    A = np.column_stack([np.ones(Z.shape[0]), Z])
    G = A.T @ A
    G[np.diag_indices_from(G)] += RIDGE_FLOOR
    beta = np.linalg.solve(G, A.T @ np.asarray(y, dtype=float))
    return LinearProxy(beta[1:], float(beta[0]), "identity")


def fit_logistic(points, p, max_iter: int = 100, tol: float = 1e-8) -> LinearProxy:
    """Logistic regression on soft targets ``p`` by damped IRLS (Newton with step halving)."""
    Z = np.asarray(points, dtype=float)
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    A = np.column_stack([np.ones(Z.shape[0]), Z])
    beta = np.zeros(A.shape[1])

    def objective(b):
        eta = A @ b
        return float(np.sum(np.logaddexp(0.0, eta) - p * eta) + 0.5 * RIDGE_FLOOR * b @ b)

    obj = objective(beta)
    for _ in range(max_iter):
        mu = 1.0 / (1.0 + np.exp(-(A @ beta)))
        grad = A.T @ (mu - p) + RIDGE_FLOOR * beta
        if np.linalg.norm(grad) < tol:
            break
        H = (A * (mu * (1 - mu))[:, None]).T @ A
        H[np.diag_indices_from(H)] += RIDGE_FLOOR
        step = np.linalg.solve(H, grad)
        t = 1.0
        while t > 1e-10:
            cand = beta - t * step
            new = objective(cand)
            if new <= obj:
                break
            t *= 0.5
        else:
            break
        beta, obj = cand, new
    return LinearProxy(beta[1:], float(beta[0]), "logistic")


def _shifted_moments(W: np.ndarray):
    """Elementwise mean/variance over rows, shifted by the first row.

    Identical rows give a variance of exactly zero.
    """
    D = W - W[0]
    m = D.mean(axis=0)
    return W[0] + m, np.mean((D - m) ** 2, axis=0)


def fit_linear_proxy_per_draw(model: ReferenceModel, points, L: int, link: str | None = None) -> UncertaintyExplanation:
    """One unpenalised linear (regression) or logistic (binary classification) proxy per posterior draw."""
    Z = np.asarray(points, dtype=float)
    link = link or ("identity" if model.task == REGRESSION else "logistic")
    draws = model.posterior_draws(L)
    proxies = []
    for draw in draws:
        out = np.asarray(draw(Z), dtype=float)
        if link == "identity":
            proxies.append(fit_least_squares(Z, out))
        else:
            if out.ndim == 2:
                if out.shape[1] != 2:
                    raise ValueError("logistic proxies need a binary reference")
                out = out[:, 1]
            proxies.append(fit_logistic(Z, out))
    W = np.array([p.weights for p in proxies])
    mean, var = _shifted_moments(W)
    return UncertaintyExplanation(proxies, mean, var)
