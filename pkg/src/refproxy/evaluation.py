"""Accuracy-vs-size sweeps, bootstrap stability, local fidelity and paired intervals."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import tree as tr
from .data import REGRESSION, Dataset, SplitSpec, split
from .projection import NeighborhoodSpec, make_global_targets, make_local_targets, fit_tree
from .reference import EnsembleConfig, GpConfig, ReferenceModel, fit_reference


def derive_seed(master: int, *counters: int) -> int:
    """Child seed from a master seed and a counter path (stable across platforms)."""
    return int(np.random.SeedSequence([master, *counters]).generate_state(1)[0])


def _with_seed(ref_cfg, seed: int):
    if isinstance(ref_cfg, EnsembleConfig):
        return replace(ref_cfg, bootstrap_seed=seed)
    if isinstance(ref_cfg, GpConfig):
        return replace(ref_cfg, seed=seed)
    return ref_cfg


def _map(fn, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def rmse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape or p.size < 1:
        raise ValueError("predictions and targets must be non-empty and equal length")
    return float(np.sqrt(np.mean((p - t) ** 2)))


# ---------------------------------------------------------- dissimilarity


def tree_similarity_at_node(split1: tuple[int, float], split2: tuple[int, float], feature_ranges) -> float:
    """Similarity of two splits at the same position: 0 for different features,
    else one minus the pivot gap relative to the feature range, clipped to [0, 1]."""
    (k1, c1), (k2, c2) = split1, split2
    if k1 != k2:
        return 0.0
    lo, hi = np.asarray(feature_ranges, dtype=float)[k1]
    width = hi - lo
    if width <= 0:
        return 1.0 if c1 == c2 else 0.0
    return float(np.clip(1.0 - abs(c1 - c2) / width, 0.0, 1.0))


def tree_dissimilarity(t1: tr.ProxyTree, t2: tr.ProxyTree, feature_ranges, weighting: str = "internal") -> float:
    """One minus the weighted sum of per-node similarities over positions of ``t1``.

    Nodes are matched by their L/R path from the root; a position that is an
    internal node in only one tree contributes zero.  ``weighting="internal"``
    uses weight 1/(number of internal nodes of t1), so d(T, T) = 0;
    ``weighting="leaves"`` uses 1/(number of leaves of t1), under which
    d(T, T) = 1/b.  Two single-leaf trees have d = 0 if their leaf values
    agree and 1 otherwise; a single-leaf tree against a split tree has d = 1.
    """
    s1, s2 = t1.splits_by_path(), t2.splits_by_path()
    if not s1:
        return 0.0 if not s2 and np.array_equal(_root_value(t1), _root_value(t2)) else 1.0
    if weighting == "internal":
        q = 1.0 / len(s1)
    elif weighting == "leaves":
        q = 1.0 / t1.n_leaves
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    total = sum(tree_similarity_at_node(s, s2[p], feature_ranges) for p, s in s1.items() if p in s2)
    return float(1.0 - q * total)


def _root_value(t: tr.ProxyTree) -> np.ndarray:
    return np.atleast_1d(t.leaf_probs(0) if t.task != REGRESSION else t.nodes[0].value)


def symmetric_dissimilarity(t1, t2, feature_ranges, weighting: str = "internal") -> float:
    """Mean of both orientations (the per-tree normalisation makes d asymmetric)."""
    return 0.5 * (tree_dissimilarity(t1, t2, feature_ranges, weighting)
                  + tree_dissimilarity(t2, t1, feature_ranges, weighting))


# -------------------------------------------------------------- stability


@dataclass
class StabilityConfig:
    grow: tr.GrowConfig = field(default_factory=tr.GrowConfig)
    size: int | None = 10  # None selects the size by cross-validation
    reference: EnsembleConfig | GpConfig = field(default_factory=EnsembleConfig)
    reuse_reference: bool = False
    folds: int = 5
    weighting: str = "internal"


@dataclass
class StabilityResult:
    pairs: list[tuple[int, int]]
    pairwise_d: list[float]
    mean: float
    sd: float
    trees: list[tr.ProxyTree] = field(default_factory=list, repr=False)


def _bootstrap_tree(args):
    approach, ds, cfg, seed, b, shared_model = args
    idx = np.random.default_rng([seed, b]).integers(0, ds.n, size=ds.n)
    boot = ds.subset(idx)
    if approach == "prior":
        targets = tr.FitTargets.from_data(boot.features, boot.target, boot.task, boot.n_classes)
    elif approach == "utility":
        model = shared_model or fit_reference(boot, _with_seed(cfg.reference, derive_seed(seed, b)))
        targets = make_global_targets(model, boot)
    else:
        raise ValueError(f"unknown approach {approach!r}")
    tree, _, _ = fit_tree(targets, cfg.size, cfg.grow, cfg.folds, derive_seed(seed, b, 1), ds.feature_names)
    return tree


def stability(approach: str, ds: Dataset, cfg: StabilityConfig | None = None, B: int = 10, seed: int = 0,
              jobs: int = 1) -> StabilityResult:
    """Pairwise dissimilarity of proxies fit on ``B`` bootstrap resamples.

    ``approach="prior"`` fits the tree directly to the resampled data;
    ``"utility"`` projects a reference model refit on each resample (or a
    single shared reference when ``cfg.reuse_reference``).
    """
    cfg = cfg or StabilityConfig()
    if B < 2:
        raise ValueError("B must be >= 2")
    shared = None
    if approach == "utility" and cfg.reuse_reference:
        shared = fit_reference(ds, _with_seed(cfg.reference, seed))
    trees = _map(_bootstrap_tree, [(approach, ds, cfg, seed, b, shared) for b in range(B)], jobs)
    ranges = ds.feature_ranges
    pairs = [(i, j) for i in range(B) for j in range(i + 1, B)]
    d = [symmetric_dissimilarity(trees[i], trees[j], ranges, cfg.weighting) for i, j in pairs]
    return StabilityResult(pairs, d, float(np.mean(d)), float(np.std(d, ddof=1)) if len(d) > 1 else 0.0, trees)


# --------------------------------------------------------- local fidelity


def utility_local_fitter(model: ReferenceModel, size: int | None = None, cfg: tr.GrowConfig | None = None,
                         folds: int = 5) -> Callable:
    """Fitter returning the reference-projected local tree for a neighborhood."""
    cfg = cfg or tr.GrowConfig(max_depth=3)

    def fitter(nb: NeighborhoodSpec) -> tr.ProxyTree:
        targets = make_local_targets(model, nb)
        tree, _, _ = fit_tree(targets, size, cfg, folds, nb.seed)
        return tree

    return fitter


def direct_local_fitter(train: Dataset, size: int, cfg: tr.GrowConfig | None = None, k: int | None = None,
                        scale=None) -> Callable:
    """Fitter returning a tree grown on the raw training rows nearest the neighborhood center.

    Uses the ``k`` nearest rows (default: as many as the neighborhood has
    samples) in the metric scaled by ``scale``.
    """
    cfg = cfg or tr.GrowConfig(max_depth=3)
    scale = np.ones(train.d) if scale is None else np.asarray(scale, dtype=float)

    def fitter(nb: NeighborhoodSpec) -> tr.ProxyTree:
        kk = min(train.n, k or nb.S)
        dist = np.sum(((train.features - nb.center) / scale) ** 2, axis=1)
        near = np.sort(np.argsort(dist, kind="stable")[:kk])
        targets = tr.FitTargets.from_data(train.features[near], train.target[near], train.task, train.n_classes)
        tree, _ = tr.fit_size_constrained(targets, cfg, size)
        return tree

    return fitter


def _weighted_loss(model: ReferenceModel, tree: tr.ProxyTree, nb: NeighborhoodSpec, eval_seed: int) -> float:
    Z = nb.sample(model.feature_scale, seed=eval_seed)
    w = nb.density(Z, model.feature_scale)
    diff = tr.predict(tree, Z) - model.predict_summary(Z).means
    return float(np.sum(w * diff**2) / np.sum(w))


def local_fidelity_per_point(model: ReferenceModel, proxy_fitter: Callable, test_points,
                             nb_template: NeighborhoodSpec) -> np.ndarray:
    """Kernel-weighted squared loss between proxy and reference around each test point.

    The proxy is fit on one neighborhood draw and scored on an independent
    draw of the same size from the same neighborhood.
    """
    if model.task != REGRESSION:
        raise ValueError("local fidelity is defined for regression references")
    out = []
    for i, x in enumerate(np.atleast_2d(np.asarray(test_points, dtype=float))):
        nb = replace(nb_template, center=x, seed=derive_seed(nb_template.seed, i))
        out.append(_weighted_loss(model, proxy_fitter(nb), nb, derive_seed(nb_template.seed, i, 1)))
    return np.array(out)


def local_fidelity(model, proxy_fitter, test_points, nb_template) -> float:
    return float(local_fidelity_per_point(model, proxy_fitter, test_points, nb_template).mean())


@dataclass
class LocalFidelityComparison:
    utility: np.ndarray
    direct: np.ndarray
    sizes: np.ndarray
    n_features_used: np.ndarray


def compare_local_fidelity(model: ReferenceModel, train: Dataset, test_points, nb_template: NeighborhoodSpec,
                           size: int | None = None, cfg: tr.GrowConfig | None = None, folds: int = 5,
                           k: int | None = None) -> LocalFidelityComparison:
    """Utility local proxy vs a same-size tree fit to nearby raw training rows, per test point.

    With ``size=None`` the utility tree is CV-pruned and the direct tree
    takes the same leaf count.
    """
    cfg = cfg or tr.GrowConfig(max_depth=3)
    util_fit = utility_local_fitter(model, size, cfg, folds)
    util, direct, sizes, used = [], [], [], []
    for i, x in enumerate(np.atleast_2d(np.asarray(test_points, dtype=float))):
        nb = replace(nb_template, center=x, seed=derive_seed(nb_template.seed, i))
        eval_seed = derive_seed(nb_template.seed, i, 1)
        t_util = util_fit(nb)
        t_direct = direct_local_fitter(train, t_util.n_leaves, cfg, k, model.feature_scale)(nb)
        util.append(_weighted_loss(model, t_util, nb, eval_seed))
        direct.append(_weighted_loss(model, t_direct, nb, eval_seed))
        sizes.append(t_util.n_leaves)
        used.append(len(t_util.features_used()))
    return LocalFidelityComparison(np.array(util), np.array(direct), np.array(sizes), np.array(used))


# ------------------------------------------------------------------ sweep


@dataclass
class SweepResult:
    sizes: list[int]
    utility: np.ndarray  # runs x sizes test RMSE
    prior: np.ndarray  # runs x sizes test RMSE
    reference: np.ndarray  # runs
    seeds: list[int]

    @property
    def runs(self) -> int:
        return len(self.seeds)

    @staticmethod
    def _msd(a, axis=0):
        a = np.asarray(a, dtype=float)
        sd = a.std(axis=axis, ddof=1) if a.shape[axis] > 1 else np.zeros_like(a.mean(axis=axis))
        return a.mean(axis=axis), sd

    @property
    def rmse_utility(self):
        return self._msd(self.utility)

    @property
    def rmse_prior(self):
        return self._msd(self.prior)

    @property
    def rmse_reference(self):
        m, s = self._msd(self.reference)
        return float(m), float(s)

    def rows(self, level: float = 0.95, resamples: int = 2000, seed: int = 0) -> list[dict]:
        um, us = self.rmse_utility
        pm, ps = self.rmse_prior
        rm, rs = self.rmse_reference
        out = []
        for j, b in enumerate(self.sizes):
            row = {"size": b, "utility_mean": um[j], "utility_sd": us[j], "prior_mean": pm[j],
                   "prior_sd": ps[j], "reference_mean": rm, "reference_sd": rs, "runs": self.runs}
            if self.runs >= 2:
                diff, lo, hi = paired_bootstrap_ci(self.prior[:, j], self.utility[:, j], level, resamples, seed)
                row.update(diff_prior_minus_utility=diff, ci_lo=lo, ci_hi=hi, significant=bool(lo > 0 or hi < 0))
            out.append(row)
        return out


def _sweep_run(args):
    ds, ref_cfg, sizes, grow_cfg, train_fraction, run_seed = args
    train, test = split(ds, SplitSpec(train_fraction, run_seed), require_both=True)
    model = fit_reference(train, _with_seed(ref_cfg, run_seed))
    util_path = tr.prune_path(tr.grow(make_global_targets(model, train), grow_cfg))
    prior_path = tr.prune_path(tr.grow(tr.FitTargets.from_data(train.features, train.target), grow_cfg))
    u = [rmse(tr.predict(tr.pick_size(util_path, b)[0], test.features), test.target) for b in sizes]
    p = [rmse(tr.predict(tr.pick_size(prior_path, b)[0], test.features), test.target) for b in sizes]
    r = rmse(model.predict_summary(test.features).means, test.target)
    return u, p, r


def sweep(ds: Dataset, reference_cfg, sizes, runs: int = 20, seed: int = 0, grow_cfg: tr.GrowConfig | None = None,
          train_fraction: float = 0.75, jobs: int = 1) -> SweepResult:
    """Test RMSE of utility-projected and directly fit trees across tree sizes, over ``runs`` resplits."""
    if ds.task != REGRESSION:
        raise ValueError("sweep reports RMSE and needs a regression dataset")
    sizes = [int(b) for b in sizes]
    if not sizes or runs < 1:
        raise ValueError("need at least one size and one run")
    grow_cfg = grow_cfg or tr.GrowConfig()
    seeds = [derive_seed(seed, r) for r in range(runs)]
    res = _map(_sweep_run, [(ds, reference_cfg, sizes, grow_cfg, train_fraction, s) for s in seeds], jobs)
    return SweepResult(sizes, np.array([r[0] for r in res]), np.array([r[1] for r in res]),
                       np.array([r[2] for r in res]), seeds)


# ------------------------------------------------------------ significance


def paired_bootstrap_ci(a, b, level: float = 0.95, resamples: int = 2000, seed: int = 0) -> tuple[float, float, float]:
    """Percentile bootstrap interval for the mean of the paired differences ``a - b``.

    The interval is widened if needed so that it always contains the point estimate.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be equal-length vectors")
    if a.size < 2:
        raise ValueError("need at least two pairs")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    diff = a - b
    mean = float(diff.mean())
    idx = np.random.default_rng(seed).integers(0, diff.size, size=(resamples, diff.size))
    boot = diff[idx].mean(axis=1)
    lo, hi = np.quantile(boot, [(1 - level) / 2, (1 + level) / 2])
    return mean, float(min(lo, mean)), float(max(hi, mean))


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
