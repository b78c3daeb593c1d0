"""Maximum-likelihood decision trees used as interpretable proxies.

Regression trees use a mean-shift Gaussian leaf model with a single variance
shared by all leaves.  Each fitting point carries the reference model's
predictive mean and variance, so the fitted variance absorbs the reference
uncertainty.  Classification trees use a multinomial leaf model on hard labels.

Trees are grown greedily (exhaustive search over features and midpoints,
depth-first, left child first) and then pruned by weakest-link
cost-complexity pruning with the cost ``log(sigma2) + alpha * leaves``
(regression) or ``deviance / S + alpha * leaves`` (classification).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import xlogy

REGRESSION = "regression"
CLASSIFICATION = "classification"

# Floor applied to the pooled variance inside log costs.
VAR_FLOOR = 1e-12
# A split must reduce the node loss by more than this fraction of it.
MIN_REL_GAIN = 1e-10
# Candidate splits within this relative distance of the best are ties.
TIE_REL_TOL = 1e-9

SCHEMA_VERSION = 1


@dataclass
class GrowConfig:
    min_leaf: int = 5
    max_depth: int | None = None

    def __post_init__(self):
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")


@dataclass(frozen=True)
class FitTargets:
    """Points the proxy is fit to, with what the reference predicts there.

    Regression: ``means`` and ``variances`` of the reference predictive
    distribution.  Classification: hard ``labels`` (0-based class indices).
    """

    points: np.ndarray
    means: np.ndarray | None = None
    variances: np.ndarray | None = None
    labels: np.ndarray | None = None
    n_classes: int = 0

    def __post_init__(self):
        Z = np.asarray(self.points, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        object.__setattr__(self, "points", Z)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=int)
            if lab.shape != (Z.shape[0],):
                raise ValueError("labels do not match the number of points")
            if self.n_classes < 2:
                raise ValueError("classification targets need n_classes >= 2")
            if lab.size and (lab.min() < 0 or lab.max() >= self.n_classes):
                raise ValueError("labels out of range")
            object.__setattr__(self, "labels", lab)
        else:
            if self.means is None:
                raise ValueError("regression targets need means")
            mu = np.asarray(self.means, dtype=float)
            var = np.zeros_like(mu) if self.variances is None else np.asarray(self.variances, dtype=float)
            if mu.shape != (Z.shape[0],) or var.shape != mu.shape:
                raise ValueError("means/variances do not match the number of points")
            if np.any(var < 0):
                raise ValueError("variances must be non-negative")
            object.__setattr__(self, "means", mu)
            object.__setattr__(self, "variances", var)

    @property
    def task(self) -> str:
        return CLASSIFICATION if self.labels is not None else REGRESSION

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def subset(self, idx) -> "FitTargets":
        idx = np.asarray(idx)
        if self.task == CLASSIFICATION:
            return FitTargets(self.points[idx], labels=self.labels[idx], n_classes=self.n_classes)
        return FitTargets(self.points[idx], self.means[idx], self.variances[idx])

    @classmethod
    def from_summary(cls, points, summary) -> "FitTargets":
        """Targets from a predictive summary (anything with means/variances or class_probs)."""
        if getattr(summary, "class_probs", None) is not None:
            probs = np.asarray(summary.class_probs)
            return cls(points, labels=np.argmax(probs, axis=1), n_classes=probs.shape[1])
        return cls(points, summary.means, summary.variances)

    @classmethod
    def from_data(cls, features, target, task=REGRESSION, n_classes=0) -> "FitTargets":
        """Raw training data as targets (zero reference variance, 1-based labels)."""
        if task == CLASSIFICATION:
            return cls(features, labels=np.asarray(target, dtype=int) - 1, n_classes=n_classes)
        return cls(features, np.asarray(target, dtype=float))


@dataclass
class Node:
    n: int
    value: float | np.ndarray  # leaf mean, or class counts
    loss: float  # sum of [var + (mean - mu)^2], or multinomial deviance
    feature: int = -1
    pivot: float = float("nan")
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.left < 0


@dataclass
class ProxyTree:
    task: str
    nodes: list[Node]
    n_features: int
    n_samples: int
    sigma2: float | None = None
    n_classes: int = 0
    feature_names: tuple[str, ...] | None = None

    @property
    def n_leaves(self) -> int:
        return sum(1 for nd in self.nodes if nd.is_leaf)

    b = n_leaves

    @property
    def n_internal(self) -> int:
        return len(self.nodes) - self.n_leaves

    def leaves(self) -> list[int]:
        return [i for i, nd in enumerate(self.nodes) if nd.is_leaf]

    def features_used(self) -> list[int]:
        return sorted({nd.feature for nd in self.nodes if not nd.is_leaf})

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            i, dep = stack.pop()
            best = max(best, dep)
            nd = self.nodes[i]
            if not nd.is_leaf:
                stack += [(nd.left, dep + 1), (nd.right, dep + 1)]
        return best

    def leaf_probs(self, i: int) -> np.ndarray:
        counts = np.asarray(self.nodes[i].value, dtype=float)
        return counts / counts.sum()

    def splits_by_path(self) -> dict[str, tuple[int, float]]:
        """Internal nodes keyed by their L/R path from the root."""
        out, stack = {}, [(0, "")]
        while stack:
            i, path = stack.pop()
            nd = self.nodes[i]
            if not nd.is_leaf:
                out[path] = (nd.feature, nd.pivot)
                stack += [(nd.left, path + "L"), (nd.right, path + "R")]
        return out

    def feature_name(self, k: int) -> str:
        return self.feature_names[k] if self.feature_names else f"x{k}"


class NodeScore(NamedTuple):
    estimate: float | np.ndarray  # mu_hat, or class probabilities
    variance: float  # node-local variance (regression), nan for classification
    score: float  # node log-likelihood score up to a constant


class Split(NamedTuple):
    feature: int
    pivot: float
    gain: float


def node_score_regression(means, variances) -> NodeScore:
    """ML mean of a node and its score ``-n log(sigma2_node)``."""
    y = np.asarray(means, dtype=float)
    v = np.asarray(variances, dtype=float)
    n = y.size
    if n < 1:
        raise ValueError("empty node")
    mu = y.mean()
    var = (v.sum() + np.sum((y - mu) ** 2)) / n
    return NodeScore(mu, var, -n * np.log(max(var, VAR_FLOOR)))


def node_score_classification(labels, n_classes: int) -> NodeScore:
    """Class frequencies of a node and its score ``sum_k n_k log(n_k / n)``."""
    lab = np.asarray(labels, dtype=int)
    if lab.size < 1:
        raise ValueError("empty node")
    counts = np.bincount(lab, minlength=n_classes).astype(float)
    return NodeScore(counts / lab.size, float("nan"), float(np.sum(xlogy(counts, counts / lab.size))))


def _pick_first(candidates: np.ndarray) -> tuple[int, int]:
    """Lowest feature, then smallest pivot, among candidate (position, feature) cells."""
    feats = np.flatnonzero(candidates.any(axis=0))
    k = int(feats[0])
    i = int(np.flatnonzero(candidates[:, k])[0])
    return i, k


def _midpoint(lo: float, hi: float) -> float:
    c = 0.5 * (lo + hi)
    return lo if c >= hi else c


def best_split(targets: FitTargets, cfg: GrowConfig) -> Split | None:
    """Exhaustive search for the split of a node that maximises the likelihood gain.

    Candidate pivots are midpoints between consecutive distinct values of each
    feature; both children must hold at least ``cfg.min_leaf`` points.
    Returns None when no admissible split increases the likelihood.
    """
    n = targets.size
    m = cfg.min_leaf
    if n < 2 * m or n < 2:
        return None
    X = targets.points
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    n_left = np.arange(1, n)[:, None]
    valid = (xs[1:] > xs[:-1]) & (n_left >= m) & (n - n_left >= m)
    if not valid.any():
        return None
    if targets.task == REGRESSION:
        return _best_split_regression(targets, order, xs, n_left, valid)
    return _best_split_classification(targets, order, xs, n_left, valid)


def _best_split_regression(targets, order, xs, n_left, valid) -> Split | None:
    y = targets.means
    n = y.size
    if np.ptp(y) == 0:
        return None
    yc = y - y.mean()
    sse_parent = float(yc @ yc)
    ys = yc[order]
    cs = np.cumsum(ys, axis=0)
    cq = np.cumsum(ys * ys, axis=0)
    sl, ql = cs[:-1], cq[:-1]
    sr, qr = cs[-1] - sl, cq[-1] - ql
    sse = np.maximum(ql - sl**2 / n_left, 0.0) + np.maximum(qr - sr**2 / (n - n_left), 0.0)
    sse = np.where(valid, sse, np.inf)
    best = sse.min()
    w_parent = targets.variances.sum() + sse_parent
    if not np.isfinite(best) or sse_parent - best <= MIN_REL_GAIN * w_parent:
        return None
    i, k = _pick_first(sse <= best + TIE_REL_TOL * sse_parent)
    w_children = w_parent - sse_parent + sse[i, k]
    gain = np.inf if w_children <= 0 else n * (np.log(w_parent) - np.log(w_children))
    return Split(k, _midpoint(xs[i, k], xs[i + 1, k]), float(gain))


def _best_split_classification(targets, order, xs, n_left, valid) -> Split | None:
    lab = targets.labels
    n, K = lab.size, targets.n_classes
    onehot = np.eye(K)[lab]
    counts = onehot.sum(axis=0)
    parent = float(np.sum(xlogy(counts, counts)) - xlogy(n, n))
    cl = np.cumsum(onehot[order], axis=0)[:-1]  # (n-1, d, K)
    cr = counts - cl
    nl = n_left.astype(float)
    score = (xlogy(cl, cl).sum(axis=2) - xlogy(nl, nl)) + (xlogy(cr, cr).sum(axis=2) - xlogy(n - nl, n - nl))
    gain = np.where(valid, score - parent, -np.inf)
    best = gain.max()
    if not np.isfinite(best) or best <= MIN_REL_GAIN * n:
        return None
    i, k = _pick_first(gain >= best - TIE_REL_TOL * max(1.0, abs(parent)))
    return Split(k, _midpoint(xs[i, k], xs[i + 1, k]), float(gain[i, k]))


def _make_node(targets: FitTargets, idx: np.ndarray) -> Node:
    if targets.task == REGRESSION:
        y = targets.means[idx]
        mu = float(y.mean())
        loss = float(targets.variances[idx].sum() + np.sum((y - mu) ** 2))
        return Node(idx.size, mu, loss)
    counts = np.bincount(targets.labels[idx], minlength=targets.n_classes).astype(float)
    loss = float(-np.sum(xlogy(counts, counts / idx.size)))
    return Node(idx.size, counts, loss)


def grow(targets: FitTargets, cfg: GrowConfig | None = None, feature_names=None) -> ProxyTree:
    """Grow a tree greedily until no node admits a likelihood-increasing split."""
    cfg = cfg or GrowConfig()
    S = targets.size
    if S == 0:
        raise ValueError("cannot grow a tree on empty targets")
    nodes: list[Node] = []
    stack = [(np.arange(S), 0, -1, "")]
    while stack:
        idx, depth, parent, side = stack.pop()
        node = _make_node(targets, idx)
        nid = len(nodes)
        nodes.append(node)
        if parent >= 0:
            setattr(nodes[parent], side, nid)
        if cfg.max_depth is not None and depth >= cfg.max_depth:
            continue
        sp = best_split(targets.subset(idx), cfg)
        if sp is None:
            continue
        node.feature, node.pivot = sp.feature, sp.pivot
        go_left = targets.points[idx, sp.feature] <= sp.pivot
        stack.append((idx[~go_left], depth + 1, nid, "right"))
        stack.append((idx[go_left], depth + 1, nid, "left"))
    return _finish(targets.task, nodes, targets.points.shape[1], S, targets.n_classes, feature_names)


def _finish(task, nodes, n_features, S, n_classes, feature_names) -> ProxyTree:
    sigma2 = None
    if task == REGRESSION:
        sigma2 = sum(nd.loss for nd in nodes if nd.is_leaf) / S
    names = tuple(feature_names) if feature_names is not None else None
    return ProxyTree(task, nodes, n_features, S, sigma2, n_classes, names)


def grow_classification(targets: FitTargets, cfg: GrowConfig | None = None, feature_names=None) -> ProxyTree:
    if targets.task != CLASSIFICATION:
        raise ValueError("grow_classification needs label targets")
    return grow(targets, cfg, feature_names)


def apply(tree: ProxyTree, points) -> np.ndarray:
    """Leaf index reached by each point (left iff x[feature] <= pivot)."""
    Z = _check_points(tree, points)
    feat = np.array([nd.feature for nd in tree.nodes])
    piv = np.array([nd.pivot for nd in tree.nodes])
    left = np.array([nd.left for nd in tree.nodes])
    right = np.array([nd.right for nd in tree.nodes])
    at = np.zeros(Z.shape[0], dtype=int)
    active = left[at] >= 0
    while active.any():
        rows = np.flatnonzero(active)
        cur = at[rows]
        go_left = Z[rows, feat[cur]] <= piv[cur]
        at[rows] = np.where(go_left, left[cur], right[cur])
        active = left[at] >= 0
    return at


def _check_points(tree: ProxyTree, points) -> np.ndarray:
    Z = np.asarray(points, dtype=float)
    if Z.ndim == 1:
        Z = Z[None, :] if tree.n_features > 1 or Z.size == 1 else Z[:, None]
    if Z.ndim != 2 or Z.shape[1] != tree.n_features:
        raise ValueError(f"dimension mismatch: tree has {tree.n_features} features, got shape {Z.shape}")
    return Z


def predict(tree: ProxyTree, points) -> np.ndarray:
    """Leaf mean per point (regression) or leaf class-probability rows."""
    leaf = apply(tree, points)
    if tree.task == REGRESSION:
        return np.array([nd.value for nd in tree.nodes], dtype=float)[leaf]
    table = np.zeros((len(tree.nodes), tree.n_classes))
    for i in tree.leaves():
        table[i] = tree.leaf_probs(i)
    return table[leaf]


def log_likelihood(tree: ProxyTree, targets: FitTargets) -> float:
    """Expected log-likelihood of the targets under the tree.

    Regression uses the reference variances:
    ``-(S/2) log(2 pi s2) - sum[var + (mean - mu)^2] / (2 s2)``.
    """
    leaf = apply(tree, targets.points)
    if tree.task == REGRESSION:
        s2 = tree.sigma2
        mu = np.array([nd.value for nd in tree.nodes], dtype=float)[leaf]
        resid = np.sum(targets.variances + (targets.means - mu) ** 2)
        S = targets.size
        if s2 <= 0:
            return float("inf") if resid == 0 else float("-inf")
        return float(-0.5 * S * np.log(2 * np.pi * s2) - resid / (2 * s2))
    probs = predict(tree, targets.points)
    return float(np.sum(np.log(probs[np.arange(targets.size), targets.labels])))


# ---------------------------------------------------------------- pruning


@dataclass
class PruneSequence:
    subtrees: list[ProxyTree]
    alphas: list[float]

    def __len__(self):
        return len(self.subtrees)

    def at_alpha(self, alpha: float) -> ProxyTree:
        """Smallest subtree on the path whose alpha does not exceed ``alpha``."""
        j = 0
        for i, a in enumerate(self.alphas):
            if a <= alpha:
                j = i
        return self.subtrees[j]

    def sizes(self) -> list[int]:
        return [t.n_leaves for t in self.subtrees]


def _cost(task: str, total_loss: float, S: int) -> float:
    if task == REGRESSION:
        return float(np.log(max(total_loss / S, VAR_FLOOR)))
    return total_loss / S


def _subtree_stats(tree: ProxyTree, collapsed: set[int]):
    """Per-node (leaf count, leaf loss sum) in the tree with ``collapsed`` nodes as leaves.

    Relies on nodes being stored in pre-order, so children follow their parent.
    """
    nodes = tree.nodes
    reach = np.zeros(len(nodes), dtype=bool)
    reach[0] = True
    for i, nd in enumerate(nodes):
        if reach[i] and not nd.is_leaf and i not in collapsed:
            reach[nd.left] = reach[nd.right] = True
    n_leaves, loss = {}, {}
    for i in range(len(nodes) - 1, -1, -1):
        if not reach[i]:
            continue
        nd = nodes[i]
        if nd.is_leaf or i in collapsed:
            n_leaves[i], loss[i] = 1, nd.loss
        else:
            n_leaves[i] = n_leaves[nd.left] + n_leaves[nd.right]
            loss[i] = loss[nd.left] + loss[nd.right]
    return n_leaves, loss


def _materialize(tree: ProxyTree, collapsed: set[int]) -> ProxyTree:
    nodes: list[Node] = []
    stack = [(0, -1, "")]
    while stack:
        i, parent, side = stack.pop()
        src = tree.nodes[i]
        nd = copy.copy(src)
        if isinstance(nd.value, np.ndarray):
            nd.value = nd.value.copy()
        nid = len(nodes)
        nodes.append(nd)
        if parent >= 0:
            setattr(nodes[parent], side, nid)
        if src.is_leaf or i in collapsed:
            nd.feature, nd.pivot, nd.left, nd.right = -1, float("nan"), -1, -1
        else:
            stack.append((src.right, nid, "right"))
            stack.append((src.left, nid, "left"))
    return _finish(tree.task, nodes, tree.n_features, tree.n_samples, tree.n_classes, tree.feature_names)


def prune_path(tree: ProxyTree) -> PruneSequence:
    """Weakest-link pruning from ``tree`` down to the root-only tree.

    Each step collapses the internal node with the smallest per-leaf cost
    increase.  The log cost is not additive over leaves, so a later weakest
    link can be cheaper than an earlier one; the recorded alpha is the running
    maximum, meaning such a collapse happens at the same alpha as the previous one.
    """
    collapsed: set[int] = set()
    subtrees, alphas = [tree], [0.0]
    S = tree.n_samples
    while True:
        n_leaves, loss = _subtree_stats(tree, collapsed)
        internal = sorted(i for i, c in n_leaves.items() if c > 1)
        if not internal:
            break
        total = loss[0]
        base = _cost(tree.task, total, S)
        best_i, best_a = -1, np.inf
        for i in internal:
            a = (_cost(tree.task, total - loss[i] + tree.nodes[i].loss, S) - base) / (n_leaves[i] - 1)
            if a < best_a:
                best_i, best_a = i, a
        collapsed.add(best_i)
        subtrees.append(_materialize(tree, collapsed))
        alphas.append(max(alphas[-1], float(best_a)))
    return PruneSequence(subtrees, alphas)


def is_subtree(small: ProxyTree, big: ProxyTree) -> bool:
    """True if ``small`` is ``big`` with some internal nodes collapsed to leaves."""
    a, b = small.splits_by_path(), big.splits_by_path()
    return all(p in b and b[p][0] == s[0] and b[p][1] == s[1] for p, s in a.items())


# ------------------------------------------------------- model selection


def heldout_nll(tree: ProxyTree, targets: FitTargets) -> float:
    """Mean negative expected log-likelihood of held-out targets.

    Classification scores use add-one smoothed leaf frequencies so that an
    unseen class in a leaf gives a finite penalty.
    """
    leaf = apply(tree, targets.points)
    if tree.task == REGRESSION:
        s2 = max(tree.sigma2, VAR_FLOOR)
        mu = np.array([nd.value for nd in tree.nodes], dtype=float)[leaf]
        per = 0.5 * np.log(2 * np.pi * s2) + (targets.variances + (targets.means - mu) ** 2) / (2 * s2)
        return float(per.mean())
    counts = np.array([np.asarray(tree.nodes[i].value, dtype=float) for i in leaf])
    p = (counts[np.arange(targets.size), targets.labels] + 1.0) / (counts.sum(axis=1) + tree.n_classes)
    return float(-np.log(p).mean())


def _distinct_alpha_candidates(path: PruneSequence) -> tuple[list[float], list[int]]:
    """For each distinct alpha on the path, the index of the smallest subtree at it."""
    vals, idx = [], []
    for i, a in enumerate(path.alphas):
        if vals and a == vals[-1]:
            idx[-1] = i
        else:
            vals.append(a)
            idx.append(i)
    return vals, idx


def select_alpha(targets: FitTargets, cfg: GrowConfig | None = None, folds: int = 5, seed: int = 0,
                 feature_names=None, return_scores: bool = False):
    """Pick the pruning strength by k-fold cross-validated held-out likelihood.

    Candidates are geometric midpoints between consecutive alphas of the
    full-data path.  Ties go to the larger alpha (smaller tree).
    Returns ``(alpha, tree)`` fit on all targets.
    """
    cfg = cfg or GrowConfig()
    S = targets.size
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if S < folds * cfg.min_leaf:
        raise ValueError(f"{S} points is too few for {folds} folds with min_leaf={cfg.min_leaf}")
    full = prune_path(grow(targets, cfg, feature_names))
    vals, idx = _distinct_alpha_candidates(full)
    betas = [np.sqrt(vals[j] * vals[j + 1]) for j in range(len(vals) - 1)] + [vals[-1]]
    perm = np.random.default_rng(seed).permutation(S)
    scores = np.zeros(len(betas))
    for hold in np.array_split(perm, folds):
        train = np.setdiff1d(perm, hold)
        path = prune_path(grow(targets.subset(train), cfg))
        test = targets.subset(hold)
        for j, beta in enumerate(betas):
            scores[j] += heldout_nll(path.at_alpha(beta), test) * hold.size
    scores /= S
    best = scores.min()
    j = max(i for i, s in enumerate(scores) if s <= best + 1e-12 * max(1.0, abs(best)))
    out = (float(betas[j]), full.subtrees[idx[j]])
    return (*out, scores) if return_scores else out


def fit_size_constrained(targets: FitTargets, cfg: GrowConfig | None = None, size: int = 1,
                         feature_names=None, path: PruneSequence | None = None) -> tuple[ProxyTree, bool]:
    """Subtree on the prune path with ``size`` leaves.

    When the path skips that size, the largest subtree with fewer leaves is
    returned and the flag is False.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    if path is None:
        path = prune_path(grow(targets, cfg, feature_names))
    return pick_size(path, size)


def pick_size(path: PruneSequence, size: int) -> tuple[ProxyTree, bool]:
    for t in path.subtrees:  # decreasing leaf counts
        if t.n_leaves <= size:
            return t, t.n_leaves == size
    return path.subtrees[-1], False


# ------------------------------------------------------------ export


def tree_to_dict(tree: ProxyTree) -> dict:
    nodes = []
    for i, nd in enumerate(tree.nodes):
        rec = {"id": i, "n": nd.n, "loss": nd.loss}
        if tree.task == REGRESSION:
            rec["mu"] = nd.value
        else:
            rec["counts"] = [float(c) for c in nd.value]
        if nd.is_leaf:
            rec["kind"] = "leaf"
            if tree.task == CLASSIFICATION:
                rec["probs"] = tree.leaf_probs(i).tolist()
        else:
            rec.update(kind="split", feature=nd.feature, feature_name=tree.feature_name(nd.feature),
                       pivot=nd.pivot, left=nd.left, right=nd.right)
        nodes.append(rec)
    out = {"schema": "refproxy.tree", "version": SCHEMA_VERSION, "task": tree.task,
           "n_features": tree.n_features, "n_samples": tree.n_samples, "nodes": nodes}
    if tree.task == REGRESSION:
        out["sigma2"] = tree.sigma2
    else:
        out["n_classes"] = tree.n_classes
    if tree.feature_names:
        out["feature_names"] = list(tree.feature_names)
    return out


def tree_from_dict(d: dict) -> ProxyTree:
    if d.get("version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported tree schema version {d.get('version')!r}")
    nodes = []
    for rec in sorted(d["nodes"], key=lambda r: r["id"]):
        value = rec["mu"] if d["task"] == REGRESSION else np.array(rec["counts"], dtype=float)
        nd = Node(rec["n"], value, rec["loss"])
        if rec["kind"] == "split":
            nd.feature, nd.pivot, nd.left, nd.right = rec["feature"], rec["pivot"], rec["left"], rec["right"]
        nodes.append(nd)
    names = tuple(d["feature_names"]) if "feature_names" in d else None
    return ProxyTree(d["task"], nodes, d["n_features"], d["n_samples"], d.get("sigma2"),
                     d.get("n_classes", 0), names)


def to_dot(tree: ProxyTree, precision: int = 4) -> str:
    """Graphviz rendering; leaves are labelled with their mean (or class probabilities) and size."""
    lines = ["digraph proxy_tree {", '  node [shape=box, fontname="Helvetica"];']
    for i, nd in enumerate(tree.nodes):
        if nd.is_leaf:
            if tree.task == REGRESSION:
                label = f"μ={nd.value:.{precision}g}, n={nd.n}"
            else:
                probs = ", ".join(f"{p:.{precision}g}" for p in tree.leaf_probs(i))
                label = f"p=[{probs}], n={nd.n}"
            lines.append(f'  n{i} [label="{label}", style=rounded];')
        else:
            lines.append(f'  n{i} [label="{tree.feature_name(nd.feature)} <= {nd.pivot:.{precision}g}"];')
    for i, nd in enumerate(tree.nodes):
        if not nd.is_leaf:
            lines.append(f'  n{i} -> n{nd.left} [label="yes"];')
            lines.append(f'  n{i} -> n{nd.right} [label="no"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
