"""Spread of per-draw logistic explanations as the posterior draws agree more.

A toy two-feature classifier whose draws disagree on the second feature's
weight by ``spread``; the printed weight variance shrinks with the spread.
"""

import argparse

import numpy as np

from refproxy import projection as pj
from refproxy.reference import DrawReference


def make_reference(spread, L, seed):
    rng = np.random.default_rng(seed)
    w2 = 1.0 + spread * rng.standard_normal(L)

    def draw(w):
        def probs(X):
            p = 1 / (1 + np.exp(-(2.0 * X[:, 0] + w * X[:, 1])))
            return np.column_stack([1 - p, p])
        return probs

    return DrawReference([draw(w) for w in w2], 2, task="classification", n_classes=2)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=20)
    ap.add_argument("--points", type=int, default=200)
    args = ap.parse_args()
    Z = np.random.default_rng(0).normal(size=(args.points, 2))
    for spread in (2.0, 1.0, 0.5, 0.1, 0.0):
        u = pj.fit_linear_proxy_per_draw(make_reference(spread, args.L, 1), Z, args.L)
        print(f"spread {spread:4.1f}: mean weights {np.round(u.mean_weights, 3)}  var {np.round(u.var_weights, 4)}")


if __name__ == "__main__":
    main()
