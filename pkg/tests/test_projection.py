import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from refproxy import data, projection as pj
from refproxy import reference as rf
from refproxy import tree as tr
from refproxy.canonical import canonical_json
from refproxy.projection import NeighborhoodSpec


@pytest.fixture(scope="module")
def diabetes():
    return data.load_bundled("diabetes")


@pytest.fixture(scope="module")
def ens(diabetes):
    return rf.fit_ensemble(diabetes, rf.EnsembleConfig(n_trees=20))


def constant_reference(d, value=3.0, var=0.2):
    return rf.DrawReference([lambda Z: np.full(len(Z), value)], d, noise_var=var)


def test_global_targets_shape_and_values(diabetes, ens):
    sub = diabetes.subset(np.arange(10))
    t = pj.make_global_targets(ens, sub)
    assert t.size == 10
    avg = np.mean([d(sub.features) for d in ens.posterior_draws(20)], axis=0)
    assert np.allclose(t.means, avg, rtol=1e-12)


def test_global_targets_from_interpolating_gp():
    rng = np.random.default_rng(0)
    ds = data.from_arrays(rng.uniform(-2, 2, size=(12, 1)), rng.normal(size=12))
    gp = rf.GpReference(ds.features, ds.target, lengthscale=0.3, noise=1e-10)
    assert np.max(np.abs(pj.make_global_targets(gp, ds).means - ds.target)) < 1e-6


def test_local_targets_collapse_and_determinism(ens, diabetes):
    x = diabetes.features[5]
    nb = NeighborhoodSpec(x, sd=1e-9, S=50, seed=4)
    t = pj.make_local_targets(ens, nb)
    center = ens.predict_summary(x[None, :]).means[0]
    assert np.max(np.abs(t.means - center)) < 1e-6
    nb = NeighborhoodSpec(x, S=200, seed=4)
    a, b = pj.make_local_targets(ens, nb), pj.make_local_targets(ens, nb)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.means, b.means)


def test_neighborhood_sample_mean():
    nb = NeighborhoodSpec(np.array([1.0, -2.0]), sd=0.5, S=10000, seed=1)
    Z = nb.sample(np.array([1.0, 3.0]))
    assert np.all(np.abs(Z.mean(axis=0) - nb.center) < 3 * 0.5 * np.array([1.0, 3.0]) / 100)


def test_local_targets_dimension_check(ens):
    with pytest.raises(ValueError):
        pj.make_local_targets(ens, NeighborhoodSpec(np.zeros(3)))


def test_global_size_one_fidelity_is_spread_of_reference(diabetes, ens):
    rep = pj.explain_global(ens, diabetes, size=1)
    m = ens.predict_summary(diabetes.features).means
    assert rep.complexity == 1
    assert rep.fidelity == pytest.approx(np.mean((m - m.mean()) ** 2), rel=1e-12)


def test_global_fidelity_monotone_along_path(diabetes, ens):
    t = pj.make_global_targets(ens, diabetes)
    path = tr.prune_path(tr.grow(t))
    fid = [np.mean((tr.predict(s, t.points) - t.means) ** 2) for s in path.subtrees]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(fid, fid[1:]))


def test_global_cv_report(diabetes, ens):
    rep = pj.explain_global(ens, diabetes, size=None, seed=1)
    d = rep.to_dict()
    assert rep.alpha is not None and rep.complexity == rep.proxy.n_leaves
    assert d["feature_names_used"] == [diabetes.feature_names[k] for k in rep.features_used]
    assert canonical_json(d) == canonical_json(pj.explain_global(ens, diabetes, size=None, seed=1).to_dict())


def test_local_depth_cap(ens, diabetes):
    rep = pj.explain_local(ens, NeighborhoodSpec(diabetes.features[0], S=200, seed=0), size=None)
    assert rep.proxy.depth() <= 3 and rep.proxy.n_leaves <= 8 and rep.proxy.n_internal <= 7
    assert rep.to_dict()["seeds"]["neighborhood"] == 0
    assert np.array_equal(rep.center, diabetes.features[0])


def test_local_constant_reference_gives_single_leaf():
    m = constant_reference(2)
    rep = pj.explain_local(m, NeighborhoodSpec(np.zeros(2)), size=None)
    assert rep.proxy.n_leaves == 1 and rep.fidelity == 0.0


def test_local_collapsing_neighborhood(ens, diabetes):
    x = diabetes.features[7]
    rep = pj.explain_local(ens, NeighborhoodSpec(x, sd=1e-9, S=200, seed=0), size=None)
    assert rep.proxy.n_leaves == 1
    assert abs(tr.predict(rep.proxy, x[None, :])[0] - ens.predict_summary(x[None, :]).means[0]) < 1e-6


def test_kl_and_expected_loglik_pick_same_leaf_means():
    """For a fixed partition, maximising expected log-likelihood equals minimising Gaussian KL."""
    rng = np.random.default_rng(3)
    for _ in range(20):
        y, v = rng.normal(size=5), rng.uniform(0.1, 1.0, size=5)
        part = np.array([0, 0, 1, 1, 1])
        s2 = 0.7
        grid = np.linspace(-3, 3, 121)

        def exp_ll(mu):
            m = np.array(mu)[part]
            return np.sum(-0.5 * np.log(2 * np.pi * s2) - (v + (y - m) ** 2) / (2 * s2))

        def kl(mu):
            m = np.array(mu)[part]
            return np.sum(0.5 * np.log(s2 / v) + (v + (y - m) ** 2) / (2 * s2) - 0.5)

        cells = list(itertools.product(grid, grid))
        best_ll = max(cells, key=exp_ll)
        best_kl = min(cells, key=kl)
        assert best_ll == best_kl
        tree_mu = [y[part == k].mean() for k in (0, 1)]
        assert np.all(np.abs(np.array(best_ll) - tree_mu) <= 0.025 + 1e-12)


# ------------------------------------------------------------ linear proxies


def test_least_squares_recovers_plane():
    rng = np.random.default_rng(0)
    Z = rng.normal(size=(50, 3))
    p = pj.fit_least_squares(Z, Z @ [1.0, -2.0, 0.5] + 4.0)
    assert np.allclose(p.weights, [1.0, -2.0, 0.5], atol=1e-6) and abs(p.intercept - 4.0) < 1e-6


def test_logistic_recovers_soft_targets():
    rng = np.random.default_rng(1)
    Z = rng.normal(size=(200, 2))
    p = 1 / (1 + np.exp(-(Z @ [2.0, -1.0] + 0.3)))
    fit = pj.fit_logistic(Z, p)
    assert np.allclose(fit.weights, [2.0, -1.0], atol=1e-4) and abs(fit.intercept - 0.3) < 1e-4


def test_logistic_on_separable_labels_is_finite():
    Z = np.linspace(-1, 1, 20)[:, None]
    fit = pj.fit_logistic(Z, (Z[:, 0] > 0).astype(float))
    assert np.all(np.isfinite(fit.weights)) and fit.weights[0] > 0


def linear_draws(slopes):
    return [lambda Z, s=s: Z @ np.asarray(s, dtype=float) for s in slopes]


def test_identical_draws_have_zero_weight_variance():
    Z = np.random.default_rng(2).normal(size=(40, 2))
    m = rf.DrawReference(linear_draws([[1.3, -0.7]] * 6), 2)
    u = pj.fit_linear_proxy_per_draw(m, Z, 6)
    assert np.all(u.var_weights == 0.0)


def test_single_draw_has_zero_weight_variance(ens, diabetes):
    u = pj.fit_linear_proxy_per_draw(ens, diabetes.features[:60], 1)
    assert np.all(u.var_weights == 0.0)


def test_disagreeing_draws_show_variance_where_they_disagree():
    Z = np.random.default_rng(3).normal(size=(40, 2))
    m = rf.DrawReference(linear_draws([[1.0, 0.5], [3.0, 0.5], [-1.0, 0.5]]), 2)
    u = pj.fit_linear_proxy_per_draw(m, Z, 3)
    assert u.var_weights[0] > 0.5 and u.var_weights[1] < 1e-12


def test_logistic_per_draw_on_binary_reference():
    Z = np.random.default_rng(4).normal(size=(80, 2))

    def prob(w):
        return lambda X: np.column_stack([1 - 1 / (1 + np.exp(-X @ w)), 1 / (1 + np.exp(-X @ w))])

    same = rf.DrawReference([prob(np.array([1.0, 2.0]))] * 4, 2, task="classification", n_classes=2)
    assert np.all(pj.fit_linear_proxy_per_draw(same, Z, 4).var_weights == 0.0)
    diff = rf.DrawReference([prob(np.array([1.0, 2.0])), prob(np.array([1.0, -2.0]))], 2,
                            task="classification", n_classes=2)
    u = pj.fit_linear_proxy_per_draw(diff, Z, 2)
    assert u.var_weights[1] > 1.0 and u.var_weights[0] < 1e-6
    assert all(p.link == "logistic" for p in u.per_draw)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.integers(1, 8))
def test_weight_variance_nonnegative_and_zero_for_copies(w, L):
    Z = np.random.default_rng(L).normal(size=(25, 2))
    u = pj.fit_linear_proxy_per_draw(rf.DrawReference(linear_draws([w] * L), 2), Z, L)
    assert np.all(u.var_weights == 0.0)
    assert np.allclose(u.mean_weights, w, atol=1e-6)


def test_report_serialises(ens, diabetes):
    rep = pj.explain_local(ens, NeighborhoodSpec(diabetes.features[1], S=100, seed=2), size=3)
    d = json.loads(canonical_json(rep.to_dict()))
    assert d["target_kind"] == "local" and d["complexity"] <= 3 and "center" in d
