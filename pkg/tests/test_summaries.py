import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from platelet_abc.analysis.clustering import hierarchical_cluster, rand_index
from platelet_abc.summaries import (
    MLP,
    Adam,
    FeatureExpansion,
    LmnnProblem,
    Standardizer,
    SummaryTransform,
    UntrainedTransformError,
    expanded_dim,
    grid_search_dssl,
    knn_loo_accuracy,
    network_regression_loss,
    network_triplet_loss,
    polynomial_expansion,
    sample_triplets,
    train_dssl,
    train_sasl,
    train_tlsl,
    triplet_loss,
)
from platelet_abc.summaries.neural import nearest_param_neighbours


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


def central_diff(f, x, h=1e-6):
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def three_groups(seed=0, n=16, sep=10.0, dim=9):
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(3, dim))
    centers = sep * centers / np.linalg.norm(centers, axis=1, keepdims=True)
    X = np.vstack([c + rng.normal(size=(n, dim)) for c in centers])
    labels = np.repeat(["a", "b", "c"], n)
    return X, labels


# feature expansion -----------------------------------------------------------

def test_expansion_layout():
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(polynomial_expansion(x), [1, 2, 3, 1, 4, 9, 1, 8, 27, 2, 3, 6])
    assert expanded_dim(9) == 63
    assert polynomial_expansion(np.ones((4, 9))).shape == (4, 63)


@given(arrays(float, (5, 4), elements=st.floats(-10, 10)))
def test_expansion_batch_matches_rows(X):
    np.testing.assert_array_equal(polynomial_expansion(X), np.array([polynomial_expansion(r) for r in X]))


def test_feature_expansion_standardizes_training_data():
    X = np.random.default_rng(1).normal(size=(50, 9)) * 5 + 3
    fe = FeatureExpansion.fit(X)
    E = fe.transform(X)
    np.testing.assert_allclose(E.mean(0), 0, atol=1e-10)
    np.testing.assert_allclose(E.std(0), 1, atol=1e-10)
    back = FeatureExpansion.from_dict(fe.to_dict())
    np.testing.assert_array_equal(back.transform(X), E)
    with pytest.raises(ValueError):
        fe.transform(np.zeros(8))
    with pytest.raises(ValueError):
        FeatureExpansion.fit([[np.nan] * 9])


def test_constant_feature_gets_unit_scale():
    X = np.column_stack([np.zeros(10), np.arange(10.0)])
    fe = FeatureExpansion.fit(X)
    assert np.all(np.isfinite(fe.transform(X)))


def test_standardizer_log_round_trip():
    X = np.exp(np.random.default_rng(0).normal(size=(30, 3)))
    s = Standardizer.fit(X, [True, False, True])
    np.testing.assert_allclose(s.inverse(s.transform(X)), X, rtol=1e-12)
    np.testing.assert_allclose(np.log(X[:, 0]).mean(), s.mean[0])


# gradient checks ---------------------------------------------------------------

@pytest.mark.parametrize("point", range(20))
def test_regression_loss_gradient(point):
    rng = np.random.default_rng(point)
    net = MLP.init((9, 14, 13, 10, 7), seed=point)
    X, Y = rng.normal(size=(16, 9)), rng.normal(size=(16, 7))
    loss, grad = network_regression_loss(net, X, Y)
    w0 = net.get_flat()

    def f(w):
        net.set_flat(w)
        return network_regression_loss(net, X, Y)[0]

    fd = central_diff(f, w0)
    net.set_flat(w0)
    assert rel_err(grad, fd) < 1e-5


@pytest.mark.parametrize("point", range(20))
def test_triplet_loss_gradient(point):
    rng = np.random.default_rng(100 + point)
    net = MLP.init((9, 14, 13, 10, 7), seed=point)
    Xa, Xp, Xn = (rng.normal(size=(16, 9)) for _ in range(3))
    loss, grad = network_triplet_loss(net, Xa, Xp, Xn, margin=1.0)
    w0 = net.get_flat()

    def f(w):
        net.set_flat(w)
        return network_triplet_loss(net, Xa, Xp, Xn, 1.0)[0]

    fd = central_diff(f, w0)
    net.set_flat(w0)
    assert loss > 0
    assert rel_err(grad, fd) < 1e-5


def test_triplet_loss_output_gradients():
    rng = np.random.default_rng(3)
    ga, gp, gn = (rng.normal(size=(6, 4)) for _ in range(3))
    _, g_a, g_p, g_n = triplet_loss(ga, gp, gn, 2.0)
    for g, k in ((g_a, 0), (g_p, 1), (g_n, 2)):
        def f(v, k=k):
            args = [ga, gp, gn]
            args[k] = v.reshape(6, 4)
            return triplet_loss(*args, 2.0)[0]
        np.testing.assert_allclose(g, central_diff(f, [ga, gp, gn][k]), atol=1e-7)


@pytest.mark.parametrize("point", range(20))
@pytest.mark.parametrize("printed_sign", [False, True])
def test_lmnn_gradient(point, printed_sign):
    rng = np.random.default_rng(200 + point)
    E = rng.normal(size=(12, 6))
    labels = np.repeat([0, 1, 2], 4)
    prob = LmnnProblem.build(E, labels, k=2, margin=1.0, printed_sign=printed_sign)
    L = rng.normal(size=(2, 6))
    h = 1e-6
    # the objective is piecewise smooth; a fixed hinge pattern around L means we are off the kinks
    for i in range(L.size):
        e = np.zeros_like(L)
        e.flat[i] = h
        assert np.array_equal(prob.active_set(L + e), prob.active_set(L - e))
    _, grad = prob.loss_and_grad(L)
    assert rel_err(grad, central_diff(prob.loss, L, h)) < 1e-5


def test_lmnn_pull_only_matches_closed_form():
    # far-apart groups: no impostors, loss is the sum of target distances
    E = np.array([[0, 0], [0, 1], [0, 2], [100, 0], [100, 1], [100, 2]], float)
    prob = LmnnProblem.build(E, [0, 0, 0, 1, 1, 1], k=2)
    # per group: (1 + 4) + (1 + 1) + (1 + 4)
    assert prob.loss(np.eye(2)) == pytest.approx(24.0)
    assert not prob.active_set(np.eye(2)).any()


def test_lmnn_group_too_small():
    with pytest.raises(ValueError):
        LmnnProblem.build(np.zeros((5, 2)), [0, 0, 0, 1, 1], k=2)


# DSSL -------------------------------------------------------------------------

def test_dssl_separates_three_groups():
    X, labels = three_groups()
    tr = train_dssl(X, labels, k=3, step=1e-3)
    assert tr.matrix.shape == (2, 63)
    assert rand_index(labels, hierarchical_cluster(tr.apply(X), 3)) == 1.0
    curve = tr.provenance["loss_curve"]
    assert all(b <= a for a, b in zip(curve, curve[1:]))
    assert tr.provenance["loo_knn_accuracy"] == 1.0


def test_dssl_deterministic_and_persistent(tmp_path):
    X, labels = three_groups(seed=4)
    a = train_dssl(X, labels, max_iter=30)
    b = train_dssl(X, labels, max_iter=30)
    np.testing.assert_array_equal(a.matrix, b.matrix)
    a.save(tmp_path / "t.json")
    back = SummaryTransform.load(tmp_path / "t.json")
    np.testing.assert_array_equal(back.apply(X), a.apply(X))
    np.testing.assert_allclose(back.metric, a.matrix.T @ a.matrix)


def test_dssl_grid_search_records_grid():
    X, labels = three_groups(seed=2)
    tr = grid_search_dssl(X, labels, steps=(1e-3,), ks=(2, 3), max_iter=50)
    assert len(tr.provenance["grid_search"]) == 2
    assert tr.provenance["rand_index"] == 1.0


def test_knn_loo_accuracy_example():
    pts = np.array([[0.0], [0.1], [0.2], [5.0], [5.1], [5.2]])
    assert knn_loo_accuracy(pts, [0, 0, 0, 1, 1, 1], k=2) == 1.0
    assert knn_loo_accuracy(pts, [0, 1, 0, 1, 0, 1], k=1) == 0.0


# networks ---------------------------------------------------------------------

def test_mlp_flat_round_trip_and_shapes():
    net = MLP.init(seed=3)
    assert net.layers == (9, 14, 13, 10, 7)
    w = net.get_flat()
    assert w.size == 9 * 14 + 14 + 14 * 13 + 13 + 13 * 10 + 10 + 10 * 7 + 7
    other = MLP.init(seed=4)
    other.set_flat(w)
    x = np.random.default_rng(0).normal(size=(3, 9))
    np.testing.assert_array_equal(other.forward(x), net.forward(x))
    np.testing.assert_array_equal(MLP.from_dict(net.to_dict()).forward(x), net.forward(x))


def test_adam_minimizes_quadratic():
    opt = Adam(2, lr=0.1)
    p = np.array([3.0, -2.0])
    for _ in range(500):
        p = opt.step(p, 2 * p)
    assert np.abs(p).max() < 1e-2


def test_sasl_recovers_linear_map():
    rng = np.random.default_rng(0)
    thetas = rng.uniform(1, 2, size=(400, 2))
    A = rng.normal(size=(2, 9))
    xs = thetas @ A
    tr = train_sasl(thetas, xs, epochs=200, layers=(9, 14, 13, 10, 2), lr=3e-3, seed=1)
    pred = tr.predict_params(xs)
    assert np.sqrt(((pred - thetas) ** 2).mean()) < 0.05
    assert tr.provenance["val_loss"][-1] < 0.05
    assert tr.output_dim == 2


def test_sasl_seeded_reproducible():
    rng = np.random.default_rng(1)
    th, xs = rng.random((40, 7)), rng.random((40, 9))
    a = train_sasl(th, xs, epochs=3, seed=5)
    b = train_sasl(th, xs, epochs=3, seed=5)
    np.testing.assert_array_equal(a.network.get_flat(), b.network.get_flat())
    c = train_sasl(th, xs, epochs=3, seed=6)
    assert not np.array_equal(a.network.get_flat(), c.network.get_flat())


def test_sasl_rejects_mismatched_pilot():
    with pytest.raises(ValueError):
        train_sasl(np.zeros((3, 7)), np.zeros((4, 9)), epochs=1)


def test_tlsl_embeds_parameter_order():
    rng = np.random.default_rng(2)
    thetas = rng.uniform(0, 1, size=(120, 1))
    xs = np.column_stack([thetas[:, 0] * k for k in range(1, 10)]) + 0.01 * rng.normal(size=(120, 9))
    tr = train_tlsl(thetas, xs, epochs=60, lr=3e-3, seed=0)
    emb = tr.apply(xs)
    assert tr.provenance["train_loss"][-1] < tr.provenance["train_loss"][0]
    # neighbours in the embedding are close in parameter space
    d = ((emb[:, None] - emb[None]) ** 2).sum(-1)
    np.fill_diagonal(d, np.inf)
    nn = d.argmin(1)
    assert np.median(np.abs(thetas[nn, 0] - thetas[:, 0])) < 0.05


def test_sample_triplets_respects_exclusion():
    Z = np.arange(20.0)[:, None]
    order = nearest_param_neighbours(Z)
    a, p, n = sample_triplets(order, np.arange(20), np.random.default_rng(0), m=5)
    assert np.all(np.abs(p - a) == 1)
    ranks = np.array([list(order[i]).index(j) for i, j in zip(a, n)])
    assert np.all(ranks >= 5)
    with pytest.raises(ValueError):
        sample_triplets(order[:5, :4], [0], np.random.default_rng(0), m=5)


# transform --------------------------------------------------------------------

def test_transform_dimension_check_and_untrained():
    t = SummaryTransform.identity(9)
    with pytest.raises(ValueError):
        t.apply(np.zeros(8))
    with pytest.raises(UntrainedTransformError):
        SummaryTransform("linear", 9).apply(np.zeros(9))
    with pytest.raises(ValueError):
        SummaryTransform("mystery", 9)


def test_transform_single_and_batch_agree():
    X, labels = three_groups()
    tr = train_dssl(X, labels, max_iter=10)
    np.testing.assert_allclose(tr.apply(X[3]), tr.apply(X)[3], rtol=1e-12)
