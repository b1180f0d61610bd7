import numpy as np
import pytest

from ddnas import autograd as ag
from ddnas import discretize as dz
from ddnas.autograd import Tensor
from ddnas.train import Adam
from gradcheck import model_gradcheck


def _head(dim, K, seed=0):
    return dz.DiscretizationHead.create(dim, K, seed=seed)


def test_zero_weights_give_uniform_states():
    head = _head(4, 8)
    head.weight.data = np.zeros((4, 8))
    head.bias.data = np.zeros(8)
    x = Tensor(np.random.default_rng(0).uniform(-1, 1, size=(2, 3, 4)))
    probs = dz.categorize(head, x).data
    assert np.abs(probs - 1.0 / 8).max() < 1e-12


def test_categorize_rows_are_distributions():
    head = _head(6, 5, seed=1)
    x = Tensor(np.random.default_rng(1).uniform(-1, 1, size=(3, 7, 6)))
    probs = dz.categorize(head, x).data
    assert (probs >= 0).all()
    assert np.abs(probs.sum(axis=-1) - 1.0).max() < 1e-9


def test_categorize_dim_mismatch():
    head = _head(4, 3)
    with pytest.raises(ValueError, match="dim"):
        dz.categorize(head, Tensor(np.zeros((2, 5, 6))))


def test_aligned_direction_saturates_state_zero():
    d = np.array([1.0, -1.0, 0.5, 0.0])
    head = dz.DiscretizationHead(
        K=2,
        weight=Tensor(np.stack([10.0 * d, -10.0 * d], axis=1)),
        bias=Tensor(np.zeros(2)),
    )
    x = Tensor(np.stack([d, 2 * d, 0.5 * d]))
    probs = dz.categorize(head, x).data
    assert (probs[:, 0] > 0.99).all()


def test_categorize_permutation_equivariant_in_states():
    head = _head(5, 6, seed=2)
    x = Tensor(np.random.default_rng(2).uniform(-1, 1, size=(4, 5)))
    base = dz.categorize(head, x).data
    perm = np.random.default_rng(3).permutation(6)
    permuted = dz.DiscretizationHead(
        K=6,
        weight=Tensor(head.weight.data[:, perm]),
        bias=Tensor(head.bias.data[perm]),
    )
    assert np.allclose(dz.categorize(permuted, x).data, base[:, perm])


def test_mi_zero_at_uniform():
    probs = np.full((5, 3, 4), 0.25)
    assert abs(dz.mi_estimate(probs)) < 1e-12


def test_mi_log_k_at_even_one_hot_coverage():
    for K in (2, 4, 8):
        rows = np.tile(np.eye(K), (3, 1))
        assert abs(dz.mi_estimate(rows) - np.log(K)) < 1e-6


def test_mi_nonnegative_on_random_inputs():
    rng = np.random.default_rng(4)
    for _ in range(100):
        logits = rng.uniform(-3, 3, size=(6, 4, 5))
        probs = np.exp(logits)
        probs /= probs.sum(axis=-1, keepdims=True)
        assert dz.mi_estimate(probs) >= -1e-9


@pytest.mark.parametrize("K", [2, 4, 8, 64])
def test_j_d_uniform_closed_form(K):
    probs = Tensor(np.full((4, 6, K), 1.0 / K))
    expected = dz.uniform_j_d(K)
    assert abs(dz.j_d(probs).item() - expected) < 1e-6
    if K == 2:
        assert abs(expected - np.log(2)) < 1e-12


def test_j_d_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    head = _head(4, 3, seed=6)
    x = Tensor(rng.uniform(-1, 1, size=(3, 5, 4)))

    def loss_fn():
        return dz.j_d(dz.categorize(head, x))

    errs = model_gradcheck(loss_fn, head.parameters())
    assert max(errs) < 1e-3, errs


def test_aggregate_single_node_is_identity():
    head = _head(4, 3, seed=7)
    x = Tensor(np.random.default_rng(6).uniform(-1, 1, size=(2, 4, 4)))
    single = dz.aggregate_j_d([head], [x]).item()
    assert np.isclose(single, dz.j_d(dz.categorize(head, x)).item())


def test_aggregate_uniform_and_permutation_invariance():
    heads = [_head(4, 5, seed=(8, i)) for i in range(3)]
    for h in heads:
        h.weight.data = np.zeros((4, 5))
    xs = [Tensor(np.random.default_rng(10 + i).uniform(-1, 1, size=(2, 3, 4))) for i in range(3)]
    val = dz.aggregate_j_d(heads, xs).item()
    assert abs(val - dz.uniform_j_d(5)) < 1e-9

    heads2 = [_head(4, 5, seed=(9, i)) for i in range(3)]
    forward = dz.aggregate_j_d(heads2, xs).item()
    reordered = dz.aggregate_j_d(heads2[::-1], xs[::-1]).item()
    assert np.isclose(forward, reordered)


def test_aggregate_count_mismatch():
    with pytest.raises(ValueError, match="heads"):
        dz.aggregate_j_d([_head(4, 3)], [])


def test_batch_stats_normalized():
    rng = np.random.default_rng(11)
    logits = rng.uniform(-2, 2, size=(4, 6, 5))
    probs = np.exp(logits)
    probs /= probs.sum(axis=-1, keepdims=True)
    stats = dz.batch_stats(probs)
    assert abs(stats.mean_state_probs.sum() - 1.0) < 1e-8
    assert stats.per_sample_probs.shape == (4, 6, 5)


def test_j_d_descends_under_optimization():
    rng = np.random.default_rng(12)
    head = _head(6, 4, seed=13)
    x = Tensor(rng.uniform(-1, 1, size=(8, 5, 6)))
    opt = Adam(head.parameters(), lr=0.01)
    losses = []
    for _ in range(60):
        loss = dz.j_d(dz.categorize(head, x))
        losses.append(loss.item())
        loss.backward()
        opt.step()
        opt.zero_grad()
    assert losses[-1] < losses[0] - 0.05


def test_separated_clouds_land_in_different_states():
    rng = np.random.default_rng(14)
    direction = np.array([1.0, -0.5, 0.25, 2.0])
    cloud_a = 3.0 * direction + rng.normal(0, 0.1, size=(30, 4))
    cloud_b = -3.0 * direction + rng.normal(0, 0.1, size=(30, 4))
    x = Tensor(np.concatenate([cloud_a, cloud_b]))
    head = _head(4, 2, seed=15)
    opt = Adam(head.parameters(), lr=0.05)
    for _ in range(150):
        loss = dz.j_d(dz.categorize(head, x))
        loss.backward()
        opt.step()
        opt.zero_grad()
    states = np.argmax(dz.categorize(head, x).data, axis=-1)
    assert (states[:30] == states[0]).all()
    assert (states[30:] == states[30]).all()
    assert states[0] != states[30]
