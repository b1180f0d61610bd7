import numpy as np
import pytest

from ddnas import ops
from ddnas.autograd import Tensor
from gradcheck import model_gradcheck


def _ready(kind, dim=8, seed=11):
    return ops.init_parameters(ops.make_op(kind), dim, rng_seed=seed)


def test_catalog_has_nine_kinds():
    assert len(ops.OP_KINDS) == 9
    assert ops.OP_KINDS[-1] == "None"


def test_unknown_kind_rejected():
    with pytest.raises(ValueError, match="unknown"):
        ops.make_op("Recurrent")


@pytest.mark.parametrize("kind", ops.OP_KINDS)
def test_shape_preserved_for_every_kind(kind):
    rng = np.random.default_rng(5)
    for batch, length, dim in [(2, 16, 8), (1, 1, 3), (3, 7, 4)]:
        op = _ready(kind, dim=dim)
        x = Tensor(rng.uniform(-1, 1, size=(batch, length, dim)))
        assert ops.apply(op, x).shape == (batch, length, dim)


def test_apply_requires_three_axes():
    op = _ready("Conv3")
    with pytest.raises(ValueError, match="Conv3"):
        ops.apply(op, Tensor(np.zeros((4, 8))))


def test_none_is_zero_with_no_parameters():
    op = _ready("None")
    assert op.parameters() == []
    x = Tensor(np.random.default_rng(0).uniform(-1, 1, size=(2, 5, 8)), requires_grad=True)
    out = ops.apply(op, x)
    assert np.array_equal(out.data, np.zeros_like(x.data))


def test_conv_parameter_shapes():
    op = _ready("Conv3", dim=8)
    assert op.kernel.shape == (3, 8, 8)
    assert op.bias.shape == (8,)
    assert np.array_equal(op.bias.data, np.zeros(8))


def test_init_is_deterministic_and_bounded():
    a = _ready("Conv5", dim=6, seed=123)
    b = _ready("Conv5", dim=6, seed=123)
    c = _ready("Conv5", dim=6, seed=124)
    assert np.array_equal(a.kernel.data, b.kernel.data)
    assert not np.array_equal(a.kernel.data, c.kernel.data)
    bound = np.sqrt(6.0 / (5 * 6 + 6))
    assert np.abs(a.kernel.data).max() <= bound


def test_init_rejects_bad_dim():
    with pytest.raises(ValueError, match="dim"):
        ops.init_parameters(ops.make_op("Conv3"), 0, rng_seed=0)


def test_dilated2_preserves_length_16():
    op = _ready("Dilated2", dim=4)
    x = Tensor(np.random.default_rng(1).uniform(-1, 1, size=(1, 16, 4)))
    assert ops.apply(op, x).shape == (1, 16, 4)


def test_avg_pool_boundary_value():
    op = _ready("AvgPool", dim=2)
    c = 0.8
    x = Tensor(np.full((1, 6, 2), c))
    out = ops.apply(op, x).data
    assert np.allclose(out[0, 0], 2 * c / 3)
    assert np.allclose(out[0, 1:-1], c)


def test_conv_output_changes_with_parameters():
    rng = np.random.default_rng(2)
    x = Tensor(rng.uniform(-1, 1, size=(2, 10, 4)))
    for kind in ("Conv3", "Conv7", "Dilated4"):
        op = _ready(kind, dim=4, seed=1)
        before = ops.apply(op, x).data.copy()
        op.kernel.data = op.kernel.data + 0.1
        assert not np.allclose(before, ops.apply(op, x).data)


@pytest.mark.parametrize("kind", [k for k in ops.OP_KINDS if k != "None"])
def test_operation_gradients_match_finite_differences(kind):
    rng = np.random.default_rng(9)
    dim = 3
    op = _ready(kind, dim=dim, seed=4)
    if kind == "MaxPool":
        x = Tensor(rng.permutation(2 * 9 * dim).reshape(2, 9, dim) * 0.05, requires_grad=True)
    else:
        x = Tensor(rng.uniform(-1, 1, size=(2, 9, dim)), requires_grad=True)
    r = Tensor(rng.uniform(-1, 1, size=(2, 9, dim)))

    def loss_fn():
        from ddnas import autograd as ag

        return ag.tensor_sum(ag.mul(ops.apply(op, x), r))

    params = [x] + op.parameters()
    errs = model_gradcheck(loss_fn, params)
    assert max(errs) < 1e-3, f"{kind}: rel errors {errs}"
