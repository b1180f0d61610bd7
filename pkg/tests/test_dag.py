import numpy as np
import pytest

from ddnas import autograd as ag
from ddnas import ops
from ddnas.autograd import Tensor
from ddnas.dag import DerivedArchitecture, FrozenDag, SearchDag
from gradcheck import model_gradcheck


def _dag(n_nodes=2, dim=4, seed=0, **kw):
    return SearchDag(n_nodes, dim, seed=seed, **kw)


def _rand_input(shape, seed=0):
    return Tensor(np.random.default_rng(seed).uniform(-1, 1, size=shape))


def test_edge_count_includes_input_node():
    assert len(_dag(1).edges) == 1
    assert len(_dag(2).edges) == 3
    dag = _dag(5)
    assert len(dag.edges) == 15
    assert all(len(dag.alpha[e].data) == 9 for e in dag.edges)


def test_alpha_starts_uniform():
    dag = _dag(2)
    for e in dag.edges:
        assert np.array_equal(dag.alpha[e].data, np.zeros(9))


def test_mixed_edge_unknown_edge():
    dag = _dag(2)
    with pytest.raises(ValueError, match="edge"):
        dag.mixed_edge((1, 0), _rand_input((1, 4, 4)))


def test_uniform_alpha_equals_unweighted_mean():
    dag = _dag(1, dim=4, seed=3)
    x = _rand_input((2, 6, 4), seed=1)
    mixed = dag.mixed_edge((0, 1), x).data
    total = np.zeros_like(mixed)
    for op in dag.edge_ops[(0, 1)]:
        total += ops.apply(op, x).data
    assert np.abs(mixed - total / 9.0).max() < 1e-9


def test_saturated_none_gives_zero_output():
    dag = _dag(1, dim=4, seed=3)
    alpha = np.full(9, -40.0)
    alpha[ops.OP_KINDS.index("None")] = 40.0
    dag.alpha[(0, 1)].data = alpha
    x = _rand_input((2, 6, 4), seed=2)
    out = dag.mixed_edge((0, 1), x).data
    assert np.abs(out).max() < 1e-9


def test_mixed_edge_invariant_to_alpha_shift():
    dag = _dag(1, dim=4, seed=5)
    dag.alpha[(0, 1)].data = np.linspace(-1, 1, 9)
    x = _rand_input((2, 6, 4), seed=3)
    before = dag.mixed_edge((0, 1), x).data.copy()
    dag.alpha[(0, 1)].data = dag.alpha[(0, 1)].data + 17.3
    after = dag.mixed_edge((0, 1), x).data
    assert np.abs(before - after).max() < 1e-9


def test_forward_single_node_matches_mixed_edge():
    dag = _dag(1, dim=4, seed=7)
    x0 = _rand_input((2, 5, 4), seed=4)
    nodes = dag.forward(x0)
    assert len(nodes) == 1
    expected = ag.relu(dag.mixed_edge((0, 1), x0)).data
    assert np.array_equal(nodes[0].data, expected)


def test_forward_five_nodes_returns_five_tensors():
    dag = _dag(5, dim=3, seed=8)
    nodes = dag.forward(_rand_input((1, 4, 3), seed=5))
    assert len(nodes) == 5
    assert all(n.shape == (1, 4, 3) for n in nodes)


def test_none_edge_blocks_input_contribution():
    # with edge (0,2) saturated on the zero op, x2 ignores x0 when x1 is held fixed
    dag = _dag(2, dim=4, seed=9)
    alpha = np.full(9, -40.0)
    alpha[ops.OP_KINDS.index("None")] = 40.0
    dag.alpha[(0, 2)].data = alpha
    x1 = _rand_input((1, 5, 4), seed=6)

    def node2(x0):
        return ag.relu(ag.add(dag.mixed_edge((0, 2), x0), dag.mixed_edge((1, 2), x1))).data

    a = node2(_rand_input((1, 5, 4), seed=7))
    b = node2(_rand_input((1, 5, 4), seed=8))
    assert np.abs(a - b).max() < 1e-9


def test_all_none_saturation_zeroes_every_node():
    dag = _dag(3, dim=3, seed=10)
    alpha = np.full(9, -40.0)
    alpha[ops.OP_KINDS.index("None")] = 40.0
    for e in dag.edges:
        dag.alpha[e].data = alpha.copy()
    nodes = dag.forward(_rand_input((2, 4, 3), seed=9))
    for n in nodes:
        assert np.abs(n.data).max() < 1e-9


def test_derive_argmax_and_tie_rule():
    dag = _dag(1, dim=3, seed=11)
    dag.alpha[(0, 1)].data = np.array([0.1, 0.7, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    arch = dag.derive()
    assert arch.edges[0].kind == ops.OP_KINDS[1]

    tie = np.zeros(9)
    tie[2] = tie[5] = 3.0
    dag.alpha[(0, 1)].data = tie
    assert dag.derive().edges[0].kind == ops.OP_KINDS[2]


def test_derive_drops_none_edges_and_ignores_shifts():
    dag = _dag(2, dim=3, seed=12)
    none_idx = ops.OP_KINDS.index("None")
    saturated = np.zeros(9)
    saturated[none_idx] = 5.0
    dag.alpha[(0, 2)].data = saturated
    dag.alpha[(0, 1)].data = np.eye(9)[0] * 2.0  # Conv3
    dag.alpha[(1, 2)].data = np.eye(9)[7] * 2.0  # MaxPool
    arch = dag.derive()
    assert {(e.src, e.dst, e.kind) for e in arch.edges} == {(0, 1, "Conv3"), (1, 2, "MaxPool")}

    for e in dag.edges:
        dag.alpha[e].data = dag.alpha[e].data - 123.456
    shifted = dag.derive()
    assert [(e.src, e.dst, e.kind) for e in shifted.edges] == [
        (e.src, e.dst, e.kind) for e in arch.edges
    ]


def test_five_node_derivation_can_express_chain_with_absences():
    # a topology with a straight conv chain and pruned edges is reachable
    dag = _dag(5, dim=3, seed=13)
    none_idx = ops.OP_KINDS.index("None")
    for e in dag.edges:
        dag.alpha[e].data = np.eye(9)[none_idx] * 4.0
    chain = {(0, 1): "Conv3", (1, 2): "Conv5", (2, 3): "Conv3", (3, 5): "Conv7", (0, 4): "MaxPool", (4, 5): "AvgPool"}
    for edge, kind in chain.items():
        dag.alpha[edge].data = np.eye(9)[ops.OP_KINDS.index(kind)] * 4.0
    arch = dag.derive()
    assert {(e.src, e.dst): e.kind for e in arch.edges} == chain
    assert len(arch.edges) < len(dag.edges)


def test_forward_differentiable_wrt_alpha_and_weights():
    dag = _dag(2, dim=4, seed=14)
    rng = np.random.default_rng(15)
    for e in dag.edges:
        dag.alpha[e].data = rng.uniform(-0.5, 0.5, size=9)
    x0 = Tensor(rng.uniform(-1, 1, size=(2, 8, 4)))
    r = Tensor(rng.uniform(-1, 1, size=(2, 8, 4)))

    def loss_fn():
        return ag.tensor_sum(ag.mul(dag.forward(x0)[-1], r))

    params = dag.arch_parameters() + [dag.edge_ops[(0, 1)][0].kernel, dag.edge_ops[(1, 2)][3].bias]
    errs = model_gradcheck(loss_fn, params)
    assert max(errs) < 1e-3, errs


def test_restricted_op_kinds_shrink_alpha():
    kinds = tuple(k for k in ops.OP_KINDS if k not in ("AvgPool", "MaxPool"))
    dag = _dag(2, dim=3, seed=16, op_kinds=kinds)
    assert all(dag.alpha[e].shape == (7,) for e in dag.edges)
    nodes = dag.forward(_rand_input((1, 4, 3), seed=10))
    assert nodes[-1].shape == (1, 4, 3)


def test_architecture_json_round_trip_and_dot():
    arch = DerivedArchitecture(
        n_nodes=3,
        edges=[],
    )
    payload = arch.to_json_dict()
    assert payload == {"n_nodes": 3, "edges": []}

    dag = _dag(3, dim=3, seed=17)
    arch = dag.derive()
    restored = DerivedArchitecture.from_json_dict(arch.to_json_dict())
    assert restored == arch
    dot = arch.to_dot()
    for e in arch.edges:
        assert f"x{e.src} -> x{e.dst}" in dot
    assert dot.count("->") == len(arch.edges)


def test_architecture_json_rejects_bad_kind():
    with pytest.raises(ValueError, match="kind"):
        DerivedArchitecture.from_json_dict(
            {"n_nodes": 1, "edges": [{"from": 0, "to": 1, "kind": "None"}]}
        )


def test_frozen_dag_forward_and_isolated_node():
    arch = DerivedArchitecture.from_json_dict(
        {
            "n_nodes": 2,
            "edges": [{"from": 0, "to": 2, "kind": "Conv3", "settings": ops.op_settings("Conv3")}],
        }
    )
    frozen = FrozenDag(arch, dim=4, seed=18)
    nodes = frozen.forward(_rand_input((2, 5, 4), seed=11))
    assert np.array_equal(nodes[0].data, np.zeros((2, 5, 4)))  # node 1 has no incoming edges
    assert nodes[1].shape == (2, 5, 4)
    assert frozen.arch_parameters() == []
    assert len(frozen.parameters()) == 2
