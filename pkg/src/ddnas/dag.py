"""Macro search space over an ordered DAG.

Node 0 is the input; every ordered pair (i, j) with i < j carries an edge
whose operation is a softmax mixture over the candidate catalog. Node
values aggregate incoming edges by sum followed by relu. Derivation
collapses each edge to its argmax operation, dropping edges that pick the
zero map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from . import ops
from .autograd import Tensor


class SearchDag:
    """All-pairs DAG with learnable per-edge mixture logits."""

    def __init__(self, n_nodes: int, dim: int, seed, op_kinds=ops.OP_KINDS):
        if n_nodes < 1:
            raise ValueError(f"n_nodes must be >= 1, got {n_nodes}")
        if not op_kinds:
            raise ValueError("op_kinds must not be empty")
        self.n_nodes = n_nodes
        self.dim = dim
        self.op_kinds = tuple(op_kinds)
        self.edges = [(i, j) for j in range(1, n_nodes + 1) for i in range(j)]
        self.alpha: dict[tuple[int, int], Tensor] = {}
        self.edge_ops: dict[tuple[int, int], list[ops.OperationSpec]] = {}
        for i, j in self.edges:
            self.alpha[(i, j)] = Tensor(np.zeros(len(self.op_kinds)), requires_grad=True)
            self.edge_ops[(i, j)] = [
                ops.init_parameters(ops.make_op(kind), dim, rng_seed=(seed, i, j, k))
                for k, kind in enumerate(self.op_kinds)
            ]

    def mixed_edge(self, edge: tuple[int, int], x: Tensor) -> Tensor:
        """Softmax-weighted sum of every candidate operation on one edge."""
        if edge not in self.alpha:
            raise ValueError(f"unknown edge {edge}")
        weights = ag.softmax(self.alpha[edge], axis=-1)
        total = None
        for k, op in enumerate(self.edge_ops[edge]):
            picker = Tensor(np.eye(len(self.op_kinds))[k])
            w_k = ag.tensor_sum(ag.mul(weights, picker))
            term = ag.scalar_mul(ops.apply(op, x), w_k)
            total = term if total is None else ag.add(total, term)
        return total

    def forward(self, x0: Tensor) -> list[Tensor]:
        """Evaluate all nodes in order; returns [x_1 .. x_n]."""
        nodes = [x0]
        for j in range(1, self.n_nodes + 1):
            acc = None
            for i in range(j):
                term = self.mixed_edge((i, j), nodes[i])
                acc = term if acc is None else ag.add(acc, term)
            nodes.append(ag.relu(acc))
        return nodes[1:]

    def derive(self) -> "DerivedArchitecture":
        """Collapse each edge to its argmax operation; zero-map edges drop out."""
        edges = []
        for i, j in self.edges:
            k = int(np.argmax(self.alpha[(i, j)].data))  # ties pick the lowest index
            kind = self.op_kinds[k]
            if kind != "None":
                edges.append(DerivedEdge(src=i, dst=j, kind=kind))
        return DerivedArchitecture(n_nodes=self.n_nodes, edges=edges)

    def parameters(self) -> list[Tensor]:
        out = []
        for edge in self.edges:
            for op in self.edge_ops[edge]:
                out.extend(op.parameters())
        return out

    def arch_parameters(self) -> list[Tensor]:
        return [self.alpha[edge] for edge in self.edges]


@dataclass
class DerivedEdge:
    src: int
    dst: int
    kind: str


@dataclass
class DerivedArchitecture:
    """Frozen one-operation-per-edge DAG; absent edges were argmax zero maps."""

    n_nodes: int
    edges: list[DerivedEdge] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "edges": [
                {
                    "from": e.src,
                    "to": e.dst,
                    "kind": e.kind,
                    "settings": ops.op_settings(e.kind),
                }
                for e in self.edges
            ],
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "DerivedArchitecture":
        edges = []
        for entry in payload["edges"]:
            kind = entry["kind"]
            if kind not in ops.OP_KINDS or kind == "None":
                raise ValueError(f"invalid edge kind {kind!r} in architecture")
            expected = ops.op_settings(kind)
            if entry.get("settings", expected) != expected:
                raise ValueError(f"settings for {kind} do not match its catalog row")
            edges.append(DerivedEdge(src=int(entry["from"]), dst=int(entry["to"]), kind=kind))
        return cls(n_nodes=int(payload["n_nodes"]), edges=edges)

    def to_dot(self) -> str:
        lines = ["digraph architecture {", "  rankdir=LR;"]
        for v in range(self.n_nodes + 1):
            lines.append(f'  x{v} [shape=box, label="x{v}"];')
        for e in self.edges:
            lines.append(f'  x{e.src} -> x{e.dst} [label="{e.kind}"];')
        lines.append("}")
        return "\n".join(lines)


class FrozenDag:
    """A derived architecture instantiated with its own trainable parameters."""

    def __init__(self, arch: DerivedArchitecture, dim: int, seed):
        self.n_nodes = arch.n_nodes
        self.dim = dim
        self.arch = arch
        self.ops: dict[tuple[int, int], ops.OperationSpec] = {}
        for e in arch.edges:
            if not (0 <= e.src < e.dst <= arch.n_nodes):
                raise ValueError(f"edge ({e.src}, {e.dst}) outside DAG with {arch.n_nodes} nodes")
            self.ops[(e.src, e.dst)] = ops.init_parameters(
                ops.make_op(e.kind), dim, rng_seed=(seed, e.src, e.dst, 0)
            )

    def forward(self, x0: Tensor) -> list[Tensor]:
        nodes = [x0]
        for j in range(1, self.n_nodes + 1):
            acc = None
            for i in range(j):
                op = self.ops.get((i, j))
                if op is None:
                    continue
                term = ops.apply(op, nodes[i])
                acc = term if acc is None else ag.add(acc, term)
            if acc is None:
                acc = Tensor(np.zeros_like(x0.data))
            nodes.append(ag.relu(acc))
        return nodes[1:]

    def parameters(self) -> list[Tensor]:
        out = []
        for key in sorted(self.ops):
            out.extend(self.ops[key].parameters())
        return out

    def arch_parameters(self) -> list[Tensor]:
        return []
