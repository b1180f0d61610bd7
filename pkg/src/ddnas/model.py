"""End-to-end classifier over a search or derived DAG.

Token ids are embedded, zeroed at pad positions, pushed through the DAG,
projected per word, summed over the real words of each document, and
mapped to class probabilities. Losses: a per-class binary cross-entropy
(with a standard categorical variant behind a switch), the discretization
objective averaged over nodes, and their convex combination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from . import discretize
from .autograd import Tensor

CE_MODES = ("per_class", "categorical")


@dataclass
class BatchOutput:
    class_probs: Tensor  # (batch, n_classes)
    node_state_probs: list[Tensor]  # per node (batch, length, K)
    j_c: Tensor | None
    j_d: Tensor | None
    j: Tensor | None


def batch_arrays(examples) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    ids = np.stack([ex.token_ids for ex in examples])
    lengths = np.array([ex.true_length for ex in examples], dtype=np.int64)
    if any(ex.label is None for ex in examples):
        return ids, lengths, None
    labels = np.array([ex.label for ex in examples], dtype=np.int64)
    return ids, lengths, labels


def j_c(class_probs: Tensor, labels, mode: str = "per_class") -> Tensor:
    """Classification loss, averaged over the batch.

    `per_class` treats each class as a binary target under the one-hot
    encoding and sums both log terms over classes; `categorical` is the
    usual negative log likelihood of the true class. Logs are clamped.
    """
    if mode not in CE_MODES:
        raise ValueError(f"unknown cross-entropy mode {mode!r}")
    labels = np.asarray(labels)
    n, c = class_probs.shape
    if labels.shape != (n,):
        raise ValueError(f"j_c: {labels.shape[0] if labels.ndim else 0} labels for {n} predictions")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"j_c: label out of range for {c} classes")
    onehot = np.zeros((n, c))
    onehot[np.arange(n), labels] = 1.0
    y = Tensor(onehot)
    hit = ag.mul(y, ag.safe_log(class_probs, discretize.LOG_EPS))
    if mode == "categorical":
        return ag.scalar_mul(ag.tensor_sum(hit), -1.0 / n)
    complement = ag.add(Tensor(np.ones((n, c))), ag.scalar_mul(class_probs, -1.0))
    miss = ag.mul(Tensor(1.0 - onehot), ag.safe_log(complement, discretize.LOG_EPS))
    return ag.scalar_mul(ag.tensor_sum(ag.add(hit, miss)), -1.0 / n)


def joint_loss(jc: Tensor, jd: Tensor | None, lam: float) -> Tensor:
    """lam * J_D + (1 - lam) * J_C; exact at the endpoints."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    if jd is None:
        if lam != 0.0:
            raise ValueError("lambda > 0 requires a discretization loss")
        return jc
    if lam == 0.0:
        return jc
    if lam == 1.0:
        return jd
    return ag.add(ag.scalar_mul(jd, lam), ag.scalar_mul(jc, 1.0 - lam))


class TextClassifier:
    """Embedding + DAG + per-word projection + word-sum prediction head."""

    def __init__(
        self,
        vocab_size: int,
        n_classes: int,
        dim: int,
        dag,
        K: int,
        seed,
        heads_enabled: bool = True,
        ce_mode: str = "per_class",
    ):
        if n_classes < 2:
            raise ValueError(f"need at least 2 classes, got {n_classes}")
        if ce_mode not in CE_MODES:
            raise ValueError(f"unknown cross-entropy mode {ce_mode!r}")
        self.vocab_size = vocab_size
        self.n_classes = n_classes
        self.dim = dim
        self.dag = dag
        self.K = K
        self.ce_mode = ce_mode
        rng = np.random.default_rng((seed, 0))
        self.embedding = Tensor(rng.uniform(-0.1, 0.1, size=(vocab_size, dim)), requires_grad=True)
        s1 = np.sqrt(6.0 / (dim + dim))
        self.w1 = Tensor(rng.uniform(-s1, s1, size=(dim, dim)), requires_grad=True)
        self.b1 = Tensor(np.zeros(dim), requires_grad=True)
        st = np.sqrt(6.0 / (dim + n_classes))
        self.wt = Tensor(rng.uniform(-st, st, size=(dim, n_classes)), requires_grad=True)
        self.bt = Tensor(np.zeros(n_classes), requires_grad=True)
        self.heads: list[discretize.DiscretizationHead] = []
        if heads_enabled:
            self.heads = [
                discretize.DiscretizationHead.create(dim, K, seed=(seed, 1, node))
                for node in range(dag.n_nodes)
            ]

    def forward_batch(self, examples, lam: float = 0.5) -> BatchOutput:
        """Run the full model on a batch; losses are filled when labels exist."""
        ids, lengths, labels = batch_arrays(examples)
        if ids.max(initial=0) >= self.vocab_size:
            raise ValueError(
                f"token id {ids.max()} outside embedding table of size {self.vocab_size}"
            )
        b, l = ids.shape
        mask = (np.arange(l)[None, :] < lengths[:, None]).astype(np.float64)
        mask3 = Tensor(np.repeat(mask[:, :, None], self.dim, axis=2))

        x0 = ag.mul(ag.gather_rows(self.embedding, ids), mask3)
        nodes = self.dag.forward(x0)
        projected = ag.affine(nodes[-1], self.w1, self.b1)
        doc = ag.tensor_sum(ag.mul(projected, mask3), axis=1)
        class_probs = ag.softmax(ag.affine(doc, self.wt, self.bt), axis=-1)

        state_probs = [discretize.categorize(h, node) for h, node in zip(self.heads, nodes)]

        jc_val = jd_val = j_val = None
        if labels is not None:
            jc_val = j_c(class_probs, labels, mode=self.ce_mode)
            if self.heads:
                total = None
                for p in state_probs:
                    term = discretize.j_d(p)
                    total = term if total is None else ag.add(total, term)
                jd_val = ag.scalar_mul(total, 1.0 / len(state_probs))
            j_val = joint_loss(jc_val, jd_val, lam if self.heads else 0.0)
        return BatchOutput(
            class_probs=class_probs,
            node_state_probs=state_probs,
            j_c=jc_val,
            j_d=jd_val,
            j=j_val,
        )

    def predict(self, examples, batch_size: int = 64) -> np.ndarray:
        preds = []
        for start in range(0, len(examples), batch_size):
            out = self.forward_batch(examples[start : start + batch_size], lam=0.0)
            preds.append(np.argmax(out.class_probs.data, axis=-1))
        return np.concatenate(preds) if preds else np.array([], dtype=np.int64)

    def weight_parameters(self) -> list[Tensor]:
        out = [self.embedding]
        out.extend(self.dag.parameters())
        for head in self.heads:
            out.extend(head.parameters())
        out.extend([self.w1, self.b1, self.wt, self.bt])
        return out

    def arch_parameters(self) -> list[Tensor]:
        return self.dag.arch_parameters()
