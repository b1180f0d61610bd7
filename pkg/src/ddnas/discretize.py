"""Soft discretization of node representations into K latent states.

Each DAG node gets a side-branch head producing a length-K probability
vector per word position. The training objective pushes per-position
distributions toward hard states while keeping the batch marginal
spread out, which maximizes a mutual-information surrogate between the
continuous representation and the latent state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor

LOG_EPS = 1e-8


@dataclass
class DiscretizationHead:
    """Affine-plus-softmax categorizer over K latent states."""

    K: int
    weight: Tensor  # (dim, K)
    bias: Tensor  # (K,)

    @classmethod
    def create(cls, dim: int, K: int, seed) -> "DiscretizationHead":
        rng = np.random.default_rng(seed)
        s = np.sqrt(6.0 / (dim + K))
        return cls(
            K=K,
            weight=Tensor(rng.uniform(-s, s, size=(dim, K)), requires_grad=True),
            bias=Tensor(np.zeros(K), requires_grad=True),
        )

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]


def categorize(head: DiscretizationHead, x: Tensor) -> Tensor:
    """Per-position state probabilities, shape (..., K)."""
    if x.shape[-1] != head.weight.shape[0]:
        raise ValueError(
            f"categorize: input dim {x.shape[-1]} does not match head dim {head.weight.shape[0]}"
        )
    return ag.softmax(ag.affine(x, head.weight, head.bias), axis=-1)


@dataclass
class DiscretizationBatchStats:
    mean_state_probs: np.ndarray  # (K,), mean over batch and positions
    per_sample_probs: np.ndarray  # (..., K)


def batch_stats(probs) -> DiscretizationBatchStats:
    p = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    lead = tuple(range(p.ndim - 1))
    return DiscretizationBatchStats(mean_state_probs=p.mean(axis=lead), per_sample_probs=p)


def mi_estimate(probs) -> float:
    """Mean KL divergence of per-position distributions to their mean.

    Estimates the mutual information between the input and the latent
    state; nonnegative up to the log guard.
    """
    p = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    lead = tuple(range(p.ndim - 1))
    q = p.mean(axis=lead)
    logp = np.log(np.maximum(p, LOG_EPS))
    logq = np.log(np.maximum(q, LOG_EPS))
    return float((p * (logp - logq)).sum(axis=-1).mean())


def _lead_axes(t: Tensor) -> tuple[int, ...]:
    return tuple(range(t.ndim - 1))


def j_d(probs: Tensor) -> Tensor:
    """Discretization objective for one node.

    Three terms over the state axis, expectations taken as means over all
    leading axes of `probs`:
      * mean per-position entropy (drives hard assignments when minimized),
      * -(1/K) * sum_k log(mean_k), which keeps every state in use,
      * ((K-1)/K) * sum_k log(1 - mean_k) on the same state index.
    All logs are clamped at 1e-8, as is the 1 - mean_k argument.
    """
    K = probs.shape[-1]
    lead = _lead_axes(probs)
    entropy = ag.scalar_mul(
        ag.tensor_mean(ag.tensor_sum(ag.mul(probs, ag.safe_log(probs, LOG_EPS)), axis=-1)),
        -1.0,
    )
    q = ag.tensor_mean(probs, axis=lead) if lead else probs
    usage = ag.scalar_mul(ag.tensor_sum(ag.safe_log(q, LOG_EPS)), -1.0 / K)
    one_minus_q = ag.add(Tensor(np.ones(K)), ag.scalar_mul(q, -1.0))
    spread = ag.scalar_mul(ag.tensor_sum(ag.safe_log(one_minus_q, LOG_EPS)), (K - 1) / K)
    return ag.add(ag.add(entropy, usage), spread)


def uniform_j_d(K: int) -> float:
    """Closed-form value of j_d when every row is the uniform distribution."""
    return 2.0 * np.log(K) + (K - 1) * np.log((K - 1) / K)


def aggregate_j_d(heads: list[DiscretizationHead], node_tensors: list[Tensor]) -> Tensor:
    """Mean of per-node objectives; one head per DAG node."""
    if len(heads) != len(node_tensors):
        raise ValueError(f"{len(heads)} heads for {len(node_tensors)} nodes")
    total = None
    for head, node in zip(heads, node_tensors):
        term = j_d(categorize(head, node))
        total = term if total is None else ag.add(total, term)
    return ag.scalar_mul(total, 1.0 / len(heads))
