"""Metrics, discretization histograms, ablation switches, and all exports.

Checkpoints are JSON-numeric so a round trip restores every float64
bit-exactly (shortest-repr float serialization is lossless).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace

import numpy as np

from . import data as data_mod
from . import ops
from .autograd import Tensor
from .dag import DerivedArchitecture, FrozenDag
from .model import TextClassifier

CHECKPOINT_VERSION = 1

ABLATION_FAMILIES = ("Conv", "DilatedConv", "Pooling", "None", "discretization")


@dataclass
class MetricsReport:
    accuracy: float
    f1: float  # positive-class F1 for binary, macro-F1 otherwise
    per_class_accuracy: list[float]
    confusion: np.ndarray  # rows true, columns predicted

    def to_json_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f1": self.f1,
            "per_class_accuracy": self.per_class_accuracy,
            "confusion": self.confusion.tolist(),
        }


def _f1_for_class(confusion: np.ndarray, c: int) -> float:
    tp = confusion[c, c]
    fp = confusion[:, c].sum() - tp
    fn = confusion[c, :].sum() - tp
    if 2 * tp + fp + fn == 0:
        return 0.0
    return float(2 * tp / (2 * tp + fp + fn))


def compute_metrics(predictions, labels, n_classes: int) -> MetricsReport:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.size == 0:
        raise ValueError("compute_metrics: empty input")
    if predictions.shape != labels.shape:
        raise ValueError(
            f"compute_metrics: {predictions.shape[0]} predictions vs {labels.shape[0]} labels"
        )
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (labels, predictions), 1)
    accuracy = float(np.trace(confusion) / confusion.sum())
    per_class = [
        float(confusion[c, c] / confusion[c].sum()) if confusion[c].sum() else 0.0
        for c in range(n_classes)
    ]
    if n_classes == 2:
        f1 = _f1_for_class(confusion, 1)
    else:
        f1 = float(np.mean([_f1_for_class(confusion, c) for c in range(n_classes)]))
    return MetricsReport(accuracy=accuracy, f1=f1, per_class_accuracy=per_class, confusion=confusion)


@dataclass
class StateHistogram:
    counts: np.ndarray  # (n_nodes, K) ints over non-pad positions
    degenerate: list[bool]  # per node: every word fell into one state

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["node", "state", "count"])
            for node in range(self.counts.shape[0]):
                for state in range(self.counts.shape[1]):
                    writer.writerow([node, state, int(self.counts[node, state])])


def state_histogram(model: TextClassifier, examples, batch_size: int = 64) -> StateHistogram:
    """Count, per node and state, the non-pad words whose argmax state is k."""
    if not model.heads:
        raise ValueError("model has no discretization heads")
    n_nodes = model.dag.n_nodes
    counts = np.zeros((n_nodes, model.K), dtype=np.int64)
    for start in range(0, len(examples), batch_size):
        chunk = examples[start : start + batch_size]
        out = model.forward_batch(chunk, lam=0.0)
        lengths = np.array([ex.true_length for ex in chunk])
        l = chunk[0].token_ids.shape[0]
        mask = np.arange(l)[None, :] < lengths[:, None]
        for node, probs in enumerate(out.node_state_probs):
            states = np.argmax(probs.data, axis=-1)  # ties pick the lowest state
            np.add.at(counts[node], states[mask], 1)
    degenerate = [bool((row > 0).sum() <= 1) for row in counts]
    return StateHistogram(counts=counts, degenerate=degenerate)


def ablate(config, drop: str):
    """Return a config with one operation family removed, or discretization off."""
    if drop not in ABLATION_FAMILIES:
        raise ValueError(f"unknown ablation target {drop!r}; choose from {ABLATION_FAMILIES}")
    if drop == "discretization":
        return replace(config, lam=0.0, discretization=False)
    removed = set(ops.OP_FAMILIES[drop])
    remaining = tuple(k for k in config.op_kinds if k not in removed)
    if not remaining:
        raise ValueError("ablation would remove every candidate operation")
    return replace(config, op_kinds=remaining)


# ---------------------------------------------------------------------------
# serialization


def save_architecture(arch: DerivedArchitecture, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(arch.to_json_dict(), fh, indent=2)


def load_architecture(path) -> DerivedArchitecture:
    with open(path, encoding="utf-8") as fh:
        return DerivedArchitecture.from_json_dict(json.load(fh))


def save_dot(arch: DerivedArchitecture, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(arch.to_dot() + "\n")


def _tensor_payload(t: Tensor) -> list:
    return t.data.tolist()


def save_checkpoint(model: TextClassifier, vocab: data_mod.Vocabulary,
                    label_map: dict[str, int], path, l_max: int = 384):
    """Dump a derived-architecture model with every parameter group."""
    if not isinstance(model.dag, FrozenDag):
        raise ValueError("checkpoints hold derived models; derive the search DAG first")
    edges = {}
    for (i, j), op in model.dag.ops.items():
        entry = {"kind": op.kind}
        if op.kernel is not None:
            entry["kernel"] = _tensor_payload(op.kernel)
            entry["bias"] = _tensor_payload(op.bias)
        edges[f"{i}->{j}"] = entry
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "dim": model.dim,
        "K": model.K,
        "l_max": l_max,
        "n_classes": model.n_classes,
        "ce_mode": model.ce_mode,
        "architecture": model.dag.arch.to_json_dict(),
        "vocab": vocab.to_json_dict(),
        "label_map": label_map,
        "params": {
            "embedding": _tensor_payload(model.embedding),
            "edges": edges,
            "heads": [
                {"weight": _tensor_payload(h.weight), "bias": _tensor_payload(h.bias)}
                for h in model.heads
            ],
            "w1": _tensor_payload(model.w1),
            "b1": _tensor_payload(model.b1),
            "wt": _tensor_payload(model.wt),
            "bt": _tensor_payload(model.bt),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path) -> tuple[TextClassifier, data_mod.Vocabulary, dict[str, int], dict]:
    """Rebuild (model, vocab, label_map, meta) from a checkpoint file."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('format_version')}")
    arch = DerivedArchitecture.from_json_dict(payload["architecture"])
    vocab = data_mod.Vocabulary.from_json_dict(payload["vocab"])
    params = payload["params"]
    embedding = np.asarray(params["embedding"], dtype=np.float64)

    dag = FrozenDag(arch, payload["dim"], seed=0)
    for key, entry in params["edges"].items():
        i, j = (int(v) for v in key.split("->"))
        op = dag.ops[(i, j)]
        if op.kind != entry["kind"]:
            raise ValueError(f"edge {key}: checkpoint kind {entry['kind']} vs {op.kind}")
        if op.kernel is not None:
            op.kernel.data = np.asarray(entry["kernel"], dtype=np.float64)
            op.bias.data = np.asarray(entry["bias"], dtype=np.float64)

    if params["heads"] and len(params["heads"]) != arch.n_nodes:
        raise ValueError(f"checkpoint has {len(params['heads'])} heads for {arch.n_nodes} nodes")
    model = TextClassifier(
        vocab_size=embedding.shape[0],
        n_classes=payload["n_classes"],
        dim=payload["dim"],
        dag=dag,
        K=payload["K"],
        seed=0,
        heads_enabled=bool(params["heads"]),
        ce_mode=payload["ce_mode"],
    )
    model.embedding.data = embedding
    for head, entry in zip(model.heads, params["heads"]):
        head.weight.data = np.asarray(entry["weight"], dtype=np.float64)
        head.bias.data = np.asarray(entry["bias"], dtype=np.float64)
    model.w1.data = np.asarray(params["w1"], dtype=np.float64)
    model.b1.data = np.asarray(params["b1"], dtype=np.float64)
    model.wt.data = np.asarray(params["wt"], dtype=np.float64)
    model.bt.data = np.asarray(params["bt"], dtype=np.float64)
    meta = {"l_max": payload.get("l_max", 384), "format_version": payload["format_version"]}
    return model, vocab, payload["label_map"], meta
