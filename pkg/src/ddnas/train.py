"""Alternating search, architecture selection, and retrain-from-scratch.

The search alternates two Adam optimizers: operation weights, embedding,
heads, and classifier parameters step on training batches; the per-edge
mixture logits step on validation batches. Retraining rebuilds the
derived architecture with fresh parameters and never sees the logits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import data as data_mod
from . import evaluate as eval_mod
from . import ops
from .autograd import Tensor
from .dag import DerivedArchitecture, FrozenDag, SearchDag
from .model import TextClassifier


@dataclass
class TrainConfig:
    batch_size: int = 64
    dim: int = 256
    n_nodes: int = 5
    K: int = 64
    l_max: int = 384
    lam: float = 0.5
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    search_epochs: int = 30
    retrain_epochs: int = 50
    seed: int = 0
    op_kinds: tuple[str, ...] = ops.OP_KINDS
    discretization: bool = True
    discretization_on_val: bool = True
    ce_mode: str = "per_class"
    min_freq: int = 2
    train_fraction: float = 0.8
    test_fraction: float = 0.2
    val_fraction: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        for name in ("batch_size", "dim", "n_nodes", "K", "l_max", "lr",
                     "search_epochs", "retrain_epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SearchRun:
    seed: int
    history: list[dict]
    alpha: dict[str, list[float]]
    derived: DerivedArchitecture
    best_val_acc: float
    step_trace: list[dict] = field(default_factory=list)


class NonFiniteLossError(RuntimeError):
    def __init__(self, message: str, snapshot: dict):
        super().__init__(message)
        self.snapshot = snapshot


class Adam:
    """Adam with bias correction over a fixed list of tensors."""

    def __init__(self, params: list[Tensor], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            m_hat = self.m[i] / (1 - self.beta1**self.t)
            v_hat = self.v[i] / (1 - self.beta2**self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: Adam | None,
              lr: float = 0.001) -> Adam:
    """One functional Adam update; creates the state on first use."""
    if state is None:
        state = Adam(params, lr=lr)
    for p, g in zip(params, grads):
        p.grad = g
    state.step()
    state.zero_grad()
    return state


def build_search_model(vocab_size: int, n_classes: int, cfg: TrainConfig, seed) -> TextClassifier:
    dag = SearchDag(cfg.n_nodes, cfg.dim, seed=(seed, 10), op_kinds=cfg.op_kinds)
    return TextClassifier(
        vocab_size, n_classes, cfg.dim, dag, cfg.K, seed=(seed, 11),
        heads_enabled=cfg.discretization, ce_mode=cfg.ce_mode,
    )


def build_derived_model(arch: DerivedArchitecture, vocab_size: int, n_classes: int,
                        cfg: TrainConfig, seed) -> TextClassifier:
    dag = FrozenDag(arch, cfg.dim, seed=(seed, 20))
    return TextClassifier(
        vocab_size, n_classes, cfg.dim, dag, cfg.K, seed=(seed, 21),
        heads_enabled=cfg.discretization, ce_mode=cfg.ce_mode,
    )


def _batches(examples, order, batch_size):
    for start in range(0, len(order), batch_size):
        yield [examples[i] for i in order[start : start + batch_size]]


def _accuracy(model: TextClassifier, examples, batch_size: int) -> float:
    preds = model.predict(examples, batch_size=batch_size)
    labels = np.array([ex.label for ex in examples])
    return float((preds == labels).mean())


def _loss_scalars(out) -> tuple[float, float, float]:
    j = out.j.item()
    jc = out.j_c.item()
    jd = out.j_d.item() if out.j_d is not None else 0.0
    return j, jc, jd


def _check_finite(value: float, context: dict):
    if not np.isfinite(value):
        raise NonFiniteLossError(f"non-finite loss at {context}", snapshot=context)


def _write_log_line(log_file, record: dict):
    if log_file is not None:
        log_file.write(json.dumps(record) + "\n")
        log_file.flush()


def search(train_examples, val_examples, cfg: TrainConfig, vocab_size: int, n_classes: int,
           log_path=None, trace_steps: bool = False) -> SearchRun:
    """Alternating optimization over one seed; returns the derived architecture.

    Per training batch: (a) one Adam step on everything except the mixture
    logits, minimizing the joint loss on the batch; (b) one Adam step on
    the logits alone, minimizing the (joint or classification-only) loss
    on the next validation batch, cycling validation as needed.
    """
    if not train_examples or not val_examples:
        raise ValueError("search: empty train or validation split")
    model = build_search_model(vocab_size, n_classes, cfg, seed=cfg.seed)
    opt_w = Adam(model.weight_parameters(), lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    opt_a = Adam(model.arch_parameters(), lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    rng = np.random.default_rng((cfg.seed, 30))
    lam = cfg.lam if cfg.discretization else 0.0
    lam_val = lam if cfg.discretization_on_val else 0.0

    history = []
    step_trace = []
    best_val_acc = 0.0
    log_file = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        val_order = []
        val_pos = 0
        for epoch in range(cfg.search_epochs):
            train_order = rng.permutation(len(train_examples))
            epoch_j, epoch_jc, epoch_jd, epoch_val_j = [], [], [], []
            for batch in _batches(train_examples, train_order, cfg.batch_size):
                out = model.forward_batch(batch, lam=lam)
                j, jc, jd = _loss_scalars(out)
                _check_finite(j, {"phase": "weights", "epoch": epoch, "j": j, "j_c": jc, "j_d": jd})
                out.j.backward()
                opt_w.step()
                opt_w.zero_grad()
                opt_a.zero_grad()
                epoch_j.append(j)
                epoch_jc.append(jc)
                epoch_jd.append(jd)
                if trace_steps:
                    step_trace.append({"phase": "weights", "j": j, "j_c": jc, "j_d": jd})

                val_batch = []
                for _ in range(min(cfg.batch_size, len(val_examples))):
                    if val_pos >= len(val_order):
                        val_order = list(rng.permutation(len(val_examples)))
                        val_pos = 0
                    val_batch.append(val_examples[val_order[val_pos]])
                    val_pos += 1
                out_v = model.forward_batch(val_batch, lam=lam_val)
                jv, jcv, jdv = _loss_scalars(out_v)
                _check_finite(jv, {"phase": "alpha", "epoch": epoch, "j": jv, "j_c": jcv, "j_d": jdv})
                out_v.j.backward()
                opt_a.step()
                opt_a.zero_grad()
                opt_w.zero_grad()
                epoch_val_j.append(jv)
                if trace_steps:
                    step_trace.append({"phase": "alpha", "j": jv, "j_c": jcv, "j_d": jdv})

            val_acc = _accuracy(model, val_examples, cfg.batch_size)
            best_val_acc = max(best_val_acc, val_acc)
            record = {
                "epoch": epoch,
                "train_loss": float(np.mean(epoch_j)),
                "val_loss": float(np.mean(epoch_val_j)),
                "val_acc": val_acc,
                "J_C": float(np.mean(epoch_jc)),
                "J_D": float(np.mean(epoch_jd)),
            }
            history.append(record)
            _write_log_line(log_file, record)
    finally:
        if log_file is not None:
            log_file.close()

    alpha_snapshot = {
        f"{i}->{j}": [float(v) for v in model.dag.alpha[(i, j)].data]
        for i, j in model.dag.edges
    }
    return SearchRun(
        seed=cfg.seed,
        history=history,
        alpha=alpha_snapshot,
        derived=model.dag.derive(),
        best_val_acc=best_val_acc,
        step_trace=step_trace,
    )


def retrain(arch: DerivedArchitecture, train_examples, val_examples, cfg: TrainConfig,
            vocab_size: int, n_classes: int, seed=None, log_path=None):
    """Train the frozen architecture from scratch; returns (model, history)."""
    if not train_examples:
        raise ValueError("retrain: empty training split")
    seed = cfg.seed if seed is None else seed
    model = build_derived_model(arch, vocab_size, n_classes, cfg, seed=seed)
    opt = Adam(model.weight_parameters(), lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    rng = np.random.default_rng((seed, 31))
    lam = cfg.lam if cfg.discretization else 0.0

    history = []
    log_file = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(cfg.retrain_epochs):
            order = rng.permutation(len(train_examples))
            epoch_j, epoch_jc, epoch_jd = [], [], []
            for batch in _batches(train_examples, order, cfg.batch_size):
                out = model.forward_batch(batch, lam=lam)
                j, jc, jd = _loss_scalars(out)
                _check_finite(j, {"phase": "retrain", "epoch": epoch, "j": j, "j_c": jc, "j_d": jd})
                out.j.backward()
                opt.step()
                opt.zero_grad()
                epoch_j.append(j)
                epoch_jc.append(jc)
                epoch_jd.append(jd)
            record = {
                "epoch": epoch,
                "train_loss": float(np.mean(epoch_j)),
                "val_loss": float("nan"),
                "val_acc": float("nan"),
                "J_C": float(np.mean(epoch_jc)),
                "J_D": float(np.mean(epoch_jd)),
            }
            if val_examples:
                record["val_acc"] = _accuracy(model, val_examples, cfg.batch_size)
                out_v = model.forward_batch(val_examples[: cfg.batch_size], lam=lam)
                record["val_loss"] = out_v.j.item()
            history.append(record)
            _write_log_line(log_file, record)
    finally:
        if log_file is not None:
            log_file.close()
    return model, history


def select_and_retrain(records, cfg: TrainConfig, n_seeds: int = 10, n_repeats: int = 1,
                       out_dir=None) -> dict:
    """Full protocol: split, search across seeds, pick by validation, retrain, test.

    The test split never enters search, selection, or vocabulary
    construction; the report carries the audit sets so callers can verify.
    """
    if n_seeds < 1 or n_repeats < 1:
        raise ValueError("n_seeds and n_repeats must be >= 1")
    records = list(records)
    label_map = data_mod.label_map_from_records(records)
    labels = [label_map[lab] for lab, _ in records]
    spec = data_mod.SplitSpec(
        train_fraction=cfg.train_fraction,
        test_fraction=cfg.test_fraction,
        validation_fraction_of_train=cfg.val_fraction,
        seed=cfg.seed,
    )
    train_idx, val_idx, test_idx = data_mod.split(labels, spec)
    if (set(train_idx) | set(val_idx)) & set(test_idx):
        raise RuntimeError("test indices leaked into search inputs")

    vocab = data_mod.build_vocab(
        (records[i][1] for i in train_idx + val_idx), min_freq=cfg.min_freq
    )
    encoded = data_mod.encode_records(records, vocab, cfg.l_max, label_map)
    train_ex = [encoded[i] for i in train_idx]
    val_ex = [encoded[i] for i in val_idx]
    test_ex = [encoded[i] for i in test_idx]

    runs = []
    for k in range(n_seeds):
        run_cfg = replace(cfg, seed=cfg.seed + k)
        run = search(train_ex, val_ex, run_cfg, len(vocab), len(label_map))
        runs.append(run)
    best = max(runs, key=lambda r: (r.best_val_acc, -r.seed))

    repeats = []
    for r in range(n_repeats):
        model, _ = retrain(
            best.derived, train_ex, val_ex, cfg, len(vocab), len(label_map),
            seed=cfg.seed + 1000 + r,
        )
        preds = model.predict(test_ex, batch_size=cfg.batch_size)
        test_labels = [ex.label for ex in test_ex]
        report = eval_mod.compute_metrics(preds, test_labels, len(label_map))
        repeats.append({"accuracy": report.accuracy, "f1": report.f1})

    accs = [r["accuracy"] for r in repeats]
    f1s = [r["f1"] for r in repeats]
    report = {
        "seeds": [{"seed": r.seed, "best_val_acc": r.best_val_acc} for r in runs],
        "selected_seed": best.seed,
        "architecture": best.derived.to_json_dict(),
        "repeats": repeats,
        "mean_accuracy": float(np.mean(accs)),
        "std_accuracy": float(np.std(accs)),
        "mean_f1": float(np.mean(f1s)),
        "std_f1": float(np.std(f1s)),
        "split_sizes": {"train": len(train_idx), "val": len(val_idx), "test": len(test_idx)},
        "splits": {"train": train_idx, "val": val_idx, "test": test_idx},
    }
    if out_dir is not None:
        import os

        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
    return report
