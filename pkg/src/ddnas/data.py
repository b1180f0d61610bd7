"""Corpus ingestion, tokenization, vocabulary, padding, and splitting.

Input files are UTF-8 lines of `label<TAB>text`. Labels are mapped to
class indices in first-seen order. Splits are seeded, label-stratified,
and exhaustive; validation is carved out of the training share.
"""

from __future__ import annotations

import string
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

PAD_ID = 0
UNK_ID = 1
_PUNCT = set(string.punctuation)


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace tokenizer; edge punctuation becomes its own token.

    Interior punctuation (apostrophes, hyphens, ...) stays inside the word.
    """
    out = []
    for chunk in text.lower().split():
        head = []
        while chunk and chunk[0] in _PUNCT:
            head.append(chunk[0])
            chunk = chunk[1:]
        tail = []
        while chunk and chunk[-1] in _PUNCT:
            tail.append(chunk[-1])
            chunk = chunk[:-1]
        out.extend(head)
        if chunk:
            out.append(chunk)
        out.extend(reversed(tail))
    return out


@dataclass
class Vocabulary:
    token_to_id: dict[str, int]
    id_to_token: list[str]

    def __len__(self) -> int:
        return len(self.id_to_token)

    def id(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def to_json_dict(self) -> dict:
        return {"tokens": self.id_to_token[2:]}

    @classmethod
    def from_json_dict(cls, payload: dict) -> "Vocabulary":
        return _vocab_from_tokens(payload["tokens"])


def _vocab_from_tokens(tokens: list[str]) -> Vocabulary:
    id_to_token = ["<pad>", "<unk>"] + list(tokens)
    token_to_id = {tok: i for i, tok in enumerate(id_to_token[2:], start=2)}
    return Vocabulary(token_to_id=token_to_id, id_to_token=id_to_token)


def build_vocab(corpus, min_freq: int = 2) -> Vocabulary:
    """Vocabulary over tokens with frequency >= min_freq.

    Ids are assigned by (frequency desc, token asc) after the reserved
    pad/unk slots, so identical corpora give identical vocabularies.
    """
    if min_freq < 1:
        raise ValueError(f"min_freq must be >= 1, got {min_freq}")
    counts = Counter()
    n_docs = 0
    for text in corpus:
        n_docs += 1
        counts.update(tokenize(text))
    if n_docs == 0:
        raise ValueError("build_vocab: empty corpus")
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_freq),
        key=lambda tok: (-counts[tok], tok),
    )
    return _vocab_from_tokens(kept)


@dataclass(eq=False)
class Example:
    token_ids: np.ndarray  # (l_max,) int64, pad-filled past true_length
    true_length: int
    label: int | None = None


def encode(text: str, vocab: Vocabulary, l_max: int, label: int | None = None) -> Example:
    """Encode to exactly l_max ids: truncate, then right-pad with the pad id."""
    if l_max < 1:
        raise ValueError(f"l_max must be >= 1, got {l_max}")
    tokens = tokenize(text)[:l_max]
    ids = np.full(l_max, PAD_ID, dtype=np.int64)
    ids[: len(tokens)] = [vocab.id(tok) for tok in tokens]
    return Example(token_ids=ids, true_length=len(tokens), label=label)


def decode(example: Example, vocab: Vocabulary) -> list[str]:
    return [vocab.id_to_token[i] for i in example.token_ids[: example.true_length]]


@dataclass
class SplitSpec:
    train_fraction: float = 0.8
    test_fraction: float = 0.2
    validation_fraction_of_train: float = 0.05
    seed: int = 0

    def __post_init__(self):
        for name in ("train_fraction", "test_fraction", "validation_fraction_of_train"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {v}")
        if abs(self.train_fraction + self.test_fraction - 1.0) > 1e-9:
            raise ValueError("train_fraction + test_fraction must equal 1")


def _allocate(per_class_sizes: list[int], total_target: int, fraction: float) -> list[int]:
    # largest-remainder allocation: exact global count, near-proportional per class
    ideals = [n * fraction for n in per_class_sizes]
    base = [int(np.floor(v)) for v in ideals]
    short = total_target - sum(base)
    order = sorted(range(len(base)), key=lambda c: (-(ideals[c] - base[c]), c))
    for c in order[:short]:
        base[c] += 1
    return base


def split(labels, spec: SplitSpec) -> tuple[list[int], list[int], list[int]]:
    """Partition example indices into (train, val, test).

    Seeded and deterministic; stratified by label via largest-remainder
    allocation so the global counts are exact. Warns if any class ends up
    absent from a split.
    """
    labels = list(labels)
    if not labels:
        raise ValueError("split: empty dataset")
    rng = np.random.default_rng(spec.seed)
    classes = sorted(set(labels))
    by_class = {c: [i for i, y in enumerate(labels) if y == c] for c in classes}
    for c in classes:
        by_class[c] = [by_class[c][k] for k in rng.permutation(len(by_class[c]))]

    sizes = [len(by_class[c]) for c in classes]
    n_test = int(round(len(labels) * spec.test_fraction))
    test_per_class = _allocate(sizes, n_test, spec.test_fraction)

    train_pool_sizes = [n - t for n, t in zip(sizes, test_per_class)]
    n_val = int(round(sum(train_pool_sizes) * spec.validation_fraction_of_train))
    val_per_class = _allocate(train_pool_sizes, n_val, spec.validation_fraction_of_train)

    train_idx, val_idx, test_idx = [], [], []
    for c, n_t, n_v in zip(classes, test_per_class, val_per_class):
        pool = by_class[c]
        test_idx.extend(pool[:n_t])
        val_idx.extend(pool[n_t : n_t + n_v])
        train_idx.extend(pool[n_t + n_v :])

    for name, idx in (("train", train_idx), ("val", val_idx), ("test", test_idx)):
        present = {labels[i] for i in idx}
        missing = [c for c in classes if c not in present]
        if missing:
            warnings.warn(f"classes {missing} absent from {name} split", stacklevel=2)

    train_idx = [train_idx[k] for k in rng.permutation(len(train_idx))]
    val_idx = [val_idx[k] for k in rng.permutation(len(val_idx))]
    test_idx = [test_idx[k] for k in rng.permutation(len(test_idx))]
    return train_idx, val_idx, test_idx


def load_tsv(path) -> list[tuple[str, str]]:
    """Read `label<TAB>text` lines; blank lines are skipped."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'label<TAB>text'")
            label, text = line.split("\t", 1)
            records.append((label, text))
    return records


def label_map_from_records(records) -> dict[str, int]:
    """Label string -> class index, in first-seen order."""
    mapping: dict[str, int] = {}
    for label, _ in records:
        if label not in mapping:
            mapping[label] = len(mapping)
    return mapping


def encode_records(records, vocab: Vocabulary, l_max: int, label_map: dict[str, int]) -> list[Example]:
    return [encode(text, vocab, l_max, label=label_map[label]) for label, text in records]
