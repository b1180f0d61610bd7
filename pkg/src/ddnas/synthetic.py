"""Synthetic two-class keyword corpus for desk-scale runs.

Each class owns a disjoint keyword set; documents mix shared fillers with
a few keywords of their class, so a bag-of-keywords rule classifies the
corpus perfectly. Useful as a training oracle and for CLI demos.
"""

from __future__ import annotations

import numpy as np

POSITIVE_KEYWORDS = (
    "stellar", "superb", "delightful", "uplifting", "brilliant",
    "charming", "gripping", "masterful",
)
NEGATIVE_KEYWORDS = (
    "dreadful", "awful", "tedious", "grating", "lifeless",
    "clumsy", "hollow", "dismal",
)
FILLERS = (
    "the", "a", "this", "that", "movie", "film", "plot", "acting",
    "scene", "score", "camera", "story", "was", "is", "felt", "seemed",
    "really", "quite", "rather", "very", "and", "but", "with", "about",
)


def make_keyword_corpus(n_examples: int = 600, seed: int = 0,
                        min_len: int = 6, max_len: int = 24) -> list[tuple[str, str]]:
    """Balanced list of (label, text) records; labels are 'pos' and 'neg'."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_examples):
        label = "pos" if i % 2 == 0 else "neg"
        keywords = POSITIVE_KEYWORDS if label == "pos" else NEGATIVE_KEYWORDS
        length = int(rng.integers(min_len, max_len + 1))
        n_key = int(rng.integers(2, 6))
        words = [str(rng.choice(FILLERS)) for _ in range(max(length - n_key, 1))]
        words.extend(str(rng.choice(keywords)) for _ in range(n_key))
        order = rng.permutation(len(words))
        records.append((label, " ".join(words[k] for k in order)))
    return records


def write_tsv(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for label, text in records:
            fh.write(f"{label}\t{text}\n")


def main(argv=None):
    import argparse

    parser = argparse.ArgumentParser(description="Write a synthetic keyword corpus as TSV.")
    parser.add_argument("--out", required=True)
    parser.add_argument("--n", type=int, default=600)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    write_tsv(make_keyword_corpus(args.n, seed=args.seed), args.out)


if __name__ == "__main__":
    main()
