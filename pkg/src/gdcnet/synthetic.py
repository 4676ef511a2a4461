"""Synthetic incongruity data and a brute-force separability probe.

Sarcastic samples pair a text with a caption whose hashed embedding is the
exact negation of the text's and whose lexicon sentiment is reversed.
Non-sarcastic samples use a caption with the same bag of words as the
text. The text and image distributions are identical across classes, so
only the text/caption comparison carries the label.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .data import DatasetManifest, Sample
from .embedding import hash_accumulate, token_bucket
from .gdrm import SentimentLexicon, default_lexicon


@lru_cache(maxsize=None)
def antipodal_partner(token: str, dim: int, prefix: str = "zq") -> str:
    """Smallest pseudo-word landing in the same hash bucket with the opposite sign."""
    idx, sign = token_bucket(token, dim)
    k = 0
    while True:
        cand = f"{prefix}{k}"
        if token_bucket(cand, dim) == (idx, -sign):
            return cand
        k += 1


def make_incongruity_dataset(
    n: int = 32,
    d_t: int = 64,
    d_v: int = 32,
    seed: int = 0,
    splits: dict | None = None,
    n_filler: int = 4,
    vocab_size: int = 40,
    lexicon: SentimentLexicon | None = None,
) -> DatasetManifest:
    """Balanced synthetic manifest with captions attached.

    ``splits`` maps split name to fraction (default: everything in train).
    Labels alternate within each split so every split is balanced.
    """
    lexicon = lexicon or default_lexicon()
    rng = np.random.default_rng(seed)
    positive = sorted(w for w, p in lexicon.polarity.items() if p == 1)
    negative = sorted(w for w, p in lexicon.polarity.items() if p == -1)
    vocab = [f"w{i}" for i in range(vocab_size)]
    fractions = splits or {"train": 1.0}
    counts = {name: int(round(frac * n)) for name, frac in fractions.items()}
    counts[next(iter(counts))] += n - sum(counts.values())

    samples = []
    for split, count in counts.items():
        for k in range(count):
            label = k % 2
            while True:
                pos, neg = rng.choice(positive), rng.choice(negative)
                a, b = (pos, neg) if rng.random() < 0.5 else (neg, pos)
                filler = list(rng.choice(vocab, size=n_filler))
                text_tokens = [a, antipodal_partner(b, d_t)] + filler
                if np.any(hash_accumulate(" ".join(text_tokens), d_t)):
                    break
            if label == 1:
                cap_tokens = [b, antipodal_partner(a, d_t)] + [antipodal_partner(w, d_t) for w in filler]
            else:
                cap_tokens = list(text_tokens)
            order = rng.permutation(len(text_tokens))
            text_tokens = [text_tokens[i] for i in order]
            cap_tokens = [cap_tokens[i] for i in rng.permutation(len(cap_tokens))]
            samples.append(
                Sample(
                    id=f"{split}-{k:04d}",
                    text=" ".join(text_tokens),
                    caption=" ".join(cap_tokens),
                    label=label,
                    split=split,
                    image_vec=tuple(rng.standard_normal(d_v)),
                )
            )
    return DatasetManifest(samples)


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5**0.5) * i
    return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1)


def brute_force_probe(X, y, n_directions: int = 4000):
    """Exhaustively search unit directions for a threshold separating the two classes.

    Returns ``(separable, direction, threshold, gap)`` for the direction with
    the widest gap between the classes' projections. Works for 3 features.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(bool)
    best = (False, None, None, -np.inf)
    for w in fibonacci_sphere(n_directions):
        proj = X @ w
        gap = proj[y].min() - proj[~y].max()
        if gap > best[3]:
            thr = (proj[y].min() + proj[~y].max()) / 2
            best = (bool(gap > 0), w, float(thr), float(gap))
    return best
