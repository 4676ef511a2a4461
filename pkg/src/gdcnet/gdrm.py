"""Generative discrepancy features between a post, its image caption and the image.

Three scalars are compared: semantic distance between text and caption
embeddings, L1 distance between their sentiment distributions, and how
well the caption agrees with the image. A small MLP lifts the triple to
a dense discrepancy representation.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .embedding import tokenize
from .errors import DataError, DomainError, ShapeError
from .ops import Linear, cosine, relu

LEXICON_VERSION = 1
SENTIMENT_CLASSES = ("negative", "neutral", "positive")


@dataclass(frozen=True, eq=False)
class SentimentDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.shape != (3,):
            raise ShapeError(f"sentiment distribution must have 3 entries, got shape {p.shape}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise DomainError(f"not a probability distribution: {p}")
        object.__setattr__(self, "probs", p)


class SentimentLexicon:
    """Word polarity table read from ``word<TAB>+1|-1`` lines (``#`` starts a comment)."""

    def __init__(self, polarity: dict[str, int]):
        self.polarity = dict(polarity)

    @classmethod
    def load(cls, path=None) -> "SentimentLexicon":
        if path is None:
            text = resources.files("gdcnet.resources").joinpath(f"lexicon_v{LEXICON_VERSION}.tsv").read_text("utf-8")
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        table = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                word, pol = line.rstrip("\n").split("\t")
                pol = int(pol)
            except ValueError as exc:
                raise DataError(f"lexicon line {lineno}: expected word<TAB>polarity") from exc
            if pol not in (1, -1):
                raise DataError(f"lexicon line {lineno}: polarity must be +1 or -1")
            table[word.lower()] = pol
        return cls(table)

    def hits(self, text: str) -> tuple[int, int]:
        """(negative hits, positive hits) over the text's tokens."""
        neg = pos = 0
        for tok in tokenize(text):
            pol = self.polarity.get(tok)
            if pol == 1:
                pos += 1
            elif pol == -1:
                neg += 1
        return neg, pos


_default_lexicon = None


def default_lexicon() -> SentimentLexicon:
    global _default_lexicon
    if _default_lexicon is None:
        _default_lexicon = SentimentLexicon.load()
    return _default_lexicon


def sentiment_score_lexicon(text: str, lexicon: SentimentLexicon | None = None) -> SentimentDistribution:
    """Smoothed lexicon-count sentiment: ``(n, 1, p) / (n + 1 + p)``."""
    lexicon = lexicon or default_lexicon()
    n, p = lexicon.hits(text)
    return SentimentDistribution(np.array([n, 1.0, p]) / (n + 1.0 + p))


def sentiment_discrepancy(p: SentimentDistribution, q: SentimentDistribution) -> float:
    return float(np.abs(_probs(p) - _probs(q)).sum())


def _probs(d):
    return d.probs if isinstance(d, SentimentDistribution) else np.asarray(d, dtype=np.float64)


def _vec(v):
    return np.asarray(getattr(v, "values", v), dtype=np.float64)


def semantic_discrepancy(z_text, z_caption) -> float:
    """``1 - cos``; a zero-norm operand gives 1."""
    a, b = _vec(z_text), _vec(z_caption)
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch {a.shape} vs {b.shape}")
    return 1.0 - cosine(a, b)


def fidelity(z_image, z_caption) -> float:
    """Cosine between image and caption in the shared space. Lower means the caption drifted."""
    a, b = _vec(z_image), _vec(z_caption)
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch {a.shape} vs {b.shape}")
    return cosine(a, b)


@dataclass(frozen=True)
class DiscrepancyTriple:
    d_sem: float
    d_sen: float
    d_fidelity: float

    def __post_init__(self):
        tol = 1e-12
        for name, lo, hi in (("d_sem", 0.0, 2.0), ("d_sen", 0.0, 2.0), ("d_fidelity", -1.0, 1.0)):
            v = getattr(self, name)
            if not (lo - tol <= v <= hi + tol):
                raise DomainError(f"{name}={v} outside [{lo}, {hi}]")

    def as_array(self) -> np.ndarray:
        return np.array([self.d_sem, self.d_sen, self.d_fidelity])


def discrepancy_vector(d_sem: float, d_sen: float, d_fid: float) -> DiscrepancyTriple:
    return DiscrepancyTriple(float(d_sem), float(d_sen), float(d_fid))


class DiscrepancyMLP:
    """3 -> hidden -> d_f network with a rectified hidden layer."""

    def __init__(self, layer1: Linear, layer2: Linear):
        if layer1.d_in != 3:
            raise ShapeError(f"discrepancy MLP input must be 3, got {layer1.d_in}")
        if layer2.d_in != layer1.d_out:
            raise ShapeError("discrepancy MLP layer sizes do not chain")
        self.layer1 = layer1
        self.layer2 = layer2

    @classmethod
    def init(cls, rng, hidden: int = 64, d_f: int = 128) -> "DiscrepancyMLP":
        return cls(Linear.init(rng, 3, hidden), Linear.init(rng, hidden, d_f))

    def forward(self, D):
        a1 = self.layer1(D)
        r = relu(a1)
        return self.layer2(r), (D, a1, r)

    def __call__(self, D):
        return self.forward(D)[0]

    def backward(self, dout, cache):
        """Return ``(grads, dD)`` where grads holds W1, b1, W2, b2."""
        D, a1, r = cache
        dW2, db2, dr = self.layer2.backward(r, dout)
        da1 = dr * (a1 > 0)
        dW1, db1, dD = self.layer1.backward(D, da1)
        return {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2}, dD


def discrepancy_representation(mlp: DiscrepancyMLP, D) -> np.ndarray:
    x = D.as_array() if isinstance(D, DiscrepancyTriple) else np.asarray(D, dtype=np.float64)
    if x.shape[-1] != 3:
        raise ShapeError(f"discrepancy input must have 3 features, got {x.shape}")
    return mlp(x)
