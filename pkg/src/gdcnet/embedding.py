"""Encoder providers and projection heads into the shared latent space."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Sample
from .errors import DataError, ShapeError
from .ops import Linear

SPACES = ("text_raw", "image_raw", "shared", "fusion")

_TOKEN = re.compile(r"[^\W_]+")


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray
    space: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ShapeError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(values)):
            raise DataError("embedding has non-finite entries")
        if self.space not in SPACES:
            raise ShapeError(f"unknown space {self.space!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dimension(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other):
        return (
            isinstance(other, EmbeddingVector)
            and self.space == other.space
            and np.array_equal(self.values, other.values)
        )


def tokenize(text: str) -> list[str]:
    """Lowercase and split on anything that is not a letter or digit."""
    return _TOKEN.findall(text.lower())


def token_bucket(token: str, dim: int) -> tuple[int, float]:
    """Stable (index, sign) for a token. Independent of PYTHONHASHSEED."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=16).digest()
    index = int.from_bytes(digest[:8], "little") % dim
    sign = 1.0 if digest[8] & 1 else -1.0
    return index, sign


def hash_accumulate(text: str, dim: int) -> np.ndarray:
    vec = np.zeros(dim)
    for tok in tokenize(text):
        i, s = token_bucket(tok, dim)
        vec[i] += s
    return vec


def encode_text_hashed(text: str, dim: int = 512) -> EmbeddingVector:
    """Signed feature-hashing bag of words, L2-normalised.

    Texts whose token contributions cancel (or have no tokens) map to the
    zero vector, which is returned unnormalised.
    """
    if dim < 8:
        raise ShapeError(f"hashed text dimension must be >= 8, got {dim}")
    vec = hash_accumulate(text, dim)
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec = vec / norm
    return EmbeddingVector(vec, "text_raw")


class FeatureStore:
    """Image feature records keyed by path, read from ``{"path", "vec"}`` JSON-Lines."""

    def __init__(self, records=None):
        self._vecs = {}
        for path, vec in (records or {}).items():
            self._vecs[str(path)] = np.asarray(vec, dtype=np.float64)

    @classmethod
    def load(cls, path) -> "FeatureStore":
        records = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    records[obj["path"]] = obj["vec"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise DataError(f"{path} line {lineno}: bad feature record ({exc})") from exc
        return cls(records)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for key, vec in self._vecs.items():
                fh.write(json.dumps({"path": key, "vec": vec.tolist()}) + "\n")

    def get(self, path):
        return self._vecs.get(str(path))

    def __contains__(self, path):
        return str(path) in self._vecs


def encode_image_passthrough(sample: Sample, store: FeatureStore | None = None) -> EmbeddingVector:
    if sample.image_vec is not None:
        return EmbeddingVector(np.array(sample.image_vec), "image_raw")
    vec = store.get(sample.image_path) if store is not None else None
    if vec is None:
        raise DataError(f"sample {sample.id}: no image feature for path {sample.image_path!r}")
    return EmbeddingVector(vec, "image_raw")


class HashedTextEncoder:
    """Deterministic text encoder provider. Exposes no trainable parameters."""

    output_space = "text_raw"

    def __init__(self, dim: int = 512):
        if dim < 8:
            raise ShapeError(f"hashed text dimension must be >= 8, got {dim}")
        self.dim = dim
        self.name = f"hashed-bow-{dim}"

    def __call__(self, text: str) -> EmbeddingVector:
        return encode_text_hashed(text, self.dim)

    def encode_batch(self, texts) -> np.ndarray:
        return np.stack([self(t).values for t in texts])

    def parameters(self) -> dict:
        return {}


class PassthroughImageEncoder:
    """Image provider returning stored feature vectors verbatim."""

    output_space = "image_raw"

    def __init__(self, dim: int = 768, store: FeatureStore | None = None):
        self.dim = dim
        self.store = store
        self.name = f"passthrough-{dim}"

    def __call__(self, sample: Sample) -> EmbeddingVector:
        emb = encode_image_passthrough(sample, self.store)
        if emb.dimension != self.dim:
            raise DataError(f"sample {sample.id}: image feature has dim {emb.dimension}, expected {self.dim}")
        return emb

    def encode_batch(self, samples) -> np.ndarray:
        return np.stack([self(s).values for s in samples])

    def parameters(self) -> dict:
        return {}


class ProjectionHead(Linear):
    """Learnable linear map between two declared embedding spaces."""

    def __init__(self, weight, bias=None, input_space="text_raw", output_space="shared"):
        super().__init__(weight, bias)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"inconsistent head shapes W{self.weight.shape} b{self.bias.shape}")
        self.input_space = input_space
        self.output_space = output_space


def project(head: ProjectionHead, h: EmbeddingVector) -> EmbeddingVector:
    if h.space != head.input_space:
        raise ShapeError(f"head expects {head.input_space} input, got {h.space}")
    if h.dimension != head.d_in:
        raise ShapeError(f"head expects dimension {head.d_in}, got {h.dimension}")
    return EmbeddingVector(head.weight @ h.values + head.bias, head.output_space)
