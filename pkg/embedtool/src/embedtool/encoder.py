"""Deterministic text encoders producing unit-norm float32 vectors."""

import hashlib
import re

import numpy as np


class EncoderError(Exception):
    """Raised for bad model specs or models that cannot be loaded."""


DEFAULT_MODEL = "hash:256"

_WORD = re.compile(r"[a-z0-9]+")


def _normalize_text(text: str) -> str:
    return " ".join(str(text).lower().split())


def _slot(token: str, dim: int) -> tuple[int, float]:
    # keyed digest, not hash(): stable across processes and runs
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=b"embedtool").digest()
    value = int.from_bytes(digest, "big")
    sign = 1.0 if value & (1 << 63) else -1.0
    return value % dim, sign


class HashEncoder:
    """Feature-hashed word unigrams plus character 3-5 grams.

    Not a semantic model: shared word stems produce shared character
    grams, which gives texts about the same behavior a measurably higher
    cosine than unrelated ones. Fully deterministic and dependency-free,
    so fixtures built from it never drift.
    """

    max_chars = 4000

    def __init__(self, dim: int):
        if dim < 8:
            raise EncoderError(f"hash encoder needs dim >= 8, got {dim}")
        self.dim = int(dim)
        self.name = f"hash:{self.dim}"

    def _features(self, text: str) -> list[str]:
        normalized = _normalize_text(text)
        features = _WORD.findall(normalized)
        for width in (3, 4, 5):
            features.extend(
                normalized[i : i + width] for i in range(len(normalized) - width + 1)
            )
        return features

    def encode_batch(self, texts) -> np.ndarray:
        """One unit row per text; a row of zeros when a text has no features."""
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            for token in self._features(text):
                index, sign = _slot(token, self.dim)
                out[row, index] += sign
            norm = np.linalg.norm(out[row])
            if norm > 0.0:
                out[row] /= norm
        return out.astype(np.float32)


class SentenceTransformerEncoder:
    """Thin adapter over a locally available sentence-similarity model."""

    def __init__(self, model_name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError:
            raise EncoderError(
                f"model {model_name!r} needs the 'transformers' extra "
                "(pip install embedtool[transformers])"
            ) from None
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise EncoderError(f"could not load model {model_name!r}: {exc}") from None
        self.dim = int(self._model.get_sentence_embedding_dimension())
        self.name = model_name
        # rough character window derived from the token limit
        self.max_chars = int(getattr(self._model, "max_seq_length", 256)) * 4

    def encode_batch(self, texts) -> np.ndarray:
        vectors = self._model.encode(
            [str(t) for t in texts], normalize_embeddings=True, convert_to_numpy=True
        )
        return np.asarray(vectors, dtype=np.float32)


def get_encoder(model_name: str):
    """Resolve a model spec: hash:<dim> builds in-process, else a local model."""
    if not model_name or not str(model_name).strip():
        raise EncoderError("model name is empty")
    name = str(model_name).strip()
    if name.startswith("hash:"):
        spec = name[len("hash:"):]
        try:
            dim = int(spec)
        except ValueError:
            raise EncoderError(f"bad hash encoder spec {name!r}: dim must be an integer") from None
        return HashEncoder(dim)
    if name == "hash":
        raise EncoderError("hash encoder needs a dimension, e.g. hash:256")
    return SentenceTransformerEncoder(name)
